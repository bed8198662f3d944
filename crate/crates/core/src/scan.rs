//! Entropy maps over the Bloch disk or ball and the N-scaling table.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::{
    guessing_probability_analytic_with, hmin_extrema, AnalyticOptions, CertificateReport,
};
use crate::bloch::{fibonacci_sphere, BlochVector};
use crate::error::{Error, Result};
use crate::geometry::{make_platonic_povm, make_polygon_povm, PovmGeometry, Solid};
use crate::mle::certify_state;
use crate::oracle::OracleConfig;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanDomain {
    Disk,
    Ball,
}

/// Which evaluator fills the `pg` column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScanMethod<T> {
    Analytic(AnalyticOptions<T>),
    Oracle(OracleConfig),
}

impl<T> Default for ScanMethod<T> {
    fn default() -> Self {
        ScanMethod::Analytic(AnalyticOptions {
            alpha_override: None,
        })
    }
}

/// Points of the closed unit disk in the ZX plane: an `R × R` lattice over
/// `[−1, 1]²` clipped to the disk, then a boundary ring containing every
/// vertex and facet normal of `povm`.
pub fn disk_grid<T: Scalar>(povm: &PovmGeometry<T>, resolution: usize) -> Vec<BlochVector<T>> {
    let mut pts = Vec::with_capacity(resolution * resolution + 4 * resolution);
    let step = T::lit(2.0) / T::of_usize(resolution - 1);
    for i in 0..resolution {
        let z = T::lit(-1.0) + step * T::of_usize(i);
        for j in 0..resolution {
            let x = T::lit(-1.0) + step * T::of_usize(j);
            if z * z + x * x <= T::one() {
                pts.push(BlochVector::new(x, T::zero(), z));
            }
        }
    }
    let n = povm.outcomes();
    let per_half = (2 * resolution).div_ceil(n);
    let ring = 2 * n * per_half;
    let phi0 = povm.orientation_deg().to_radians();
    for j in 0..ring {
        let phi = phi0 + T::TAU() * T::of_usize(j) / T::of_usize(ring);
        pts.push(BlochVector::in_zx_plane(phi));
    }
    pts
}

/// Points of the closed unit ball: the centre, then shells at radii
/// `j / S` (`S = ⌈R/2⌉`) carrying `round(4π j²)` Fibonacci points each plus
/// the vertex and facet-normal directions of `povm`.
pub fn ball_grid<T: Scalar>(povm: &PovmGeometry<T>, resolution: usize) -> Vec<BlochVector<T>> {
    let shells = resolution.div_ceil(2).max(1);
    let specials: Vec<BlochVector<T>> = povm
        .directions()
        .iter()
        .copied()
        .chain(povm.facets().iter().map(|f| f.normal))
        .collect();
    let mut pts = vec![BlochVector::zero()];
    for j in 1..=shells {
        let r = T::of_usize(j) / T::of_usize(shells);
        let count = (4.0 * std::f64::consts::PI * (j * j) as f64).round() as usize;
        for d in fibonacci_sphere::<T>(count)
            .into_iter()
            .chain(specials.iter().copied())
        {
            pts.push(d * r);
        }
    }
    pts
}

pub fn scan_points<T: Scalar>(
    povm: &PovmGeometry<T>,
    resolution: usize,
    domain: ScanDomain,
) -> Result<Vec<BlochVector<T>>> {
    if resolution < 2 {
        return Err(Error::Domain(format!(
            "scan resolution {resolution} must be at least 2"
        )));
    }
    Ok(match domain {
        ScanDomain::Disk => disk_grid(povm, resolution),
        ScanDomain::Ball => ball_grid(povm, resolution),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow<T> {
    pub rz: T,
    pub rx: T,
    pub ry: T,
    pub pg: T,
    pub hmin_sdi: T,
    pub hmin_trusted: T,
    pub region: String,
    pub method: String,
}

impl<T: Scalar> ScanRow<T> {
    pub fn from_report(r: BlochVector<T>, rep: CertificateReport<T>) -> Self {
        Self {
            rz: r.z,
            rx: r.x,
            ry: r.y,
            pg: rep.p_guess,
            hmin_sdi: rep.hmin_sdi,
            hmin_trusted: rep.hmin_trusted,
            region: rep.region,
            method: rep.method.tag().to_string(),
        }
    }
}

/// Evaluates every point of `points` in parallel; row order follows
/// `points` regardless of thread count.
pub fn scan_at<T: Scalar>(
    povm: &PovmGeometry<T>,
    points: &[BlochVector<T>],
    method: &ScanMethod<T>,
) -> Result<Vec<ScanRow<T>>> {
    points
        .par_iter()
        .map(|&r| {
            let rep = match method {
                ScanMethod::Analytic(opts) => guessing_probability_analytic_with(r, povm, *opts)?,
                ScanMethod::Oracle(cfg) => certify_state_oracle(r, povm, cfg)?,
            };
            Ok(ScanRow::from_report(r, rep))
        })
        .collect()
}

fn certify_state_oracle<T: Scalar>(
    r: BlochVector<T>,
    povm: &PovmGeometry<T>,
    cfg: &OracleConfig,
) -> Result<CertificateReport<T>> {
    if povm.is_planar() {
        let target =
            crate::stats::OutcomeStats::from_probs(povm.born_raw(povm.effective_vector(r)))?;
        let mut rep = crate::oracle::oracle_certify(&target, povm, cfg)?;
        rep.state = Some(r);
        rep.stats = None;
        Ok(rep)
    } else {
        let mut rep = certify_state(r, povm, cfg)?;
        rep.state = Some(r);
        Ok(rep)
    }
}

/// Entropy map over the disk (planar) or ball (solids).
pub fn scan_entropy_grid<T: Scalar>(
    povm: &PovmGeometry<T>,
    resolution: usize,
    domain: ScanDomain,
    method: &ScanMethod<T>,
) -> Result<Vec<ScanRow<T>>> {
    if domain == ScanDomain::Disk && !povm.is_planar() {
        return Err(Error::Domain("disk scans need a planar geometry".into()));
    }
    let pts = scan_points(povm, resolution, domain)?;
    scan_at(povm, &pts, method)
}

/// Formats like C's `%.9g`.
pub fn fmt_g9(x: f64) -> String {
    fmt_g(x, 9)
}

pub fn fmt_g(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let p = digits.max(1);
    let sci = format!("{:.*e}", p - 1, x);
    let (mant, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if exp < -4 || exp >= p as i32 {
        format!(
            "{}e{}{:02}",
            trim(mant),
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    } else {
        let decimals = (p as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{:.*}", decimals, x))
    }
}

pub const SCAN_HEADER: &str = "rz,rx,ry,pg,hmin_sdi,hmin_trusted,region,method";

pub fn write_scan_csv<T: Scalar, W: Write>(mut w: W, rows: &[ScanRow<T>]) -> Result<()> {
    writeln!(w, "{SCAN_HEADER}")?;
    for r in rows {
        let f = |v: T| fmt_g9(v.to_f64_lossy());
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            f(r.rz),
            f(r.rx),
            f(r.ry),
            f(r.pg),
            f(r.hmin_sdi),
            f(r.hmin_trusted),
            r.region,
            r.method
        )?;
    }
    Ok(())
}

/// Extremes of a scan: `(min hmin_sdi, max hmin_sdi, max trusted gap)`.
pub fn scan_summary<T: Scalar>(rows: &[ScanRow<T>]) -> (T, T, T) {
    rows.iter().fold(
        (T::infinity(), T::neg_infinity(), T::neg_infinity()),
        |(lo, hi, gap), r| {
            (
                lo.min(r.hmin_sdi),
                hi.max(r.hmin_sdi),
                gap.max(r.hmin_trusted - r.hmin_sdi),
            )
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub geometry: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub m_n: f64,
    pub big_m_n: f64,
    /// Trusted-scenario maximum `log₂ N`.
    pub log2_n: f64,
    pub gap: f64,
    /// `π² / (2N² ln 2)` as usually quoted; empty for solids.
    pub asymptote: Option<f64>,
    /// Leading term of the expansion of `gap`, `π² / (4N² ln 2)`.
    pub leading_term: Option<f64>,
}

/// `M_N − m_N = −2 log₂ cos(α/2)`, evaluated without cancellation.
fn extrema_gap(alpha: f64) -> f64 {
    -2.0 * (alpha / 2.0).cos().ln() / std::f64::consts::LN_2
}

fn scaling_row(geometry: String, povm: &PovmGeometry<f64>, asymptote: bool) -> Result<ScalingRow> {
    let (m, big_m) = hmin_extrema(povm)?;
    let n = povm.outcomes();
    let alpha = povm.alpha().expect("symmetric geometry has α");
    let nf = n as f64;
    let quoted = std::f64::consts::PI.powi(2) / (2.0 * nf * nf * std::f64::consts::LN_2);
    Ok(ScalingRow {
        geometry,
        n,
        m_n: m,
        big_m_n: big_m,
        log2_n: nf.log2(),
        gap: extrema_gap(alpha),
        asymptote: asymptote.then_some(quoted),
        leading_term: asymptote.then_some(quoted / 2.0),
    })
}

/// Extremes for polygons `N = 3..=n_max` followed by the five solids.
pub fn scaling_table(n_max: usize) -> Result<Vec<ScalingRow>> {
    if n_max < 3 {
        return Err(Error::Domain(format!("n_max = {n_max} must be at least 3")));
    }
    let mut rows = (3..=n_max)
        .into_par_iter()
        .map(|n| scaling_row("polygon".into(), &make_polygon_povm::<f64>(n)?, true))
        .collect::<Result<Vec<_>>>()?;
    for s in Solid::ALL {
        rows.push(scaling_row(
            s.name().into(),
            &make_platonic_povm::<f64>(s),
            false,
        )?);
    }
    Ok(rows)
}

pub const SCALING_HEADER: &str = "geometry,N,m_N,M_N,log2_N,gap,asymptote,leading_term";

pub fn write_scaling_csv<W: Write>(mut w: W, rows: &[ScalingRow]) -> Result<()> {
    writeln!(w, "{SCALING_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.geometry,
            r.n,
            fmt_g9(r.m_n),
            fmt_g9(r.big_m_n),
            fmt_g9(r.log2_n),
            fmt_g9(r.gap),
            r.asymptote.map(fmt_g9).unwrap_or_default(),
            r.leading_term.map(fmt_g9).unwrap_or_default()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::guessing_probability_analytic;
    use crate::geometry::make_polygon_povm_oriented;
    use proptest::prelude::*;

    #[test]
    fn g9_matches_printf() {
        let cases = [
            (0.584962501, "0.584962501"),
            (1.0, "1"),
            (-0.5, "-0.5"),
            (123456789.0, "123456789"),
            (1234567890.0, "1.23456789e+09"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (1.0 / 3.0, "0.333333333"),
            (2.0f64.log2() - 1.0, "0"),
            (0.1 + 0.2, "0.3"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt_g9(x), want, "{x}");
        }
    }

    #[test]
    fn triangle_disk_extremes() {
        let g = make_polygon_povm::<f64>(3).unwrap();
        let rows = scan_entropy_grid(&g, 101, ScanDomain::Disk, &ScanMethod::default()).unwrap();
        let (lo, hi, gap) = scan_summary(&rows);
        assert!((lo - (1.5f64).log2()).abs() < 1e-12);
        assert!((hi - 1.0).abs() < 1e-6, "{hi}");
        assert!(gap <= 1.0 + 1e-9);
        assert!(rows
            .iter()
            .all(|r| r.rz * r.rz + r.rx * r.rx <= 1.0 + 1e-12 && r.ry == 0.0));
    }

    #[test]
    fn decagon_minimum() {
        let g = make_polygon_povm::<f64>(10).unwrap();
        let rows = scan_entropy_grid(&g, 60, ScanDomain::Disk, &ScanMethod::default()).unwrap();
        let (lo, hi, _) = scan_summary(&rows);
        assert!((lo - (10f64.log2() - 1.0)).abs() < 1e-12);
        let (_, big_m) = hmin_extrema(&g).unwrap();
        assert!((hi - big_m).abs() < 1e-6);
    }

    #[test]
    fn ring_hits_rotated_normals() {
        let g = make_polygon_povm_oriented::<f64>(5, 17.0).unwrap();
        let pts = disk_grid(&g, 20);
        for f in g.facets() {
            assert!(pts.iter().any(|p| p.max_abs_diff(f.normal) < 1e-12));
        }
    }

    #[test]
    fn ball_grid_size_and_extent() {
        let g = make_platonic_povm::<f64>(Solid::Octahedron);
        let pts = ball_grid(&g, 22);
        assert!(pts.len() >= 5000, "{}", pts.len());
        assert!(pts.iter().all(|p| p.norm() <= 1.0 + 1e-12));
        assert!(pts
            .iter()
            .any(|p| p.max_abs_diff(g.facets()[0].normal) < 1e-15));
    }

    #[test]
    fn disk_requires_planar() {
        let g = make_platonic_povm::<f64>(Solid::Cube);
        assert!(scan_entropy_grid(&g, 10, ScanDomain::Disk, &ScanMethod::default()).is_err());
        let p = make_polygon_povm::<f64>(4).unwrap();
        assert!(scan_entropy_grid(&p, 1, ScanDomain::Disk, &ScanMethod::default()).is_err());
    }

    #[test]
    fn oracle_scan_agrees_on_small_grid() {
        let g = make_polygon_povm::<f64>(4).unwrap();
        let pts = disk_grid(&g, 7);
        let a = scan_at(&g, &pts, &ScanMethod::default()).unwrap();
        let o = scan_at(&g, &pts, &ScanMethod::Oracle(OracleConfig::default())).unwrap();
        for (x, y) in a.iter().zip(&o) {
            assert!((x.pg - y.pg).abs() < 1e-3);
            assert_eq!(y.method, "oracle");
        }
    }

    #[test]
    fn csv_layout() {
        let g = make_polygon_povm::<f64>(3).unwrap();
        let rows = scan_at(
            &g,
            &[BlochVector::zero(), BlochVector::new(0.0, 0.0, 1.0)],
            &ScanMethod::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_scan_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], SCAN_HEADER);
        assert_eq!(
            lines[1],
            "0,0,0,0.666666667,0.584962501,1.5849625,inside,analytic-exact"
        );
        assert!(lines[2].starts_with("1,0,0,") && lines[2].ends_with(",boundary,analytic-exact"));
    }

    #[test]
    fn scaling_rows() {
        let rows = scaling_table(1000).unwrap();
        assert_eq!(rows.len(), 998 + 5);
        for r in &rows {
            assert!(r.m_n < r.big_m_n && r.big_m_n < r.log2_n, "{r:?}");
            assert!((r.gap - (r.big_m_n - r.m_n)).abs() < 1e-12);
        }
        assert!(rows[..98].windows(2).all(|w| w[0].m_n < w[1].m_n));
        let at = |n: usize| {
            rows.iter()
                .find(|r| r.n == n && r.geometry == "polygon")
                .unwrap()
        };
        // 1 − log₂(1 + cos x) = x²/(4 ln 2) + O(x⁴): the quoted π²/(2N² ln 2)
        // is twice the leading term.
        for (n, tol) in [(100, 1e-3), (1000, 1e-5)] {
            let r = at(n);
            assert!((r.gap / r.leading_term.unwrap() - 1.0).abs() < tol, "{r:?}");
            assert!((r.gap / r.asymptote.unwrap() - 0.5).abs() < tol, "{r:?}");
        }
        assert_eq!(rows.iter().filter(|r| r.asymptote.is_none()).count(), 5);
    }

    #[test]
    fn scan_is_thread_count_invariant() {
        let g = make_polygon_povm::<f64>(7).unwrap();
        let run = |t: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .unwrap();
            pool.install(|| {
                scan_entropy_grid(&g, 80, ScanDomain::Disk, &ScanMethod::default()).unwrap()
            })
        };
        assert_eq!(run(1), run(4));
    }

    proptest! {
        #[test]
        fn planar_range_and_gap(n in 3usize..12, z in -1.0f64..1.0, x in -1.0f64..1.0) {
            prop_assume!(z * z + x * x <= 1.0);
            let g = make_polygon_povm::<f64>(n).unwrap();
            let rep = guessing_probability_analytic(BlochVector::new(x, 0.0, z), &g).unwrap();
            let (m, big_m) = hmin_extrema(&g).unwrap();
            prop_assert!(rep.hmin_sdi >= m - 1e-12 && rep.hmin_sdi <= big_m + 1e-12);
            prop_assert!(rep.trusted_gap() <= 1.0 + 1e-9);
        }

        #[test]
        fn monotone_along_normals(n in 3usize..12, k in 0usize..12, s in 0.0f64..1.0, t in 0.0f64..1.0) {
            let g = make_polygon_povm::<f64>(n).unwrap();
            let u = g.facets()[k % n].normal;
            let (a, b) = if s <= t { (s, t) } else { (t, s) };
            let ha = guessing_probability_analytic(u * a, &g).unwrap().hmin_sdi;
            let hb = guessing_probability_analytic(u * b, &g).unwrap().hmin_sdi;
            prop_assert!(hb >= ha - 1e-12);
        }
    }
}
