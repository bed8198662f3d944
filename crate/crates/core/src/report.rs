//! Reproducible runs: measurement tables, figure datasets, the invariant
//! audit and run manifests.

use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analytic::{guessing_probability_analytic_with, hmin_extrema, AnalyticOptions};
use crate::bloch::BlochVector;
use crate::error::{Error, Result};
use crate::experiment::{ExperimentConfig, Preparation, TableSpec};
use crate::geometry::{
    make_platonic_povm, make_polygon_povm, make_polygon_povm_oriented, PovmGeometry, Solid,
    COMPLETENESS_TOL,
};
use crate::mle::{certify_from_counts_with, MleConfig};
use crate::oracle::{oracle_pguess_with, OracleConfig};
use crate::photonics::{count_coincidences, simulate_counts, simulate_timetags};
use crate::scan::{
    ball_grid, disk_grid, fmt_g9, scaling_table, scan_entropy_grid, write_scaling_csv,
    write_scan_csv, ScanDomain, ScanMethod,
};
use crate::stats::OutcomeStats;

/// Independent stream `k` of a run seed (SplitMix64 finaliser).
pub fn sub_seed(seed: u64, k: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(k.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// ---------------------------------------------------------------- tables

/// Where a table row's counts come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CountSource {
    /// Count-level multinomial model.
    Counts,
    /// Full timetag stream through the coincidence matcher.
    Timetags,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableOptions {
    pub seed: u64,
    pub source: CountSource,
    /// Per-detector accidental rate; `None` uses the config value.
    pub accidental_rate_hz: Option<f64>,
    /// Overrides the configured number of coincidences.
    pub coincidences: Option<u64>,
    #[serde(skip)]
    pub mle: MleConfig,
    #[serde(skip)]
    pub oracle: OracleConfig,
}

impl TableOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            source: CountSource::Counts,
            accidental_rate_hz: None,
            coincidences: None,
            mle: MleConfig::default(),
            oracle: OracleConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRowResult {
    pub state: String,
    pub prep: String,
    pub counts: Vec<u64>,
    /// Min-entropy certified from the reconstructed state.
    pub h_a: f64,
    /// Min-entropy of the prepared state.
    pub h_t: f64,
    pub h_a_published: f64,
    pub h_t_published: f64,
    pub h_t_reference: f64,
    pub near_max: bool,
    /// Reconstructed density matrix, `[[re, im]; 2]` per row.
    pub rho_hat: [[[f64; 2]; 2]; 2],
    pub bloch_hat: [f64; 3],
    pub method: String,
    pub mle_iterations: usize,
    pub mle_converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableReport {
    pub id: String,
    pub geometry: String,
    pub caption: String,
    pub seed: u64,
    pub source: CountSource,
    pub accidental_rate_hz: f64,
    pub coincidences: u64,
    pub rows: Vec<TableRowResult>,
}

fn table_index(cfg: &ExperimentConfig, spec: &TableSpec) -> u64 {
    cfg.tables.iter().position(|t| t.id == spec.id).unwrap_or(0) as u64
}

/// simulate → (ingest) → MLE → certify for one row.
pub fn run_table_row(
    cfg: &ExperimentConfig,
    spec: &TableSpec,
    row_index: usize,
    opts: &TableOptions,
) -> Result<TableRowResult> {
    let row = spec
        .rows
        .get(row_index)
        .ok_or_else(|| Error::Domain(format!("table {} has no row {row_index}", spec.id)))?;
    let povm = cfg.geometry_spec(&spec.geometry)?.build::<f64>()?;
    let prep: Preparation = row.preparation()?;
    let mut sim = cfg.source.sim_config(prep.state()?, povm.clone(), 0);
    sim.seed = sub_seed(opts.seed, table_index(cfg, spec) * 64 + row_index as u64);
    if let Some(a) = opts.accidental_rate_hz {
        sim.accidental_rate = a;
    }
    if let Some(n) = opts.coincidences {
        sim.length = crate::photonics::RunLength::Coincidences(n);
    }
    let stats: OutcomeStats<f64> = match opts.source {
        CountSource::Counts => simulate_counts(&sim)?,
        CountSource::Timetags => {
            let counts = count_coincidences(
                simulate_timetags(&sim)?,
                &cfg.source.coincidence_config(),
                povm.outcomes(),
            )?;
            OutcomeStats::from_counts(counts)?
        }
    };
    let cert =
        certify_from_counts_with(&stats, &povm, Some(prep.bloch()), &opts.mle, &opts.oracle)?;
    let m = cert.mle.rho_hat.matrix().m;
    let rho = [
        [[m[0][0].re, m[0][0].im], [m[0][1].re, m[0][1].im]],
        [[m[1][0].re, m[1][0].im], [m[1][1].re, m[1][1].im]],
    ];
    let b = cert.mle.rho_hat.bloch();
    Ok(TableRowResult {
        state: prep.label(),
        prep: row.prep.clone(),
        counts: stats.counts().map(<[u64]>::to_vec).unwrap_or_default(),
        h_a: cert.report.hmin_sdi,
        h_t: cert.theory.as_ref().map(|t| t.hmin_sdi).unwrap_or(f64::NAN),
        h_a_published: row.h_a,
        h_t_published: row.h_t,
        h_t_reference: row.h_t_reference(),
        near_max: row.near_max,
        rho_hat: rho,
        bloch_hat: [b.x, b.y, b.z],
        method: cert.report.method.tag().to_string(),
        mle_iterations: cert.mle.iterations,
        mle_converged: cert.mle.converged,
    })
}

pub fn run_table(cfg: &ExperimentConfig, id: &str, opts: &TableOptions) -> Result<TableReport> {
    let spec = cfg.table(id)?;
    let rows = (0..spec.rows.len())
        .into_par_iter()
        .map(|i| run_table_row(cfg, spec, i, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(TableReport {
        id: spec.id.clone(),
        geometry: spec.geometry.clone(),
        caption: spec.caption.clone(),
        seed: opts.seed,
        source: opts.source,
        accidental_rate_hz: opts
            .accidental_rate_hz
            .unwrap_or(cfg.source.accidental_rate_hz),
        coincidences: opts.coincidences.unwrap_or(cfg.source.coincidences),
        rows,
    })
}

pub const TABLE_HEADER: &str =
    "table,state,prep,h_a,h_t,h_a_published,h_t_published,rho_00,rho_01_re,rho_01_im,rho_11,rx,ry,rz,method,counts";

pub fn table_csv(reports: &[TableReport]) -> String {
    let mut s = String::new();
    writeln!(s, "{TABLE_HEADER}").unwrap();
    for t in reports {
        for r in &t.rows {
            let counts: Vec<String> = r.counts.iter().map(u64::to_string).collect();
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                t.id,
                r.state,
                r.prep,
                fmt_g9(r.h_a),
                fmt_g9(r.h_t),
                fmt_g9(r.h_a_published),
                fmt_g9(r.h_t_published),
                fmt_g9(r.rho_hat[0][0][0]),
                fmt_g9(r.rho_hat[0][1][0]),
                fmt_g9(r.rho_hat[0][1][1]),
                fmt_g9(r.rho_hat[1][1][0]),
                fmt_g9(r.bloch_hat[0]),
                fmt_g9(r.bloch_hat[1]),
                fmt_g9(r.bloch_hat[2]),
                r.method,
                counts.join(";")
            )
            .unwrap();
        }
    }
    s
}

/// Plain-text rendering, one line per row with the fitted density matrix.
pub fn table_text(t: &TableReport) -> String {
    let mut s = String::new();
    writeln!(s, "{} ({}, geometry {})", t.id, t.caption, t.geometry).unwrap();
    writeln!(s, "{:<8} {:>8} {:>8}   fitted rho", "state", "H_a", "H_t").unwrap();
    for r in &t.rows {
        let c = |re: f64, im: f64| {
            let z = |v: f64| if v.abs() < 5e-4 { 0.0 } else { v };
            let (re, im) = (z(re), z(im));
            if im == 0.0 {
                format!("{re:.3}")
            } else {
                format!("{re:.3}{:+.3}i", im)
            }
        };
        let m = &r.rho_hat;
        writeln!(
            s,
            "{:<8} {:>8.3} {:>8.3}   [{} {}; {} {}]",
            r.state,
            r.h_a,
            r.h_t,
            c(m[0][0][0], m[0][0][1]),
            c(m[0][1][0], m[0][1][1]),
            c(m[1][0][0], m[1][0][1]),
            c(m[1][1][0], m[1][1][1])
        )
        .unwrap();
    }
    s
}

// ---------------------------------------------------------------- figures

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureId {
    F1,
    F2,
    F3,
}

impl std::str::FromStr for FigureId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "F1" => Ok(FigureId::F1),
            "F2" => Ok(FigureId::F2),
            "F3" => Ok(FigureId::F3),
            _ => Err(Error::Parse(format!("unknown figure `{s}` (F1, F2 or F3)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FigureOptions {
    /// Disk lattice points per axis.
    pub resolution: usize,
    /// Largest polygon in the scaling dataset.
    pub n_max: usize,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self {
            resolution: 400,
            n_max: 100,
        }
    }
}

/// `(file name, CSV contents)` pairs for one figure.
pub fn figure_datasets(id: FigureId, opts: &FigureOptions) -> Result<Vec<(String, String)>> {
    let disk = |n: usize| -> Result<String> {
        let g = make_polygon_povm::<f64>(n)?;
        let rows = scan_entropy_grid(
            &g,
            opts.resolution,
            ScanDomain::Disk,
            &ScanMethod::default(),
        )?;
        let mut buf = Vec::new();
        write_scan_csv(&mut buf, &rows)?;
        Ok(String::from_utf8(buf).expect("ascii csv"))
    };
    Ok(match id {
        FigureId::F1 => vec![("F1_N3.csv".into(), disk(3)?)],
        FigureId::F2 => [4, 5, 6, 10]
            .into_iter()
            .map(|n| Ok((format!("F2_N{n}.csv"), disk(n)?)))
            .collect::<Result<_>>()?,
        FigureId::F3 => {
            let rows = scaling_table(opts.n_max)?;
            let mut buf = Vec::new();
            write_scaling_csv(&mut buf, &rows)?;
            vec![(
                "F3_scaling.csv".into(),
                String::from_utf8(buf).expect("ascii csv"),
            )]
        }
    })
}

// ---------------------------------------------------------------- verify

/// Which facet angle the closed form uses during verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlphaVariant {
    #[default]
    Correct,
    /// `α = cos(π/N)` instead of `π/N`.
    Misprint,
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub seed: u64,
    pub planar_states_per_n: usize,
    pub disk_resolution: usize,
    pub ball_resolution: usize,
    pub oracle: OracleConfig,
    pub alpha_variant: AlphaVariant,
    /// Extra geometry to audit, typically read without validation.
    pub extra_geometry: Option<PovmGeometry<f64>>,
}

impl VerifyOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            planar_states_per_n: 100,
            disk_resolution: 101,
            ball_resolution: 6,
            oracle: OracleConfig::default(),
            alpha_variant: AlphaVariant::Correct,
            extra_geometry: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub worst: f64,
    pub tol: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect()
    }

    /// Deterministic audit log.
    pub fn log(&self) -> String {
        let mut s = String::new();
        writeln!(s, "verify seed={}", self.seed).unwrap();
        for c in &self.checks {
            writeln!(
                s,
                "check {} {} worst={} tol={} {}",
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                fmt_g9(c.worst),
                fmt_g9(c.tol),
                c.detail
            )
            .unwrap();
        }
        if self.passed() {
            writeln!(s, "verify PASS").unwrap();
        } else {
            writeln!(s, "verify FAIL: {}", self.failed().join(", ")).unwrap();
        }
        s
    }
}

fn builtin_geometries() -> Result<Vec<PovmGeometry<f64>>> {
    let mut out = Vec::new();
    for n in 3..=20 {
        out.push(make_polygon_povm(n)?);
    }
    out.push(make_polygon_povm_oriented(3, 180.0)?);
    out.extend(Solid::ALL.iter().map(|s| make_platonic_povm(*s)));
    Ok(out)
}

fn analytic_options(povm: &PovmGeometry<f64>, variant: AlphaVariant) -> AnalyticOptions<f64> {
    AnalyticOptions {
        alpha_override: match variant {
            AlphaVariant::Correct => None,
            AlphaVariant::Misprint => Some((std::f64::consts::PI / povm.outcomes() as f64).cos()),
        },
    }
}

fn check_completeness(opts: &VerifyOptions) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    let mut geoms = builtin_geometries()?;
    geoms.extend(opts.extra_geometry.iter().cloned());
    for g in &geoms {
        let wsum: f64 = g.weights().iter().sum();
        let mut c = BlochVector::zero();
        for (w, a) in g.weights().iter().zip(g.directions()) {
            c += *a * *w;
        }
        worst = worst.max((wsum - 1.0).abs().max(c.norm()));
        for v in g.violations(COMPLETENESS_TOL) {
            bad.push(format!("{}: {} ({})", g.id(), v.check, v.detail));
        }
    }
    Ok(CheckResult {
        name: "completeness".into(),
        passed: bad.is_empty(),
        worst,
        tol: COMPLETENESS_TOL,
        detail: if bad.is_empty() {
            format!("{} geometries", geoms.len())
        } else {
            bad.join("; ")
        },
    })
}

fn check_extrema() -> Result<CheckResult> {
    let refs: [(PovmGeometry<f64>, f64, f64); 4] = [
        (make_polygon_povm(3)?, 0.585, 1.000),
        (make_polygon_povm(4)?, 1.000, 1.228),
        (make_polygon_povm(6)?, 1.585, 1.685),
        (make_platonic_povm(Solid::Octahedron), 1.585, 1.9274),
    ];
    let mut worst = 0.0f64;
    for (g, m, big_m) in &refs {
        let (a, b) = hmin_extrema(g)?;
        worst = worst.max((a - m).abs()).max((b - big_m).abs());
    }
    Ok(CheckResult {
        name: "extrema".into(),
        passed: worst <= 5e-4,
        worst,
        tol: 5e-4,
        detail: "N=3,4,6 planar and octahedron".into(),
    })
}

fn random_disk_point(rng: &mut ChaCha8Rng) -> BlochVector<f64> {
    let rad = rng.random::<f64>().sqrt();
    let phi = rng.random::<f64>() * std::f64::consts::TAU;
    BlochVector::in_zx_plane(phi) * rad
}

fn check_planar_equivalence(opts: &VerifyOptions) -> Result<CheckResult> {
    let mut cases: Vec<(PovmGeometry<f64>, BlochVector<f64>)> = Vec::new();
    let mut geoms: Vec<PovmGeometry<f64>> =
        (3..=10).map(make_polygon_povm).collect::<Result<_>>()?;
    if let Some(g) = &opts.extra_geometry {
        if g.is_planar() && g.is_symmetric() {
            geoms.push(g.clone());
        }
    }
    for (i, g) in geoms.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(opts.seed, 1000 + i as u64));
        for _ in 0..opts.planar_states_per_n {
            cases.push((g.clone(), random_disk_point(&mut rng)));
        }
    }
    let diffs = cases
        .par_iter()
        .map(|(g, r)| {
            let a =
                guessing_probability_analytic_with(*r, g, analytic_options(g, opts.alpha_variant))?
                    .p_guess;
            let target = OutcomeStats::from_probs(g.born_raw(*r))?;
            let (o, _) = oracle_pguess_with(&target, g, &opts.oracle)?;
            Ok(((a - o).abs(), g.outcomes(), *r))
        })
        .collect::<Result<Vec<_>>>()?;
    let (worst, n, r) =
        diffs.iter().copied().fold(
            (0.0, 0, BlochVector::zero()),
            |b, c| if c.0 > b.0 { c } else { b },
        );
    Ok(CheckResult {
        name: "planar-equivalence".into(),
        passed: worst <= 1e-3,
        worst,
        tol: 1e-3,
        detail: format!(
            "{} states, worst at N={n} r=({},{},{})",
            cases.len(),
            fmt_g9(r.x),
            fmt_g9(r.y),
            fmt_g9(r.z)
        ),
    })
}

fn check_soundness_3d(opts: &VerifyOptions) -> Result<(CheckResult, f64)> {
    let mut excess = f64::NEG_INFINITY;
    let mut inside_gap = 0.0f64;
    let mut gap = f64::NEG_INFINITY;
    let mut points = 0usize;
    for s in Solid::ALL {
        let g = make_platonic_povm::<f64>(s);
        let pts = ball_grid(&g, opts.ball_resolution);
        points += pts.len();
        let res = pts
            .par_iter()
            .map(|&r| {
                let a = guessing_probability_analytic_with(
                    r,
                    &g,
                    analytic_options(&g, opts.alpha_variant),
                )?;
                let target = OutcomeStats::from_probs(g.born_raw(r))?;
                let (o, _) = oracle_pguess_with(&target, &g, &opts.oracle)?;
                Ok((o - a.p_guess, a.region == "inside", a.trusted_gap()))
            })
            .collect::<Result<Vec<_>>>()?;
        for (d, inside, tg) in res {
            excess = excess.max(d);
            if inside {
                inside_gap = inside_gap.max(d.abs());
            }
            gap = gap.max(tg);
        }
    }
    let worst = excess.max(inside_gap);
    Ok((
        CheckResult {
            name: "3d-soundness".into(),
            passed: excess <= 1e-9 && inside_gap <= 1e-9,
            worst,
            tol: 1e-9,
            detail: format!(
                "{points} ball points, max(oracle-analytic)={}, max inside |diff|={}",
                fmt_g9(excess),
                fmt_g9(inside_gap)
            ),
        },
        gap,
    ))
}

fn check_trusted_gap(opts: &VerifyOptions, ball_gap: f64) -> Result<CheckResult> {
    let mut worst = ball_gap;
    for n in 3..=10 {
        let g = make_polygon_povm::<f64>(n)?;
        let opt = analytic_options(&g, opts.alpha_variant);
        let pts = disk_grid(&g, opts.disk_resolution);
        let w = pts
            .par_iter()
            .map(|&r| guessing_probability_analytic_with(r, &g, opt).map(|c| c.trusted_gap()))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max(w);
    }
    Ok(CheckResult {
        name: "trusted-gap".into(),
        passed: worst <= 1.0 + 1e-9,
        worst,
        tol: 1.0 + 1e-9,
        detail: "disk grids N=3..10 and ball grids of the solids".into(),
    })
}

/// Full invariant audit. Every check runs; the report lists them all.
pub fn run_verify(opts: &VerifyOptions) -> Result<VerifyReport> {
    let mut checks = vec![check_completeness(opts)?, check_extrema()?];
    checks.push(check_planar_equivalence(opts)?);
    let (sound, ball_gap) = check_soundness_3d(opts)?;
    checks.push(sound);
    checks.push(check_trusted_gap(opts, ball_gap)?);
    Ok(VerifyReport {
        seed: opts.seed,
        checks,
    })
}

// ---------------------------------------------------------------- manifest

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

pub fn sha256_file(path: &Path) -> Result<FileDigest> {
    let mut f = fs::File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut bytes = 0u64;
    loop {
        let k = f.read(&mut buf)?;
        if k == 0 {
            break;
        }
        bytes += k as u64;
        h.update(&buf[..k]);
    }
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: hex::encode(h.finalize()),
        bytes,
    })
}

/// Provenance record written next to every set of outputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: serde_json::Value,
    pub seed: u64,
    /// `flag` when given on the command line, `entropy` when drawn.
    pub seed_source: String,
    pub tool_version: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub wall_clock_s: f64,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: serde_json::Value, seed: u64, seed_source: &str) -> Self {
        Self {
            subcommand: subcommand.into(),
            config,
            seed,
            seed_source: seed_source.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            wall_clock_s: 0.0,
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(sha256_file(path)?);
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        self.outputs.push(sha256_file(path)?);
        Ok(())
    }

    /// Writes `manifest-<subcommand>.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let p = dir.join(format!("manifest-{}.json", self.subcommand));
        fs::write(&p, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::io::GeometryRecord;

    fn quick(seed: u64) -> VerifyOptions {
        VerifyOptions {
            planar_states_per_n: 15,
            disk_resolution: 31,
            ball_resolution: 4,
            ..VerifyOptions::new(seed)
        }
    }

    #[test]
    fn sub_seeds_differ() {
        let s: std::collections::BTreeSet<u64> = (0..1000).map(|k| sub_seed(42, k)).collect();
        assert_eq!(s.len(), 1000);
        assert_eq!(sub_seed(42, 3), sub_seed(42, 3));
    }

    #[test]
    fn clean_verify_passes() {
        let r = run_verify(&quick(7)).unwrap();
        assert!(r.passed(), "{}", r.log());
        let eq = r
            .checks
            .iter()
            .find(|c| c.name == "planar-equivalence")
            .unwrap();
        assert!(eq.worst <= 1e-3);
        assert!(r.log().ends_with("verify PASS\n"));
    }

    #[test]
    fn misprinted_alpha_is_caught() {
        let opts = VerifyOptions {
            alpha_variant: AlphaVariant::Misprint,
            ..quick(7)
        };
        let r = run_verify(&opts).unwrap();
        assert!(r.failed().contains(&"planar-equivalence"), "{}", r.log());
    }

    #[test]
    fn broken_geometry_is_caught() {
        let mut rec = GeometryRecord::from(&make_polygon_povm::<f64>(4).unwrap());
        rec.directions[0] = [0.3, 0.0, 0.954];
        let opts = VerifyOptions {
            extra_geometry: Some(rec.to_geometry_unchecked().unwrap()),
            ..quick(7)
        };
        let r = run_verify(&opts).unwrap();
        assert_eq!(r.failed(), vec!["completeness"], "{}", r.log());
        assert!(r.log().contains("check completeness FAIL"));
    }

    #[test]
    fn verify_log_is_deterministic() {
        let a = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_verify(&quick(3)).unwrap().log());
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| run_verify(&quick(3)).unwrap().log());
        assert_eq!(a, b);
    }

    #[test]
    fn table_rows_small_run() {
        let cfg = ExperimentConfig::default();
        let mut opts = TableOptions::new(1);
        opts.coincidences = Some(200_000);
        let t = run_table(&cfg, "T3", &opts).unwrap();
        assert_eq!(t.rows.len(), 4);
        for r in &t.rows {
            assert_eq!(r.counts.iter().sum::<u64>(), 200_000);
            assert!((r.h_t - r.h_t_reference).abs() <= 5e-4);
            assert!(r.mle_converged);
        }
        assert_eq!(run_table(&cfg, "t3", &opts).unwrap(), t);
        let csv = table_csv(std::slice::from_ref(&t));
        assert_eq!(csv.lines().count(), 5);
        assert!(table_text(&t).contains("|π/12⟩"));
    }

    #[test]
    fn timetag_rows_match_count_totals() {
        let cfg = ExperimentConfig::default();
        let mut opts = TableOptions::new(2);
        opts.coincidences = Some(50_000);
        opts.source = CountSource::Timetags;
        let t = run_table(&cfg, "T1", &opts).unwrap();
        for r in &t.rows {
            assert_eq!(r.counts.iter().sum::<u64>(), 50_000);
        }
        assert_eq!(t.rows[1].counts.len(), 3);
    }

    #[test]
    fn figure_files() {
        let opts = FigureOptions {
            resolution: 21,
            n_max: 12,
        };
        let f2 = figure_datasets(FigureId::F2, &opts).unwrap();
        let names: Vec<_> = f2.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, ["F2_N4.csv", "F2_N5.csv", "F2_N6.csv", "F2_N10.csv"]);
        let f3 = figure_datasets(FigureId::F3, &opts).unwrap();
        let text = &f3[0].1;
        for s in Solid::ALL {
            assert!(text.contains(&format!("\n{},", s.name())));
        }
        assert!(text.starts_with("geometry,N,m_N,M_N,log2_N,"));
    }

    #[test]
    fn manifest_digests() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        fs::write(&p, "abc").unwrap();
        let mut m = RunManifest::new("scan", serde_json::json!({"res": 3}), 9, "flag");
        m.add_output(&p).unwrap();
        assert_eq!(
            m.outputs[0].sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        let path = m.write(dir.path()).unwrap();
        assert!(fs::read_to_string(path)
            .unwrap()
            .contains("\"seed_source\": \"flag\""));
    }
}
