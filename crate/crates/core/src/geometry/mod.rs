//! Symmetric qubit POVMs `F_k = w_k (I + a_k·σ)` and the geometry of their
//! outcome directions on the Bloch sphere.

mod hull;
pub mod io;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bloch::{BlochVector, Mat2, QubitState};
use crate::error::{Error, Result};
use crate::linalg::sym3_pinv_solve;
use crate::scalar::Scalar;
use crate::stats::OutcomeStats;

/// Completeness tolerance for built-in geometries.
pub const COMPLETENESS_TOL: f64 = 1e-12;
/// Completeness tolerance for geometries read from user files.
pub const CUSTOM_COMPLETENESS_TOL: f64 = 1e-9;
/// Tie tolerance on `r·u_k = cos α` when classifying hull membership.
pub const TIE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solid {
    Tetrahedron,
    Octahedron,
    Cube,
    Icosahedron,
    Dodecahedron,
}

impl Solid {
    pub const ALL: [Solid; 5] = [
        Solid::Tetrahedron,
        Solid::Octahedron,
        Solid::Cube,
        Solid::Icosahedron,
        Solid::Dodecahedron,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Solid::Tetrahedron => "tetrahedron",
            Solid::Octahedron => "octahedron",
            Solid::Cube => "cube",
            Solid::Icosahedron => "icosahedron",
            Solid::Dodecahedron => "dodecahedron",
        }
    }

    pub fn outcomes(self) -> usize {
        match self {
            Solid::Tetrahedron => 4,
            Solid::Octahedron => 6,
            Solid::Cube => 8,
            Solid::Icosahedron => 12,
            Solid::Dodecahedron => 20,
        }
    }

    /// Angle between a face normal and the vertices of that face.
    pub fn facet_angle(self) -> f64 {
        let five = 5.0f64;
        match self {
            Solid::Tetrahedron => (1.0f64 / 3.0).acos(),
            Solid::Octahedron | Solid::Cube => (1.0 / 3.0f64.sqrt()).acos(),
            Solid::Icosahedron | Solid::Dodecahedron => {
                ((5.0 + 2.0 * five.sqrt()) / 15.0).sqrt().acos()
            }
        }
    }
}

impl fmt::Display for Solid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Solid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tetrahedron" | "tetra" => Ok(Solid::Tetrahedron),
            "octahedron" | "octa" => Ok(Solid::Octahedron),
            "cube" | "hexahedron" => Ok(Solid::Cube),
            "icosahedron" | "icosa" => Ok(Solid::Icosahedron),
            "dodecahedron" | "dodeca" => Ok(Solid::Dodecahedron),
            other => Err(Error::InvalidGeometry(format!("unknown solid `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeometryKind {
    Polygon(usize),
    Solid(Solid),
    Custom,
}

impl GeometryKind {
    pub fn tag(&self) -> &'static str {
        match self {
            GeometryKind::Polygon(_) => "polygon",
            GeometryKind::Solid(s) => s.name(),
            GeometryKind::Custom => "custom",
        }
    }
}

/// A hull facet: outward unit normal `u`, the angle `α` it makes with its
/// vertices, and the indices of those vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Facet<T> {
    pub normal: BlochVector<T>,
    pub alpha: T,
    pub vertices: Vec<usize>,
}

/// Outcome directions, weights and hull facets of a rank-one qubit POVM.
#[derive(Debug, Clone, PartialEq)]
pub struct PovmGeometry<T> {
    kind: GeometryKind,
    directions: Vec<BlochVector<T>>,
    weights: Vec<T>,
    facets: Vec<Facet<T>>,
    alpha: Option<T>,
    orientation_deg: T,
    planar: bool,
}

/// One failed structural check of a geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryViolation {
    pub check: &'static str,
    pub detail: String,
    pub deviation: f64,
}

/// Polygon of `n` outcome directions in the ZX plane, first vertex at `+z`.
pub fn make_polygon_povm<T: Scalar>(n: usize) -> Result<PovmGeometry<T>> {
    make_polygon_povm_oriented(n, T::zero())
}

/// Polygon rotated in-plane by `orientation_deg` (Bloch degrees, from `+z` towards `+x`).
pub fn make_polygon_povm_oriented<T: Scalar>(
    n: usize,
    orientation_deg: T,
) -> Result<PovmGeometry<T>> {
    if n < 3 {
        return Err(Error::InvalidGeometry(format!(
            "a polygon POVM needs at least 3 outcomes, got {n}"
        )));
    }
    let phi0 = orientation_deg.to_radians();
    let nn = T::of_usize(n);
    let step = T::PI() / nn;
    let directions: Vec<_> = (0..n)
        .map(|k| BlochVector::in_zx_plane(phi0 + T::lit(2.0) * T::of_usize(k) * step))
        .collect();
    let facets = (0..n)
        .map(|k| Facet {
            normal: BlochVector::in_zx_plane(phi0 + T::of_usize(2 * k + 1) * step),
            alpha: step,
            vertices: vec![k, (k + 1) % n],
        })
        .collect();
    Ok(PovmGeometry {
        kind: GeometryKind::Polygon(n),
        directions,
        weights: vec![T::one() / nn; n],
        facets,
        alpha: Some(step),
        orientation_deg,
        planar: true,
    })
}

/// Vertices of a Platonic solid inscribed in the Bloch sphere.
///
/// The octahedron lists `|H⟩, |+⟩, |L⟩, |V⟩, |−⟩, |R⟩` in that order.
pub fn make_platonic_povm<T: Scalar>(solid: Solid) -> PovmGeometry<T> {
    let raw: Vec<[f64; 3]> = match solid {
        Solid::Tetrahedron => vec![
            [1.0, 1.0, 1.0],
            [1.0, -1.0, -1.0],
            [-1.0, 1.0, -1.0],
            [-1.0, -1.0, 1.0],
        ],
        Solid::Octahedron => vec![
            [0.0, 0.0, 1.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, -1.0],
            [-1.0, 0.0, 0.0],
            [0.0, -1.0, 0.0],
        ],
        Solid::Cube => {
            let mut v = Vec::with_capacity(8);
            for sx in [1.0, -1.0] {
                for sy in [1.0, -1.0] {
                    for sz in [1.0, -1.0] {
                        v.push([sx, sy, sz]);
                    }
                }
            }
            v
        }
        Solid::Icosahedron => {
            let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
            let mut v = Vec::with_capacity(12);
            for s1 in [1.0, -1.0] {
                for s2 in [1.0, -1.0] {
                    v.push([0.0, s1, s2 * phi]);
                    v.push([s1, s2 * phi, 0.0]);
                    v.push([s2 * phi, 0.0, s1]);
                }
            }
            v
        }
        Solid::Dodecahedron => {
            let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
            let inv = 1.0 / phi;
            let mut v = Vec::with_capacity(20);
            for sx in [1.0, -1.0] {
                for sy in [1.0, -1.0] {
                    for sz in [1.0, -1.0] {
                        v.push([sx, sy, sz]);
                    }
                }
            }
            for s1 in [1.0, -1.0] {
                for s2 in [1.0, -1.0] {
                    v.push([0.0, s1 * inv, s2 * phi]);
                    v.push([s1 * inv, s2 * phi, 0.0]);
                    v.push([s2 * phi, 0.0, s1 * inv]);
                }
            }
            v
        }
    };
    let directions: Vec<BlochVector<T>> = raw
        .iter()
        .map(|a| {
            let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
            BlochVector::new(T::lit(a[0] / n), T::lit(a[1] / n), T::lit(a[2] / n))
        })
        .collect();
    let facets = hull::hull_facets(&directions, false).expect("Platonic solids have a proper hull");
    let n = directions.len();
    PovmGeometry {
        kind: GeometryKind::Solid(solid),
        directions,
        weights: vec![T::one() / T::of_usize(n); n],
        facets,
        alpha: Some(T::lit(solid.facet_angle())),
        orientation_deg: T::zero(),
        planar: false,
    }
}

impl<T: Scalar> PovmGeometry<T> {
    /// Builds and validates a geometry from raw parts.
    ///
    /// When `facets` is `None` the hull is computed; otherwise the given
    /// `(normal, α)` pairs are used and their vertex sets recovered.
    pub fn from_parts(
        kind: GeometryKind,
        directions: Vec<BlochVector<T>>,
        weights: Vec<T>,
        facets: Option<Vec<(BlochVector<T>, T)>>,
        orientation_deg: T,
    ) -> Result<Self> {
        let g = Self::from_parts_unchecked(kind, directions, weights, facets, orientation_deg)?;
        if let Some(v) = g.violations(CUSTOM_COMPLETENESS_TOL).into_iter().next() {
            return Err(Error::InvalidGeometry(format!("{}: {}", v.check, v.detail)));
        }
        Ok(g)
    }

    /// Like [`from_parts`](Self::from_parts) but skips the structural checks,
    /// so that audits can inspect broken inputs.
    pub fn from_parts_unchecked(
        kind: GeometryKind,
        directions: Vec<BlochVector<T>>,
        weights: Vec<T>,
        facets: Option<Vec<(BlochVector<T>, T)>>,
        orientation_deg: T,
    ) -> Result<Self> {
        if directions.len() < 2 {
            return Err(Error::InvalidGeometry("need at least two outcomes".into()));
        }
        if directions.len() != weights.len() {
            return Err(Error::InvalidGeometry(format!(
                "{} directions but {} weights",
                directions.len(),
                weights.len()
            )));
        }
        let tol = T::tol(TIE_EPS);
        let planar = directions.iter().all(|a| a.y.abs() <= tol);
        let facets = match facets {
            Some(list) => list
                .into_iter()
                .map(|(normal, alpha)| {
                    let c = alpha.cos();
                    let vertices = directions
                        .iter()
                        .enumerate()
                        .filter(|(_, a)| (a.dot(normal) - c).abs() <= T::tol(1e-6))
                        .map(|(i, _)| i)
                        .collect();
                    Facet {
                        normal,
                        alpha,
                        vertices,
                    }
                })
                .collect(),
            None => hull::hull_facets(&directions, planar)?,
        };
        let alpha = uniform_alpha(&facets);
        Ok(Self {
            kind,
            directions,
            weights,
            facets,
            alpha,
            orientation_deg,
            planar,
        })
    }

    /// All structural checks that fail at completeness tolerance `tol`.
    pub fn violations(&self, tol: f64) -> Vec<GeometryViolation> {
        let mut out = Vec::new();
        let wsum: T = self.weights.iter().copied().sum();
        let mut centroid = BlochVector::zero();
        for (w, a) in self.weights.iter().zip(&self.directions) {
            centroid += *a * *w;
        }
        let dev = (wsum - T::one()).abs().max(centroid.norm());
        if dev > T::tol(tol) {
            out.push(GeometryViolation {
                check: "completeness",
                detail: format!(
                    "sum w_k = {}, |sum w_k a_k| = {:.3e}",
                    wsum.to_f64_lossy(),
                    centroid.norm().to_f64_lossy()
                ),
                deviation: dev.to_f64_lossy(),
            });
        }
        for (k, (w, a)) in self.weights.iter().zip(&self.directions).enumerate() {
            if *w < T::zero() || a.norm() > T::one() + T::tol(1e-12) {
                out.push(GeometryViolation {
                    check: "psd",
                    detail: format!("element {k} is not positive semidefinite"),
                    deviation: (a.norm() - T::one()).max(-*w).to_f64_lossy(),
                });
            }
        }
        for (i, f) in self.facets.iter().enumerate() {
            let c = f.alpha.cos();
            let worst = f
                .vertices
                .iter()
                .map(|&j| (f.normal.dot(self.directions[j]) - c).abs())
                .fold(T::zero(), T::max);
            if f.vertices.is_empty() || worst > T::tol(1e-9) {
                out.push(GeometryViolation {
                    check: "facet-alpha",
                    detail: format!("facet {i} normal is not at angle alpha from its vertices"),
                    deviation: worst.to_f64_lossy(),
                });
            }
        }
        if let GeometryKind::Polygon(n) = self.kind {
            let c = (T::lit(2.0) * T::PI() / T::of_usize(n)).cos();
            let worst = (0..n)
                .map(|k| (self.directions[k].dot(self.directions[(k + 1) % n]) - c).abs())
                .fold(T::zero(), T::max);
            if worst > T::tol(1e-12) {
                out.push(GeometryViolation {
                    check: "polygon-adjacency",
                    detail: "consecutive vertices are not 2π/N apart".into(),
                    deviation: worst.to_f64_lossy(),
                });
            }
        }
        out
    }

    pub fn kind(&self) -> GeometryKind {
        self.kind
    }

    /// Number of outcomes `N`.
    pub fn outcomes(&self) -> usize {
        self.directions.len()
    }

    pub fn directions(&self) -> &[BlochVector<T>] {
        &self.directions
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn facets(&self) -> &[Facet<T>] {
        &self.facets
    }

    /// The facet angle when all facets share it.
    pub fn alpha(&self) -> Option<T> {
        self.alpha
    }

    pub fn orientation_deg(&self) -> T {
        self.orientation_deg
    }

    /// Whether all outcome directions lie in the ZX plane (then `r_y` is unobservable).
    pub fn is_planar(&self) -> bool {
        self.planar
    }

    /// True when every weight equals `1/N` and every direction is a unit vector.
    pub fn is_symmetric(&self) -> bool {
        let n = T::of_usize(self.outcomes());
        let tol = T::tol(1e-9);
        self.weights
            .iter()
            .all(|w| (*w * n - T::one()).abs() <= tol)
            && self
                .directions
                .iter()
                .all(|a| (a.norm() - T::one()).abs() <= tol)
    }

    /// Stable identifier, e.g. `polygon3@180` or `octahedron`.
    pub fn id(&self) -> String {
        match self.kind {
            GeometryKind::Polygon(n) => {
                let o = self.orientation_deg.to_f64_lossy();
                if o == 0.0 {
                    format!("polygon{n}")
                } else {
                    format!("polygon{n}@{o}")
                }
            }
            GeometryKind::Solid(s) => s.name().to_string(),
            GeometryKind::Custom => format!("custom{}", self.outcomes()),
        }
    }

    /// POVM element `F_k = w_k (I + a_k·σ)` as a matrix.
    pub fn element(&self, k: usize) -> Mat2<T> {
        Mat2::from_bloch_affine(self.weights[k], self.directions[k])
    }

    /// `Tr[F_k ρ] = w_k (1 + a_k·r)` for every outcome, without validation.
    pub fn born_raw(&self, r: BlochVector<T>) -> Vec<T> {
        self.weights
            .iter()
            .zip(&self.directions)
            .map(|(w, a)| (*w * (T::one() + a.dot(r))).max(T::zero()))
            .collect()
    }

    /// Projection used by the membership and certificate formulas.
    pub fn effective_vector(&self, r: BlochVector<T>) -> BlochVector<T> {
        if self.planar {
            r.project_zx()
        } else {
            r
        }
    }
}

fn uniform_alpha<T: Scalar>(facets: &[Facet<T>]) -> Option<T> {
    let first = facets.first()?.alpha;
    facets
        .iter()
        .all(|f| (f.alpha - first).abs() <= T::tol(1e-9))
        .then_some(first)
}

/// Outcome probabilities `P_k = w_k (1 + a_k·r)` for `state`.
pub fn born_probabilities<T: Scalar>(
    state: &QubitState<T>,
    povm: &PovmGeometry<T>,
) -> OutcomeStats<T> {
    OutcomeStats::from_probs(povm.born_raw(state.bloch()))
        .expect("Born probabilities of a valid state are a distribution")
}

/// Result of inverting `P_k = w_k (1 + a_k·r)` for `r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearInversion<T> {
    pub r: BlochVector<T>,
    /// `max_k |P_k − w_k (1 + a_k·r)|`.
    pub residual: T,
    /// `|r| ≤ 1 + ε_phys`.
    pub physical: bool,
    /// The `y` component cannot be observed (planar POVMs); it is reported as 0.
    pub y_unobservable: bool,
}

/// Least-squares Bloch vector reproducing `stats`.
///
/// Built-in symmetric geometries use the tight-frame closed form
/// `r = c Σ_k P_k a_k` (`c = 2` for polygons, `c = 3` for solids).
pub fn linear_inversion_state<T: Scalar>(
    stats: &OutcomeStats<T>,
    povm: &PovmGeometry<T>,
) -> Result<LinearInversion<T>> {
    if stats.len() != povm.outcomes() {
        return Err(Error::InvalidStats(format!(
            "{} outcomes in statistics, geometry has {}",
            stats.len(),
            povm.outcomes()
        )));
    }
    let p = stats.probs();
    let r = match povm.kind {
        GeometryKind::Polygon(_) | GeometryKind::Solid(_) => {
            let c = if povm.planar {
                T::lit(2.0)
            } else {
                T::lit(3.0)
            };
            let mut acc = BlochVector::zero();
            for (pk, a) in p.iter().zip(&povm.directions) {
                acc += *a * *pk;
            }
            acc * c
        }
        GeometryKind::Custom => least_squares_state(p, povm),
    };
    let r = if povm.planar { r.project_zx() } else { r };
    let residual = povm
        .weights
        .iter()
        .zip(&povm.directions)
        .zip(p)
        .map(|((w, a), pk)| (*pk - *w * (T::one() + a.dot(r))).abs())
        .fold(T::zero(), T::max);
    Ok(LinearInversion {
        r,
        residual,
        physical: r.is_physical(),
        y_unobservable: povm.planar,
    })
}

/// General weighted least squares via the pseudo-inverse of the frame operator.
pub(crate) fn least_squares_state<T: Scalar>(p: &[T], povm: &PovmGeometry<T>) -> BlochVector<T> {
    let mut m = [[T::zero(); 3]; 3];
    let mut b = [T::zero(); 3];
    for ((w, a), pk) in povm.weights.iter().zip(&povm.directions).zip(p) {
        let av = a.to_array();
        for i in 0..3 {
            b[i] = b[i] + *w * (*pk - *w) * av[i];
            for j in 0..3 {
                m[i][j] = m[i][j] + *w * *w * av[i] * av[j];
            }
        }
    }
    let (x, _) = sym3_pinv_solve(m, b, T::tol(1e-10));
    BlochVector::from_array(x)
}

/// Position of a state relative to the hull of the outcome directions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "region", rename_all = "lowercase")]
pub enum HullMembership {
    Inside,
    /// Outside; `facet` maximizes `r·u_k`.
    Outside {
        facet: usize,
    },
    /// On the hull within the tie tolerance, touching these facets.
    Boundary {
        facets: Vec<usize>,
    },
}

impl HullMembership {
    pub fn tag(&self) -> &'static str {
        match self {
            HullMembership::Inside => "inside",
            HullMembership::Outside { .. } => "outside",
            HullMembership::Boundary { .. } => "boundary",
        }
    }
}

/// Classifies `r` (projected onto the ZX plane for planar geometries).
pub fn hull_membership<T: Scalar>(r: BlochVector<T>, povm: &PovmGeometry<T>) -> HullMembership {
    let r = povm.effective_vector(r);
    let eps = T::tol(TIE_EPS);
    let mut best = (0usize, T::neg_infinity());
    let mut touching = Vec::new();
    for (k, f) in povm.facets.iter().enumerate() {
        let excess = r.dot(f.normal) - f.alpha.cos();
        if excess > best.1 {
            best = (k, excess);
        }
        if excess.abs() <= eps {
            touching.push(k);
        }
    }
    if best.1 > eps {
        HullMembership::Outside { facet: best.0 }
    } else if !touching.is_empty() {
        HullMembership::Boundary { facets: touching }
    } else {
        HullMembership::Inside
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn polygon_n3_layout() {
        let g = make_polygon_povm::<f64>(3).unwrap();
        let a = g.directions();
        assert!(close(a[0].dot(a[1]), -0.5, 1e-12));
        assert!(close(g.alpha().unwrap(), PI / 3.0, 1e-15));
        assert!(a[0].max_abs_diff(BlochVector::new(0.0, 0.0, 1.0)) < 1e-15);
        assert!(g.is_planar());
    }

    #[test]
    fn polygon_n4_normals() {
        let g = make_polygon_povm::<f64>(4).unwrap();
        for (k, deg) in [45.0f64, 135.0, 225.0, 315.0].iter().enumerate() {
            let u = BlochVector::in_zx_plane(deg.to_radians());
            assert!(g.facets()[k].normal.max_abs_diff(u) < 1e-12);
        }
        assert!(close(g.alpha().unwrap(), PI / 4.0, 1e-15));
    }

    #[test]
    fn polygon_n6_centroid() {
        let g = make_polygon_povm::<f64>(6).unwrap();
        let s = g
            .directions()
            .iter()
            .fold(BlochVector::zero(), |acc, a| acc + *a);
        assert!(s.norm() < 1e-12);
    }

    #[test]
    fn polygon_below_three_rejected() {
        assert!(matches!(
            make_polygon_povm::<f64>(2),
            Err(Error::InvalidGeometry(_))
        ));
        assert!(make_polygon_povm::<f64>(0).is_err());
    }

    #[test]
    fn platonic_angles_and_face_counts() {
        let expected_faces = [4, 8, 6, 20, 12];
        for (solid, faces) in Solid::ALL.iter().zip(expected_faces) {
            let g = make_platonic_povm::<f64>(*solid);
            assert_eq!(g.outcomes(), solid.outcomes());
            assert_eq!(g.facets().len(), faces, "{solid}");
            for f in g.facets() {
                assert!(close(f.alpha, solid.facet_angle(), 1e-9), "{solid}");
                for &j in &f.vertices {
                    assert!(close(f.normal.dot(g.directions()[j]), f.alpha.cos(), 1e-9));
                }
            }
            assert!(g.violations(COMPLETENESS_TOL).is_empty(), "{solid}");
        }
    }

    #[test]
    fn listed_facet_angles() {
        assert!(close(
            Solid::Octahedron.facet_angle(),
            0.955_316_618_124_509_3,
            1e-12
        ));
        assert!(close(
            Solid::Tetrahedron.facet_angle(),
            1.230_959_417_340_774_8,
            1e-12
        ));
    }

    #[test]
    fn octahedron_matches_six_polarizations() {
        let g = make_platonic_povm::<f64>(Solid::Octahedron);
        let expected = [
            [0.0, 0.0, 1.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, -1.0],
            [-1.0, 0.0, 0.0],
            [0.0, -1.0, 0.0],
        ];
        for (a, e) in g.directions().iter().zip(expected) {
            assert!(a.max_abs_diff(BlochVector::from_array(e)) < 1e-15);
        }
        assert!(g.weights().iter().all(|w| close(*w, 1.0 / 6.0, 1e-15)));
    }

    #[test]
    fn born_examples() {
        let g = make_polygon_povm::<f64>(3).unwrap();
        let mixed = QubitState::maximally_mixed();
        for p in born_probabilities(&mixed, &g).probs() {
            assert!(close(*p, 1.0 / 3.0, 1e-15));
        }
        let a1 = g.directions()[0];
        let at = QubitState::from_bloch(a1).unwrap();
        let p = born_probabilities(&at, &g);
        assert!(close(p.probs()[0], 2.0 / 3.0, 1e-15));
        assert!(close(p.probs()[1], 1.0 / 6.0, 1e-15));
        let anti = QubitState::from_bloch(-a1).unwrap();
        let p = born_probabilities(&anti, &g);
        assert!(close(p.probs()[0], 0.0, 1e-15));
        assert!(close(p.probs()[1], 0.5, 1e-15));
        assert!(close(p.probs()[2], 0.5, 1e-15));
    }

    #[test]
    fn born_matches_trace_rule() {
        let g = make_platonic_povm::<f64>(Solid::Cube);
        let st = QubitState::from_bloch(BlochVector::new(0.2, -0.5, 0.4)).unwrap();
        let p = born_probabilities(&st, &g);
        for k in 0..g.outcomes() {
            let tr = g.element(k).trace_product(*st.matrix()).re;
            assert!(close(tr, p.probs()[k], 1e-15));
        }
        let total =
            (0..g.outcomes()).fold(Mat2::scaled_identity(0.0), |acc, k| acc.plus(g.element(k)));
        assert!(total.plus(Mat2::scaled_identity(-1.0)).frobenius_norm() < 1e-12);
    }

    #[test]
    fn linear_inversion_examples() {
        let g = make_polygon_povm::<f64>(3).unwrap();
        let uniform = OutcomeStats::from_probs(vec![1.0 / 3.0; 3]).unwrap();
        assert!(linear_inversion_state(&uniform, &g).unwrap().r.norm() < 1e-15);
        let anti = OutcomeStats::from_probs(vec![0.0, 0.5, 0.5]).unwrap();
        let inv = linear_inversion_state(&anti, &g).unwrap();
        assert!(inv.r.max_abs_diff(-g.directions()[0]) < 1e-15);
        assert!(inv.physical && inv.y_unobservable);
    }

    #[test]
    fn linear_inversion_vertex_matches_disk_grid_search() {
        // Independent route: brute-force the disk for the Bloch vector whose
        // Born statistics are closest to (2/3, 1/6, 1/6).
        let g = make_polygon_povm::<f64>(3).unwrap();
        let target = [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0];
        let mut best = (f64::INFINITY, BlochVector::zero());
        let m = 400;
        for i in 0..=m {
            for j in 0..=m {
                let z = -1.0 + 2.0 * i as f64 / m as f64;
                let x = -1.0 + 2.0 * j as f64 / m as f64;
                if x * x + z * z > 1.0 + 1e-12 {
                    continue;
                }
                let r = BlochVector::new(x, 0.0, z);
                let err: f64 = g
                    .born_raw(r)
                    .iter()
                    .zip(target)
                    .map(|(p, t)| (p - t).powi(2))
                    .sum();
                if err < best.0 {
                    best = (err, r);
                }
            }
        }
        let grid_r = best.1;
        assert!(grid_r.max_abs_diff(g.directions()[0]) < 1e-12);
        let inv = linear_inversion_state(&OutcomeStats::from_probs(target.to_vec()).unwrap(), &g)
            .unwrap();
        assert!(inv.r.max_abs_diff(grid_r) < 1e-12);
    }

    #[test]
    fn custom_least_squares_agrees_with_closed_form() {
        for g in [
            make_polygon_povm::<f64>(5).unwrap(),
            make_platonic_povm(Solid::Icosahedron),
        ] {
            let custom = PovmGeometry::from_parts(
                GeometryKind::Custom,
                g.directions().to_vec(),
                g.weights().to_vec(),
                None,
                0.0,
            )
            .unwrap();
            let r = BlochVector::new(0.3, if g.is_planar() { 0.0 } else { -0.2 }, 0.1);
            let stats = OutcomeStats::from_probs(g.born_raw(r)).unwrap();
            let a = linear_inversion_state(&stats, &g).unwrap();
            let b = linear_inversion_state(&stats, &custom).unwrap();
            assert!(a.r.max_abs_diff(r) < 1e-12);
            assert!(b.r.max_abs_diff(r) < 1e-12);
            assert_eq!(custom.facets().len(), g.facets().len());
        }
    }

    #[test]
    fn unphysical_inversion_flagged_not_clamped() {
        let g = make_polygon_povm::<f64>(3).unwrap();
        let stats = OutcomeStats::from_probs(vec![0.75, 0.20, 0.05]).unwrap();
        let inv = linear_inversion_state(&stats, &g).unwrap();
        assert!(!inv.physical);
        assert!(inv.r.norm() > 1.0);
    }

    #[test]
    fn membership_examples() {
        let g3 = make_polygon_povm::<f64>(3).unwrap();
        assert_eq!(
            hull_membership(BlochVector::zero(), &g3),
            HullMembership::Inside
        );
        let u1 = g3.facets()[0].normal;
        assert_eq!(
            hull_membership(u1, &g3),
            HullMembership::Outside { facet: 0 }
        );
        let g4 = make_polygon_povm::<f64>(4).unwrap();
        match hull_membership(g4.directions()[1], &g4) {
            HullMembership::Boundary { facets } => assert_eq!(facets, vec![0, 1]),
            other => panic!("expected boundary, got {other:?}"),
        }
        for s in Solid::ALL {
            let g = make_platonic_povm::<f64>(s);
            assert_eq!(
                hull_membership(BlochVector::zero(), &g),
                HullMembership::Inside
            );
        }
    }

    #[test]
    fn membership_ignores_y_for_planar() {
        let g = make_polygon_povm::<f64>(3).unwrap();
        let r = BlochVector::new(0.0, 0.99, 0.0);
        assert_eq!(hull_membership(r, &g), HullMembership::Inside);
    }

    #[test]
    fn custom_completeness_violation_detected() {
        let g = make_polygon_povm::<f64>(4).unwrap();
        let mut w = g.weights().to_vec();
        w[0] = 0.3;
        w[2] = 0.2;
        let err = PovmGeometry::from_parts(
            GeometryKind::Custom,
            g.directions().to_vec(),
            w.clone(),
            None,
            0.0,
        );
        assert!(matches!(err, Err(Error::InvalidGeometry(ref m)) if m.contains("completeness")));
        let unchecked = PovmGeometry::from_parts_unchecked(
            GeometryKind::Custom,
            g.directions().to_vec(),
            w,
            None,
            0.0,
        )
        .unwrap();
        assert_eq!(
            unchecked.violations(CUSTOM_COMPLETENESS_TOL)[0].check,
            "completeness"
        );
    }

    #[test]
    fn f32_geometry() {
        let g = make_polygon_povm::<f32>(6).unwrap();
        assert!(g.violations(1e-6).is_empty());
        let g = make_platonic_povm::<f32>(Solid::Dodecahedron);
        assert_eq!(g.facets().len(), 12);
    }
}
