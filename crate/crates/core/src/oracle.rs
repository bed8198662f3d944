//! Numerical guessing probability: the adversary prepares an ensemble of pure
//! states `t_m` with weights `x_m`, each tagged with the outcome she will
//! guess, subject to reproducing the observed statistics.
//!
//! Because the constraint column of a candidate state does not depend on the
//! guess attached to it, each candidate carries a single variable with cost
//! `max_k w_k(1 + a_k·t)`. The LP is solved over a fixed grid of candidates;
//! with refinement enabled, new candidates are generated from the dual
//! prices until no state on the sphere (or circle) has positive reduced cost.

use serde::Serialize;

use crate::analytic::{
    facet_function, min_entropy, trusted_min_entropy, CertMethod, CertificateReport,
};
use crate::bloch::{fibonacci_sphere, BlochVector};
use crate::error::{Error, Result};
use crate::geometry::{
    hull_membership, linear_inversion_state, GeometryKind, PovmGeometry, TIE_EPS,
};
use crate::lp;
use crate::scalar::Scalar;
use crate::stats::OutcomeStats;

/// Linear-inversion tolerance for declaring a target infeasible.
pub const INFEASIBLE_TOL: f64 = 1e-6;
/// Refinement stops once no candidate improves the objective by more than this.
pub const REFINE_TOL: f64 = 1e-10;
/// Audit threshold for residuals and mismatches.
pub const AUDIT_TOL: f64 = 1e-8;
/// Candidates closer than this make the basis ill-conditioned; skipping them
/// costs at most O(separation²) in the objective.
const MIN_SEPARATION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleConfig {
    pub grid_size: usize,
    pub refine: bool,
    pub max_outer: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            grid_size: 720,
            refine: true,
            max_outer: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrategyComponent<T> {
    pub p: T,
    pub t: BlochVector<T>,
    pub k: usize,
}

/// Pure-state ensemble with one guessed outcome per member.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EveStrategy<T> {
    pub components: Vec<StrategyComponent<T>>,
    pub p_guess: T,
    /// `max_j |realized P_j − target P_j|`.
    pub residual: T,
}

impl<T: Scalar> EveStrategy<T> {
    /// Computes objective and residual from the components.
    pub fn new(
        components: Vec<StrategyComponent<T>>,
        povm: &PovmGeometry<T>,
        target: &[T],
    ) -> Self {
        let p_guess = objective(&components, povm);
        let residual = realized_probs(&components, povm)
            .iter()
            .zip(target)
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max);
        Self {
            components,
            p_guess,
            residual,
        }
    }

    pub fn weight_sum(&self) -> T {
        self.components.iter().map(|c| c.p).sum()
    }
}

fn objective<T: Scalar>(components: &[StrategyComponent<T>], povm: &PovmGeometry<T>) -> T {
    components
        .iter()
        .map(|c| c.p * povm.weights()[c.k] * (T::one() + povm.directions()[c.k].dot(c.t)))
        .sum()
}

fn realized_probs<T: Scalar>(
    components: &[StrategyComponent<T>],
    povm: &PovmGeometry<T>,
) -> Vec<T> {
    let mut out = vec![T::zero(); povm.outcomes()];
    for c in components {
        for (o, (w, a)) in out
            .iter_mut()
            .zip(povm.weights().iter().zip(povm.directions()))
        {
            *o = *o + c.p * *w * (T::one() + a.dot(c.t));
        }
    }
    out
}

/// Best guess for a known pure state, `(k, w_k(1 + a_k·t))`; lowest index on ties.
fn best_guess<T: Scalar>(t: BlochVector<T>, povm: &PovmGeometry<T>) -> (usize, T) {
    povm.weights()
        .iter()
        .zip(povm.directions())
        .map(|(w, a)| *w * (T::one() + a.dot(t)))
        .enumerate()
        .fold(
            (0, T::neg_infinity()),
            |b, (k, v)| if v > b.1 { (k, v) } else { b },
        )
}

/// Guessing probability from the LP over `grid_size` candidate pure states.
pub fn oracle_pguess_lp<T: Scalar>(
    target: &OutcomeStats<T>,
    povm: &PovmGeometry<T>,
    grid_size: usize,
    refine: bool,
) -> Result<(T, EveStrategy<T>)> {
    oracle_pguess_with(
        target,
        povm,
        &OracleConfig {
            grid_size,
            refine,
            ..OracleConfig::default()
        },
    )
}

pub fn oracle_pguess_with<T: Scalar>(
    target: &OutcomeStats<T>,
    povm: &PovmGeometry<T>,
    cfg: &OracleConfig,
) -> Result<(T, EveStrategy<T>)> {
    if cfg.grid_size < 32 {
        return Err(Error::Domain(format!(
            "grid size {} below 32",
            cfg.grid_size
        )));
    }
    let r = feasible_state(target, povm)?;
    if r.norm() >= T::one() - T::tol(1e-12) {
        // A pure target admits exactly one decomposition.
        let t = r * (T::one() / r.norm());
        let comps = vec![StrategyComponent {
            p: T::one(),
            t,
            k: best_guess(t, povm).0,
        }];
        let strat = EveStrategy::new(comps, povm, target.probs());
        return Ok((strat.p_guess, strat));
    }
    // Solve against the consistent projection of the target so that
    // rounding in the data cannot make the LP infeasible.
    let model = povm.born_raw(r);
    let mut cands = initial_candidates(povm, r, cfg.grid_size);
    let (a, c) = lp_columns(&cands, povm);
    let mut sol = lp::maximize(&a, &model, &c)?;
    if cfg.refine {
        for _ in 1..cfg.max_outer {
            let fresh = price_new_columns(&sol.duals, povm, &cands);
            if fresh.is_empty() {
                break;
            }
            let mut next = cands.clone();
            next.extend(fresh);
            let (a, c) = lp_columns(&next, povm);
            // Keep the last well-conditioned solution if the enlarged
            // problem loses accuracy.
            match lp::maximize(&a, &model, &c) {
                Ok(s)
                    if s.residual <= T::tol(1e-10)
                        && s.objective >= sol.objective - T::tol(1e-12) =>
                {
                    sol = s;
                    cands = next;
                }
                _ => break,
            }
        }
    }
    let components: Vec<StrategyComponent<T>> = sol
        .x
        .iter()
        .zip(&cands)
        .filter(|(x, _)| **x > T::zero())
        .map(|(&p, &t)| StrategyComponent {
            p,
            t,
            k: best_guess(t, povm).0,
        })
        .collect();
    let strat = EveStrategy::new(components, povm, target.probs());
    Ok((strat.p_guess, strat))
}

/// Bloch vector implied by the target, rejected when no state reproduces it.
fn feasible_state<T: Scalar>(
    target: &OutcomeStats<T>,
    povm: &PovmGeometry<T>,
) -> Result<BlochVector<T>> {
    let inv = linear_inversion_state(target, povm)?;
    let norm = inv.r.norm();
    let tol = T::tol(INFEASIBLE_TOL);
    if inv.residual > tol || norm > T::one() + tol {
        return Err(Error::Infeasible {
            residual: inv.residual.to_f64_lossy(),
            implied_norm: norm.to_f64_lossy(),
        });
    }
    Ok(if norm > T::one() {
        inv.r * (T::one() / norm)
    } else {
        inv.r
    })
}

fn initial_candidates<T: Scalar>(
    povm: &PovmGeometry<T>,
    r: BlochVector<T>,
    grid: usize,
) -> Vec<BlochVector<T>> {
    let mut out: Vec<BlochVector<T>> = if povm.is_planar() {
        let phi0 = povm.orientation_deg().to_radians();
        let step = T::TAU() / T::of_usize(grid);
        (0..grid)
            .map(|j| BlochVector::in_zx_plane(phi0 + step * T::of_usize(j)))
            .collect()
    } else {
        fibonacci_sphere(grid)
    };
    let extra = povm
        .directions()
        .iter()
        .filter_map(|a| a.normalized())
        .chain(povm.facets().iter().map(|f| f.normal))
        .chain(r.normalized());
    for t in extra {
        // Exact special directions replace any grid point crowding them.
        out.retain(|c| c.max_abs_diff(t) > T::tol(MIN_SEPARATION));
        out.push(t);
    }
    out
}

fn lp_columns<T: Scalar>(
    cands: &[BlochVector<T>],
    povm: &PovmGeometry<T>,
) -> (Vec<Vec<T>>, Vec<T>) {
    let a = povm
        .weights()
        .iter()
        .zip(povm.directions())
        .map(|(w, d)| cands.iter().map(|t| *w * (T::one() + d.dot(*t))).collect())
        .collect();
    let c = cands.iter().map(|t| best_guess(*t, povm).1).collect();
    (a, c)
}

/// For each guess `k` the reduced cost `w_k(1 + a_k·t) − Σ_j y_j w_j(1 + a_j·t)`
/// is affine in `t`, so its maximiser over unit vectors is explicit.
fn price_new_columns<T: Scalar>(
    y: &[T],
    povm: &PovmGeometry<T>,
    cands: &[BlochVector<T>],
) -> Vec<BlochVector<T>> {
    let (w, dirs) = (povm.weights(), povm.directions());
    let mut base = T::zero();
    let mut pull = BlochVector::zero();
    for ((yj, wj), aj) in y.iter().zip(w).zip(dirs) {
        base = base + *yj * *wj;
        pull += *aj * (*yj * *wj);
    }
    let reduced = |t: BlochVector<T>| best_guess(t, povm).1 - base - pull.dot(t);
    let mut fresh = Vec::new();
    for (wk, ak) in w.iter().zip(dirs) {
        let v = povm.effective_vector(*ak * *wk - pull);
        let Some(t) = v.normalized() else { continue };
        if reduced(t) > T::tol(REFINE_TOL)
            && !cands
                .iter()
                .chain(&fresh)
                .any(|c| c.max_abs_diff(t) <= T::tol(MIN_SEPARATION))
        {
            fresh.push(t);
        }
    }
    fresh
}

/// Oracle value packaged as a certificate.
pub fn oracle_certify<T: Scalar>(
    target: &OutcomeStats<T>,
    povm: &PovmGeometry<T>,
    cfg: &OracleConfig,
) -> Result<CertificateReport<T>> {
    let (p, _) = oracle_pguess_with(target, povm, cfg)?;
    let r = feasible_state(target, povm)?;
    Ok(CertificateReport {
        geometry_id: povm.id(),
        state: Some(r),
        stats: Some(target.clone()),
        p_guess: p,
        hmin_sdi: min_entropy(p.min(T::one()))?,
        hmin_trusted: trusted_min_entropy(target),
        method: CertMethod::Oracle,
        region: hull_membership(r, povm).tag().to_string(),
        active_facets: Vec::new(),
    })
}

/// Result of re-checking a strategy from its raw components.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyAudit<T> {
    pub weight_sum: T,
    pub constraint_residual: T,
    pub objective: T,
    pub objective_mismatch: T,
    pub min_weight: T,
    pub max_unit_deviation: T,
    pub flagged: bool,
    pub issues: Vec<String>,
}

/// Recomputes weights, realized statistics and objective; anything off by
/// more than [`AUDIT_TOL`] is flagged.
pub fn strategy_audit<T: Scalar>(
    strategy: &EveStrategy<T>,
    povm: &PovmGeometry<T>,
    target: &OutcomeStats<T>,
) -> StrategyAudit<T> {
    let tol = T::tol(AUDIT_TOL);
    let mut issues = Vec::new();
    let n = povm.outcomes();
    let bad_k: Vec<usize> = strategy
        .components
        .iter()
        .map(|c| c.k)
        .filter(|k| *k >= n)
        .collect();
    if !bad_k.is_empty() {
        issues.push(format!("outcome index out of range: {bad_k:?}"));
    }
    let comps: Vec<StrategyComponent<T>> = strategy
        .components
        .iter()
        .copied()
        .filter(|c| c.k < n)
        .collect();
    let weight_sum: T = strategy.components.iter().map(|c| c.p).sum();
    let min_weight = strategy
        .components
        .iter()
        .map(|c| c.p)
        .fold(T::infinity(), T::min);
    let max_unit_deviation = strategy
        .components
        .iter()
        .map(|c| (c.t.norm() - T::one()).abs())
        .fold(T::zero(), T::max);
    let constraint_residual = if target.len() == n {
        realized_probs(&comps, povm)
            .iter()
            .zip(target.probs())
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max)
    } else {
        issues.push(format!(
            "target has {} outcomes, geometry {}",
            target.len(),
            n
        ));
        T::infinity()
    };
    let obj = objective(&comps, povm);
    let objective_mismatch = (obj - strategy.p_guess).abs();
    if (weight_sum - T::one()).abs() > tol {
        issues.push(format!("weights sum to {}", weight_sum.to_f64_lossy()));
    }
    if min_weight < -tol {
        issues.push(format!("negative weight {}", min_weight.to_f64_lossy()));
    }
    if max_unit_deviation > tol {
        issues.push(format!(
            "state off the sphere by {:e}",
            max_unit_deviation.to_f64_lossy()
        ));
    }
    if constraint_residual > tol {
        issues.push(format!(
            "statistics residual {:e}",
            constraint_residual.to_f64_lossy()
        ));
    }
    if objective_mismatch > tol {
        issues.push(format!(
            "stored objective off by {:e}",
            objective_mismatch.to_f64_lossy()
        ));
    }
    StrategyAudit {
        weight_sum,
        constraint_residual,
        objective: obj,
        objective_mismatch,
        min_weight,
        max_unit_deviation,
        flagged: !issues.is_empty(),
        issues,
    }
}

/// Two-state construction for polygons. Outside the hull Eve mixes `t1`
/// (guessing the facet's first vertex) and `t2` (its second) with weight
/// `lambda`, both at the same angle to the facet normal as `s = r`; `t3` is
/// the unused third state (`q = 0`). Inside the hull `vertex_weights` holds
/// a mixture of the POVM vertices themselves; `t1`, `t2` are then the
/// vertices of the sector containing `r`, `q` the uniform share.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParametricStrategy<T> {
    pub s: BlochVector<T>,
    pub lambda: T,
    pub q: T,
    pub t1: BlochVector<T>,
    pub t2: BlochVector<T>,
    pub t3: BlochVector<T>,
    pub facet: Option<usize>,
    pub vertex_weights: Option<Vec<T>>,
    k1: usize,
    k2: usize,
}

impl<T: Scalar> ParametricStrategy<T> {
    pub fn components(&self) -> Vec<StrategyComponent<T>> {
        match &self.vertex_weights {
            Some(ws) => ws
                .iter()
                .enumerate()
                .filter(|(_, p)| **p > T::zero())
                .map(|(k, &p)| StrategyComponent {
                    p,
                    t: BlochVector::zero(),
                    k,
                })
                .collect(),
            None => [
                (self.lambda, self.t1, self.k1),
                (T::one() - self.lambda, self.t2, self.k2),
            ]
            .into_iter()
            .filter(|(p, _, _)| *p > T::zero())
            .map(|(p, t, k)| StrategyComponent { p, t, k })
            .collect(),
        }
    }

    pub fn to_eve_strategy(&self, povm: &PovmGeometry<T>) -> EveStrategy<T> {
        let mut comps = self.components();
        if self.vertex_weights.is_some() {
            for c in &mut comps {
                c.t = povm.directions()[c.k];
            }
        }
        let target = povm.born_raw(self.s);
        EveStrategy::new(comps, povm, &target)
    }
}

/// Closed-form optimal strategy for a polygon POVM.
pub fn parametric_pguess_planar<T: Scalar>(
    r: BlochVector<T>,
    povm: &PovmGeometry<T>,
) -> Result<(T, ParametricStrategy<T>)> {
    if !matches!(povm.kind(), GeometryKind::Polygon(_)) {
        return Err(Error::UnsupportedGeometry(
            "parametric strategy needs a polygon".into(),
        ));
    }
    let r = povm.effective_vector(r);
    if !r.is_physical() {
        return Err(Error::UnphysicalState {
            norm: r.norm().to_f64_lossy(),
        });
    }
    let r = if r.norm() > T::one() {
        r * (T::one() / r.norm())
    } else {
        r
    };
    let alpha = povm.alpha().expect("polygons have a single facet angle");
    let n = T::of_usize(povm.outcomes());
    let (kf, x) = povm
        .facets()
        .iter()
        .map(|f| r.dot(f.normal))
        .enumerate()
        .fold(
            (0, T::neg_infinity()),
            |b, (k, v)| if v > b.1 { (k, v) } else { b },
        );
    let facet = &povm.facets()[kf];
    let u = facet.normal;
    let (k1, k2) = (facet.vertices[0], facet.vertices[1]);
    let (a1, a2) = (povm.directions()[k1], povm.directions()[k2]);

    if x < alpha.cos() - T::tol(TIE_EPS) {
        // r = β1 a1 + β2 a2 + (1 − β1 − β2)·(uniform vertex mixture, Bloch vector 0).
        let det = a1.z * a2.x - a1.x * a2.z;
        let b1 = (r.z * a2.x - r.x * a2.z) / det;
        let b2 = (a1.z * r.x - a1.x * r.z) / det;
        let (b1, b2) = (b1.max(T::zero()), b2.max(T::zero()));
        let q = (T::one() - b1 - b2).max(T::zero());
        let mut ws = vec![q / n; povm.outcomes()];
        ws[k1] = ws[k1] + b1;
        ws[k2] = ws[k2] + b2;
        let lambda = if b1 + b2 > T::zero() {
            b1 / (b1 + b2)
        } else {
            T::lit(0.5)
        };
        let strat = ParametricStrategy {
            s: r,
            lambda,
            q,
            t1: a1,
            t2: a2,
            t3: a1,
            facet: None,
            vertex_weights: Some(ws),
            k1,
            k2,
        };
        return Ok((T::lit(2.0) / n, strat));
    }

    let x = x.min(T::one());
    let side = (a1 - u * a1.dot(u))
        .normalized()
        .expect("vertex is not parallel to its facet normal");
    let w = (T::one() - x * x).max(T::zero()).sqrt();
    let t1 = u * x + side * w;
    let t2 = u * x - side * w;
    let lambda = if w > T::tol(1e-12) {
        ((T::one() + r.dot(side) / w) / T::lit(2.0))
            .max(T::zero())
            .min(T::one())
    } else {
        T::lit(0.5)
    };
    let strat = ParametricStrategy {
        s: r,
        lambda,
        q: T::zero(),
        t1,
        t2,
        t3: -u,
        facet: Some(kf),
        vertex_weights: None,
        k1,
        k2,
    };
    Ok(((T::one() + facet_function(x, alpha)) / n, strat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::guessing_probability_analytic;
    use crate::geometry::{make_platonic_povm, make_polygon_povm, Solid};
    use proptest::prelude::*;

    fn stats(p: Vec<f64>) -> OutcomeStats<f64> {
        OutcomeStats::from_probs(p).unwrap()
    }

    fn born(r: BlochVector<f64>, g: &PovmGeometry<f64>) -> OutcomeStats<f64> {
        stats(g.born_raw(r))
    }

    /// Independent brute force for planar targets: best two-state ensemble
    /// `λ t1 + (1 − λ) t2 = r` over a fine angle grid. This is a lower bound
    /// everywhere and optimal outside the hull.
    fn brute_two_state(r: BlochVector<f64>, g: &PovmGeometry<f64>, steps: usize) -> f64 {
        let cost = |t: BlochVector<f64>| best_guess(t, g).1;
        let mut best = if r.norm() >= 1.0 - 1e-12 {
            cost(r * (1.0 / r.norm()))
        } else {
            0.0
        };
        for i in 0..steps {
            let t1 = BlochVector::in_zx_plane(std::f64::consts::TAU * i as f64 / steps as f64);
            // The second state is where the ray from t1 through r exits the circle.
            let d = r - t1;
            let dn = d.norm();
            if dn < 1e-12 {
                continue;
            }
            let e = d * (1.0 / dn);
            let s = -2.0 * t1.dot(e);
            if s <= dn {
                continue;
            }
            let t2 = t1 + e * s;
            let lambda = 1.0 - dn / s;
            best = best.max(lambda * cost(t1) + (1.0 - lambda) * cost(t2));
        }
        best
    }

    #[test]
    fn uniform_target_on_triangle() {
        let g = make_polygon_povm::<f64>(3).unwrap();
        let (p, s) = oracle_pguess_lp(&stats(vec![1.0 / 3.0; 3]), &g, 720, true).unwrap();
        assert!((p - 2.0 / 3.0).abs() < 1e-10);
        assert!(!strategy_audit(&s, &g, &stats(vec![1.0 / 3.0; 3])).flagged);
    }

    #[test]
    fn one_zero_outcome_on_triangle() {
        let g = make_polygon_povm::<f64>(3).unwrap();
        let target = stats(vec![0.0, 0.5, 0.5]);
        let (p, s) = oracle_pguess_lp(&target, &g, 720, true).unwrap();
        assert!((p - 0.5).abs() < 1e-10);
        // Pure target: all weight on the antipode of the first element, and
        // Eve guesses one of the other two outcomes.
        let anti = -g.directions()[0];
        for c in &s.components {
            assert!(c.t.max_abs_diff(anti) < 1e-9);
            assert!(c.k == 1 || c.k == 2);
        }
    }

    #[test]
    fn octahedron_edge_midpoint_forced() {
        let g = make_platonic_povm::<f64>(Solid::Octahedron);
        let r = BlochVector::new(1.0, 1.0, 0.0) * (1.0 / 2f64.sqrt());
        let (p, s) = oracle_pguess_lp(&born(r, &g), &g, 720, true).unwrap();
        assert!((p - (1.0 + 1.0 / 2f64.sqrt()) / 6.0).abs() < 1e-9);
        assert!(!strategy_audit(&s, &g, &born(r, &g)).flagged);
    }

    #[test]
    fn infeasible_targets() {
        let g = make_polygon_povm::<f64>(3).unwrap();
        // Implied |r| = 2·|P − 1/3 …| well above one.
        let e = oracle_pguess_lp(&stats(vec![1.0, 0.0, 0.0]), &g, 64, false).unwrap_err();
        assert!(matches!(e, Error::Infeasible { .. }), "{e:?}");
        let g4 = make_polygon_povm::<f64>(4).unwrap();
        let e = oracle_pguess_lp(&stats(vec![0.5, 0.2, 0.2, 0.1]), &g4, 64, false).unwrap_err();
        assert!(matches!(e, Error::Infeasible { .. }));
    }

    #[test]
    fn small_grid_rejected() {
        let g = make_polygon_povm::<f64>(3).unwrap();
        assert!(oracle_pguess_lp(&stats(vec![1.0 / 3.0; 3]), &g, 16, false).is_err());
    }

    #[test]
    fn matches_brute_force_ensembles() {
        for n in 3..=6 {
            let g = make_polygon_povm::<f64>(n).unwrap();
            for (rx, rz) in [(0.3, 0.9), (-0.95, 0.1), (0.05, -0.7), (0.6, 0.6)] {
                let r = BlochVector::new(rx, 0.0, rz);
                let want = brute_two_state(r, &g, 20_000);
                let (got, _) = oracle_pguess_lp(&born(r, &g), &g, 720, true).unwrap();
                assert!(got >= want - 1e-6, "N={n} r=({rx},{rz}): {got} vs {want}");
                if matches!(
                    hull_membership(r, &g),
                    crate::geometry::HullMembership::Outside { .. }
                ) {
                    assert!(got - want < 1e-5, "N={n} r=({rx},{rz}): {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn parametric_inside_is_vertex_mixture() {
        let g = make_polygon_povm::<f64>(5).unwrap();
        let r = BlochVector::new(0.2, 0.0, -0.3);
        let (p, ps) = parametric_pguess_planar(r, &g).unwrap();
        assert!((p - 0.4).abs() < 1e-15);
        let eve = ps.to_eve_strategy(&g);
        let audit = strategy_audit(&eve, &g, &born(r, &g));
        assert!(!audit.flagged, "{:?}", audit.issues);
        assert!((eve.p_guess - 0.4).abs() < 1e-12);
    }

    #[test]
    fn parametric_facet_normal_triangle() {
        let g = make_polygon_povm::<f64>(3).unwrap();
        let u = g.facets()[0].normal;
        let (p, ps) = parametric_pguess_planar(u, &g).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        let (k1, k2) = (g.facets()[0].vertices[0], g.facets()[0].vertices[1]);
        assert!((ps.t1.dot(g.directions()[k1]) - ps.t2.dot(g.directions()[k2])).abs() < 1e-12);
    }

    #[test]
    fn parametric_near_pure_pentagon_matches_oracle() {
        let g = make_polygon_povm::<f64>(5).unwrap();
        let r = g.facets()[0].normal * 0.99;
        let (p, ps) = parametric_pguess_planar(r, &g).unwrap();
        let (o, _) = oracle_pguess_lp(&born(r, &g), &g, 1440, true).unwrap();
        assert!((p - o).abs() < 1e-4);
        let lam = (1.0 - r.norm_sq()) / (2.0 - 2.0 * r.dot(ps.t1));
        assert!((lam - ps.lambda).abs() < 1e-9);
        assert_eq!(ps.q, 0.0);
    }

    #[test]
    fn audit_flags_short_weights() {
        let g = make_polygon_povm::<f64>(4).unwrap();
        let comps = (0..4)
            .map(|k| StrategyComponent {
                p: 0.225,
                t: g.directions()[k],
                k,
            })
            .collect();
        let s = EveStrategy::new(comps, &g, &[0.25; 4]);
        let a = strategy_audit(&s, &g, &stats(vec![0.25; 4]));
        assert!(a.flagged);
        assert!((a.weight_sum - 0.9).abs() < 1e-12);
    }

    #[test]
    fn audit_vertex_mixture_is_clean() {
        let g = make_polygon_povm::<f64>(6).unwrap();
        let comps = (0..6)
            .map(|k| StrategyComponent {
                p: 1.0 / 6.0,
                t: g.directions()[k],
                k,
            })
            .collect();
        let s = EveStrategy::new(comps, &g, &[1.0 / 6.0; 6]);
        let a = strategy_audit(&s, &g, &stats(vec![1.0 / 6.0; 6]));
        assert!(!a.flagged);
        assert!(a.constraint_residual < 1e-15);
        assert!((a.objective - 2.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn grid_doubling_is_monotone() {
        let g = make_polygon_povm::<f64>(5).unwrap();
        let r = BlochVector::new(0.83, 0.0, 0.41);
        let t = born(r, &g);
        let vals: Vec<f64> = [45, 90, 180, 360, 720]
            .iter()
            .map(|&gs| oracle_pguess_lp(&t, &g, gs, false).unwrap().0)
            .collect();
        for w in vals.windows(3) {
            let (d1, d2) = (w[1] - w[0], w[2] - w[1]);
            assert!(d1 >= -1e-12 && d2 >= -1e-12 && d2 <= d1 + 1e-12, "{vals:?}");
        }
    }

    #[test]
    fn deterministic_results() {
        let g = make_platonic_povm::<f64>(Solid::Cube);
        let t = born(BlochVector::new(0.3, -0.5, 0.6), &g);
        let a = oracle_pguess_lp(&t, &g, 400, true).unwrap();
        let b = oracle_pguess_lp(&t, &g, 400, true).unwrap();
        assert_eq!(a, b);
    }

    fn disk_point() -> impl Strategy<Value = BlochVector<f64>> {
        (0.0f64..1.0, 0.0f64..std::f64::consts::TAU)
            .prop_map(|(u, phi)| BlochVector::in_zx_plane(phi) * u.sqrt())
    }

    fn ball_point() -> impl Strategy<Value = BlochVector<f64>> {
        (0.0f64..1.0, -1.0f64..1.0, 0.0f64..std::f64::consts::TAU).prop_map(|(u, z, phi)| {
            let rho = (1.0 - z * z).sqrt();
            BlochVector::new(rho * phi.cos(), rho * phi.sin(), z) * u.cbrt()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn lp_strategies_pass_audit(n in 3usize..9, r in disk_point()) {
            let g = make_polygon_povm::<f64>(n).unwrap();
            let t = born(r, &g);
            let (_, s) = oracle_pguess_lp(&t, &g, 360, true).unwrap();
            let a = strategy_audit(&s, &g, &t);
            prop_assert!(!a.flagged, "{:?}", a.issues);
        }

        #[test]
        fn planar_oracle_matches_closed_form(n in 3usize..11, r in disk_point()) {
            let g = make_polygon_povm::<f64>(n).unwrap();
            let (o, _) = oracle_pguess_lp(&born(r, &g), &g, 720, true).unwrap();
            let an = guessing_probability_analytic(r, &g).unwrap().p_guess;
            let (pp, ps) = parametric_pguess_planar(r, &g).unwrap();
            prop_assert!(an - o >= -1e-9 && an - o <= 1e-3, "analytic {an} oracle {o}");
            prop_assert!((pp - o).abs() <= 1e-4);
            let eve = ps.to_eve_strategy(&g);
            let audit = strategy_audit(&eve, &g, &born(r, &g));
            prop_assert!(!audit.flagged, "{:?}", audit.issues);
            prop_assert!((eve.p_guess - pp).abs() < 1e-9);
        }

        #[test]
        fn solid_oracle_below_closed_form(r in ball_point(), which in 0usize..5) {
            let g = make_platonic_povm::<f64>(Solid::ALL[which]);
            let (o, s) = oracle_pguess_lp(&born(r, &g), &g, 400, true).unwrap();
            let an = guessing_probability_analytic(r, &g).unwrap().p_guess;
            prop_assert!(o <= an + 1e-9, "oracle {o} analytic {an}");
            prop_assert!(!strategy_audit(&s, &g, &born(r, &g)).flagged);
        }

        #[test]
        fn pure_targets_are_rigid(theta in 0.0f64..std::f64::consts::PI, phi in 0.0f64..std::f64::consts::TAU, which in 0usize..5) {
            let g = make_platonic_povm::<f64>(Solid::ALL[which]);
            let r = BlochVector::from_spherical(theta, phi);
            let (o, _) = oracle_pguess_lp(&born(r, &g), &g, 200, true).unwrap();
            prop_assert!((o - best_guess(r, &g).1).abs() < 1e-6);
        }
    }
}
