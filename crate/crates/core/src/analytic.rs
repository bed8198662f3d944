//! Closed-form guessing probability and min-entropy for symmetric POVMs.
//!
//! For an outcome hull with facet normals `u_k` at angle `α` from their
//! vertices, an adversary holding the purification of `ρ` guesses with
//!
//! ```text
//! p_g = 2/N                                   inside the hull
//! p_g = 1/N + (1/N) Σ_active f(r·u_k, α)      outside,  f(x, α) = x cos α + √(1 − x²) sin α
//! ```
//!
//! where a facet is active when `r·u_k > cos α`. Polygons have exactly one
//! active facet outside the hull and the value is exact. For Platonic solids
//! several facets can be active near vertices and edges; summing them is
//! conservative (never below the true optimum), so those reports carry
//! [`CertMethod::AnalyticUpperBound`] and are capped at 2/N.

use serde::{Deserialize, Serialize};

use crate::bloch::{BlochVector, PHYS_EPS};
use crate::error::{Error, Result};
use crate::geometry::{
    hull_membership, linear_inversion_state, HullMembership, PovmGeometry, TIE_EPS,
};
use crate::scalar::Scalar;
use crate::stats::OutcomeStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertMethod {
    AnalyticExact,
    AnalyticUpperBound,
    Oracle,
}

impl CertMethod {
    pub fn tag(self) -> &'static str {
        match self {
            CertMethod::AnalyticExact => "analytic-exact",
            CertMethod::AnalyticUpperBound => "analytic-upper-bound",
            CertMethod::Oracle => "oracle",
        }
    }
}

/// Guessing probability and min-entropies certified for one state or one
/// set of observed statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport<T> {
    pub geometry_id: String,
    pub state: Option<BlochVector<T>>,
    pub stats: Option<OutcomeStats<T>>,
    pub p_guess: T,
    pub hmin_sdi: T,
    pub hmin_trusted: T,
    pub method: CertMethod,
    pub region: String,
    pub active_facets: Vec<usize>,
}

impl<T: Scalar> CertificateReport<T> {
    /// `hmin_trusted − hmin_sdi`, at most one bit.
    pub fn trusted_gap(&self) -> T {
        self.hmin_trusted - self.hmin_sdi
    }
}

/// `H_min = −log₂ p_g`.
pub fn min_entropy<T: Scalar>(p_guess: T) -> Result<T> {
    if !(p_guess > T::zero()) || p_guess > T::one() + T::tol(1e-12) {
        return Err(Error::Domain(format!(
            "guessing probability {} outside (0, 1]",
            p_guess.to_f64_lossy()
        )));
    }
    Ok(-p_guess.min(T::one()).log2())
}

/// Classical min-entropy `−log₂ max_k P_k` of the outcome distribution,
/// i.e. what a fully trusted source would certify.
pub fn trusted_min_entropy<T: Scalar>(stats: &OutcomeStats<T>) -> T {
    let m = stats.max_prob();
    if m >= T::one() {
        T::zero()
    } else {
        -m.log2()
    }
}

/// `f(x, α) = x cos α + √(1 − x²) sin α`, with `x` clamped to `[−1, 1]`.
pub fn facet_function<T: Scalar>(x: T, alpha: T) -> T {
    let x = x.max(-T::one()).min(T::one());
    x * alpha.cos() + (T::one() - x * x).max(T::zero()).sqrt() * alpha.sin()
}

/// Evaluation knobs; the default is the certified formula.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AnalyticOptions<T> {
    /// Replaces every facet angle. Only for regression checks of wrong-α variants.
    pub alpha_override: Option<T>,
}

/// Closed-form certificate for Bloch vector `r` (planar geometries use the
/// ZX projection).
pub fn guessing_probability_analytic<T: Scalar>(
    r: BlochVector<T>,
    povm: &PovmGeometry<T>,
) -> Result<CertificateReport<T>> {
    guessing_probability_analytic_with(r, povm, AnalyticOptions::default())
}

pub fn guessing_probability_analytic_with<T: Scalar>(
    r: BlochVector<T>,
    povm: &PovmGeometry<T>,
    opts: AnalyticOptions<T>,
) -> Result<CertificateReport<T>> {
    if !r.is_physical() {
        return Err(Error::UnphysicalState {
            norm: r.norm().to_f64_lossy(),
        });
    }
    if !povm.is_symmetric() {
        return Err(Error::UnsupportedGeometry(
            "closed form needs unit directions with equal weights".into(),
        ));
    }
    let (p_guess, active, region) = analytic_pguess(r, povm, opts);
    let trusted = OutcomeStats::from_probs(povm.born_raw(povm.effective_vector(r)))
        .map(|s| trusted_min_entropy(&s))?;
    let report = CertificateReport {
        geometry_id: povm.id(),
        state: Some(r),
        stats: None,
        p_guess,
        hmin_sdi: min_entropy(p_guess)?,
        hmin_trusted: trusted,
        method: if povm.is_planar() {
            CertMethod::AnalyticExact
        } else {
            CertMethod::AnalyticUpperBound
        },
        region: region.to_string(),
        active_facets: active,
    };
    debug_assert!(report.trusted_gap() <= T::one() + T::tol(1e-9) || opts.alpha_override.is_some());
    Ok(report)
}

fn analytic_pguess<T: Scalar>(
    r: BlochVector<T>,
    povm: &PovmGeometry<T>,
    opts: AnalyticOptions<T>,
) -> (T, Vec<usize>, &'static str) {
    let n = T::of_usize(povm.outcomes());
    let r = povm.effective_vector(r);
    let eps = T::tol(TIE_EPS);
    let alpha_of = |k: usize| opts.alpha_override.unwrap_or(povm.facets()[k].alpha);

    let mut active: Vec<(usize, T)> = povm
        .facets()
        .iter()
        .enumerate()
        .filter_map(|(k, f)| {
            let x = r.dot(f.normal);
            (x - alpha_of(k).cos() > eps).then_some((k, x))
        })
        .collect();
    if active.is_empty() {
        let region = match hull_membership(r, povm) {
            HullMembership::Boundary { .. } => "boundary",
            _ => "inside",
        };
        return (T::lit(2.0) / n, Vec::new(), region);
    }
    if povm.is_planar() {
        // A single facet is active anywhere in the disk; keep the largest
        // projection so rounding at |r| = 1 cannot double count.
        let best = active
            .iter()
            .copied()
            .fold(active[0], |b, c| if c.1 > b.1 { c } else { b });
        active = vec![best];
    }
    let sum: T = active
        .iter()
        .map(|&(k, x)| facet_function(x, alpha_of(k)))
        .sum();
    // Several active facets can push the sum past 2/N, which bounds p_g for
    // every state; keep the smaller of the two valid upper bounds.
    let p = ((T::one() + sum) / n).min(T::lit(2.0) / n);
    (p, active.into_iter().map(|(k, _)| k).collect(), "outside")
}

/// Certificate from observed probabilities (linear inversion, then the
/// closed form). The report's trusted entropy uses the observed statistics.
pub fn certify_stats<T: Scalar>(
    stats: &OutcomeStats<T>,
    povm: &PovmGeometry<T>,
) -> Result<CertificateReport<T>> {
    let inv = linear_inversion_state(stats, povm)?;
    if inv.residual > T::tol(1e-6) {
        return Err(Error::Infeasible {
            residual: inv.residual.to_f64_lossy(),
            implied_norm: inv.r.norm().to_f64_lossy(),
        });
    }
    if inv.r.norm() > T::one() + T::tol(PHYS_EPS) {
        return Err(Error::UnphysicalState {
            norm: inv.r.norm().to_f64_lossy(),
        });
    }
    let mut report = guessing_probability_analytic(inv.r, povm)?;
    report.hmin_trusted = trusted_min_entropy(stats);
    report.stats = Some(stats.clone());
    Ok(report)
}

/// `(m_N, M_N)`: the smallest and largest certifiable min-entropy,
/// `log₂N − 1` and `log₂(N / (1 + cos α))`.
pub fn hmin_extrema<T: Scalar>(povm: &PovmGeometry<T>) -> Result<(T, T)> {
    let alpha = povm
        .alpha()
        .filter(|_| povm.is_symmetric())
        .ok_or_else(|| {
            Error::UnsupportedGeometry(
                "extrema need a symmetric geometry with one facet angle".into(),
            )
        })?;
    let n = T::of_usize(povm.outcomes());
    Ok((n.log2() - T::one(), (n / (T::one() + alpha.cos())).log2()))
}
