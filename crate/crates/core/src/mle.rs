//! Constrained maximum-likelihood state reconstruction from outcome counts,
//! by the diluted `RρR` fixed-point iteration.

use serde::Serialize;

use crate::analytic::{guessing_probability_analytic, trusted_min_entropy, CertificateReport};
use crate::bloch::{BlochVector, Mat2, QubitState};
use crate::error::{Error, Result};
use crate::geometry::PovmGeometry;
use crate::oracle::{oracle_certify, OracleConfig};
use crate::scalar::Scalar;
use crate::stats::OutcomeStats;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleConfig {
    pub max_iter: usize,
    /// Stop once the likelihood gain drops below `tol · |L|`.
    pub tol: f64,
    /// Initial dilution ε; halved within a step whenever the full step would
    /// lower the likelihood.
    pub dilution: f64,
    /// Keep every accepted Bloch vector in [`MleResult::iterates`].
    pub record_iterates: bool,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self {
            max_iter: 100_000,
            tol: 1e-12,
            dilution: 0.5,
            record_iterates: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MleResult<T> {
    pub rho_hat: QubitState<T>,
    pub log_likelihood: T,
    pub iterations: usize,
    pub converged: bool,
    /// `‖Rρ − ρ‖_F` at the returned state; zero at an interior optimum.
    pub gradient_norm: T,
    /// Likelihood after every accepted step, starting from `I/2`.
    pub history: Vec<T>,
    /// Accepted iterates from `I/2` on; empty unless requested.
    #[serde(skip)]
    pub iterates: Vec<BlochVector<T>>,
    /// Planar geometry: `r_y` is fixed at 0 rather than estimated.
    pub y_unobservable: bool,
}

/// `Σ_k N_k ln Tr[F_k ρ]` with `0·ln 0 = 0`. Without raw counts the
/// probabilities act as fractional counts.
pub fn log_likelihood<T: Scalar>(
    counts: &OutcomeStats<T>,
    state: &QubitState<T>,
    povm: &PovmGeometry<T>,
) -> T {
    let weights: Vec<T> = match counts.counts() {
        Some(c) => c.iter().map(|&n| T::lit(n as f64)).collect(),
        None => counts.probs().to_vec(),
    };
    ll_at(&weights, state.bloch(), povm)
}

fn ll_at<T: Scalar>(weights: &[T], r: BlochVector<T>, povm: &PovmGeometry<T>) -> T {
    weights
        .iter()
        .zip(povm.born_raw(r))
        .filter(|(n, _)| **n > T::zero())
        .map(|(n, p)| {
            if p > T::zero() {
                *n * p.ln()
            } else {
                T::neg_infinity()
            }
        })
        .sum()
}

/// `R = Σ_k (f_k / Tr[F_k ρ]) F_k`, as `(α, β)` with `R = α I + β·σ`.
fn r_operator<T: Scalar>(
    freqs: &[T],
    r: BlochVector<T>,
    povm: &PovmGeometry<T>,
) -> (T, BlochVector<T>) {
    let mut alpha = T::zero();
    let mut beta = BlochVector::zero();
    for ((f, p), (w, a)) in freqs
        .iter()
        .zip(povm.born_raw(r))
        .zip(povm.weights().iter().zip(povm.directions()))
    {
        if *f > T::zero() && p > T::zero() {
            let c = *f / p * *w;
            alpha = alpha + c;
            beta += *a * c;
        }
    }
    (alpha, beta)
}

/// One diluted step `ρ ← M ρ M / Tr`, `M = (1 − ε) I + ε R`.
fn diluted_step<T: Scalar>(
    r: BlochVector<T>,
    alpha: T,
    beta: BlochVector<T>,
    eps: T,
) -> BlochVector<T> {
    let m0 = T::one() - eps + eps * alpha;
    let m = Mat2::from_bloch_affine(m0, beta * (eps / m0));
    let rho = Mat2::from_bloch_affine(T::lit(0.5), r);
    let out = m.matmul(rho).matmul(m);
    let next = out.pauli_components() * (T::one() / out.trace().re);
    let n = next.norm();
    if n > T::one() {
        next * (T::one() / n)
    } else {
        next
    }
}

/// `‖Rρ − ρ‖_F`; zero exactly when `ρ` is a stationary point of the
/// likelihood with full support.
pub fn fixed_point_residual<T: Scalar>(
    counts: &OutcomeStats<T>,
    state: &QubitState<T>,
    povm: &PovmGeometry<T>,
) -> T {
    let r = state.bloch();
    let (alpha, beta) = r_operator(counts.probs(), r, povm);
    let rr = Mat2::from_bloch_affine(T::one(), beta).plus(Mat2::scaled_identity(alpha - T::one()));
    let rho = *state.matrix();
    rr.matmul(rho).plus(rho.scale(-T::one())).frobenius_norm()
}

pub fn mle_reconstruct<T: Scalar>(
    counts: &OutcomeStats<T>,
    povm: &PovmGeometry<T>,
    cfg: &MleConfig,
) -> Result<MleResult<T>> {
    if counts.len() != povm.outcomes() {
        return Err(Error::InvalidStats(format!(
            "{} outcomes in counts, geometry has {}",
            counts.len(),
            povm.outcomes()
        )));
    }
    if let Some(0) = counts.total() {
        return Err(Error::Domain("all counts are zero".into()));
    }
    if !(cfg.dilution > 0.0 && cfg.dilution <= 1.0) {
        return Err(Error::Domain(format!(
            "dilution {} outside (0, 1]",
            cfg.dilution
        )));
    }
    let weights: Vec<T> = match counts.counts() {
        Some(c) => c.iter().map(|&n| T::lit(n as f64)).collect(),
        None => counts.probs().to_vec(),
    };
    let freqs = counts.probs();
    let tol = T::lit(cfg.tol);
    let min_eps = T::tol(1e-12);

    let mut r = BlochVector::zero();
    let mut ll = ll_at(&weights, r, povm);
    let mut history = vec![ll];
    let mut iterates = Vec::new();
    if cfg.record_iterates {
        iterates.push(r);
    }
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let (alpha, beta) = r_operator(freqs, r, povm);
        let mut eps = T::lit(cfg.dilution);
        let (next, next_ll) = loop {
            let cand = diluted_step(r, alpha, beta, eps);
            let cand_ll = ll_at(&weights, cand, povm);
            if cand_ll >= ll || eps < min_eps {
                break (cand, cand_ll);
            }
            eps = eps / T::lit(2.0);
        };
        if !(next_ll >= ll) {
            // No ascent direction left at working precision.
            converged = true;
            break;
        }
        let gain = next_ll - ll;
        r = next;
        ll = next_ll;
        history.push(ll);
        if cfg.record_iterates {
            iterates.push(r);
        }
        if gain <= tol * ll.abs().max(T::one()) {
            converged = true;
            break;
        }
    }

    let rho_hat = QubitState::from_bloch(r)?;
    let gradient_norm = fixed_point_residual(counts, &rho_hat, povm);
    Ok(MleResult {
        rho_hat,
        log_likelihood: ll,
        iterations,
        converged,
        gradient_norm,
        history,
        iterates,
        y_unobservable: povm.is_planar(),
    })
}

/// Certificate computed from counts, with the reconstruction behind it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountsCertificate<T> {
    pub mle: MleResult<T>,
    /// `H_min(X|E)` of the reconstructed state.
    pub report: CertificateReport<T>,
    /// Same quantity for the prepared state, when one is given.
    pub theory: Option<CertificateReport<T>>,
}

/// Counts → MLE → closed form (planar) or oracle (solids).
pub fn certify_from_counts<T: Scalar>(
    counts: &OutcomeStats<T>,
    povm: &PovmGeometry<T>,
) -> Result<CertificateReport<T>> {
    certify_from_counts_with(
        counts,
        povm,
        None,
        &MleConfig::default(),
        &OracleConfig::default(),
    )
    .map(|c| c.report)
}

pub fn certify_from_counts_with<T: Scalar>(
    counts: &OutcomeStats<T>,
    povm: &PovmGeometry<T>,
    prepared: Option<BlochVector<T>>,
    mle_cfg: &MleConfig,
    oracle_cfg: &OracleConfig,
) -> Result<CountsCertificate<T>> {
    let mle = mle_reconstruct(counts, povm, mle_cfg)?;
    let mut report = certify_state(mle.rho_hat.bloch(), povm, oracle_cfg)?;
    report.hmin_trusted = trusted_min_entropy(counts);
    report.stats = Some(counts.clone());
    let theory = prepared
        .map(|r| certify_state(r, povm, oracle_cfg))
        .transpose()?;
    Ok(CountsCertificate {
        mle,
        report,
        theory,
    })
}

/// Exact certificate for a known state: closed form for polygons, oracle
/// for everything else.
pub fn certify_state<T: Scalar>(
    r: BlochVector<T>,
    povm: &PovmGeometry<T>,
    oracle_cfg: &OracleConfig,
) -> Result<CertificateReport<T>> {
    if povm.is_planar() && povm.is_symmetric() {
        guessing_probability_analytic(r, povm)
    } else {
        if !r.is_physical() {
            return Err(Error::UnphysicalState {
                norm: r.norm().to_f64_lossy(),
            });
        }
        let target = OutcomeStats::from_probs(povm.born_raw(povm.effective_vector(r)))?;
        let mut rep = oracle_certify(&target, povm, oracle_cfg)?;
        rep.stats = None;
        Ok(rep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{
        make_platonic_povm, make_polygon_povm, make_polygon_povm_oriented, Solid,
    };
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn counts(c: &[u64]) -> OutcomeStats<f64> {
        OutcomeStats::from_counts(c.to_vec()).unwrap()
    }

    #[test]
    fn likelihood_at_mixed_state() {
        let g = make_polygon_povm::<f64>(3).unwrap();
        let ll = log_likelihood(&counts(&[10, 0, 0]), &QubitState::maximally_mixed(), &g);
        assert!((ll - 10.0 * (1.0f64 / 3.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn likelihood_minus_infinity_on_impossible_outcome() {
        let g = make_polygon_povm::<f64>(3).unwrap();
        let s = QubitState::from_bloch(-g.directions()[0]).unwrap();
        assert_eq!(
            log_likelihood(&counts(&[1, 5, 5]), &s, &g),
            f64::NEG_INFINITY
        );
        assert!(log_likelihood(&counts(&[0, 5, 5]), &s, &g).is_finite());
    }

    #[test]
    fn exact_frequencies_maximise_likelihood() {
        let g = make_polygon_povm::<f64>(5).unwrap();
        let r = BlochVector::new(0.4, 0.0, -0.3);
        let p = g.born_raw(r);
        let c: Vec<u64> = p.iter().map(|x| (x * 1e6).round() as u64).collect();
        let s = OutcomeStats::from_counts(c).unwrap();
        let base = log_likelihood(&s, &QubitState::from_bloch(r).unwrap(), &g);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let d = BlochVector::new(
                rng.random_range(-0.05..0.05),
                0.0,
                rng.random_range(-0.05..0.05),
            );
            let ll = log_likelihood(&s, &QubitState::from_bloch(r + d).unwrap(), &g);
            assert!(ll <= base + 1e-6);
        }
    }

    #[test]
    fn pure_antivertex_recovered() {
        // First element along |V⟩, so |H⟩ is its antipode.
        let g = make_polygon_povm_oriented::<f64>(3, 180.0).unwrap();
        let res =
            mle_reconstruct(&counts(&[0, 500_000, 500_000]), &g, &MleConfig::default()).unwrap();
        assert!(res.converged);
        let r = res.rho_hat.bloch();
        assert!(
            r.max_abs_diff(BlochVector::new(0.0, 0.0, 1.0)) < 1e-6,
            "{r:?}"
        );
        let rep = guessing_probability_analytic(r, &g).unwrap();
        assert!((rep.hmin_sdi - 1.0).abs() < 5e-4);
    }

    #[test]
    fn multinomial_fit_reproduces_frequencies() {
        let g = make_polygon_povm::<f64>(3).unwrap();
        let c = counts(&[5000, 2500, 2500]);
        let res = mle_reconstruct(&c, &g, &MleConfig::default()).unwrap();
        let p = g.born_raw(res.rho_hat.bloch());
        for (a, b) in p.iter().zip([0.5, 0.25, 0.25]) {
            assert!((a - b).abs() < 1.0 / 10_000f64.sqrt());
        }
        assert!(res.gradient_norm < 1e-5);
    }

    #[test]
    fn unphysical_frequencies_land_on_boundary() {
        let g = make_polygon_povm::<f64>(3).unwrap();
        let c = counts(&[75, 20, 5]);
        let res = mle_reconstruct(&c, &g, &MleConfig::default()).unwrap();
        let r = res.rho_hat.bloch();
        assert!((r.norm() - 1.0).abs() < 1e-6, "|r| = {}", r.norm());
        // Independent maximiser: dense search over the disk.
        let mut best = f64::NEG_INFINITY;
        for i in 0..=400 {
            for j in 0..=400 {
                let v = BlochVector::new(-1.0 + i as f64 / 200.0, 0.0, -1.0 + j as f64 / 200.0);
                if v.norm() <= 1.0 {
                    best = best.max(log_likelihood(&c, &QubitState::from_bloch(v).unwrap(), &g));
                }
            }
        }
        for k in 0..20_000 {
            let v = BlochVector::in_zx_plane(std::f64::consts::TAU * k as f64 / 20_000.0);
            best = best.max(log_likelihood(&c, &QubitState::from_bloch(v).unwrap(), &g));
        }
        assert!(res.log_likelihood >= best - 1e-6);
        let inv = crate::geometry::linear_inversion_state(&c, &g).unwrap().r;
        let clamped = QubitState::from_bloch(inv * (1.0 / inv.norm())).unwrap();
        assert!(res.log_likelihood >= log_likelihood(&c, &clamped, &g));
    }

    #[test]
    fn interior_state_is_fixed_point() {
        let g = make_platonic_povm::<f64>(Solid::Octahedron);
        let r = BlochVector::new(0.2, -0.1, 0.3);
        let s = OutcomeStats::from_probs(g.born_raw(r)).unwrap();
        let (alpha, beta) = r_operator(s.probs(), r, &g);
        assert!((alpha - 1.0).abs() < 1e-14 && beta.norm() < 1e-14);
        assert!(diluted_step(r, alpha, beta, 0.5).max_abs_diff(r) < 1e-10);
        let res = mle_reconstruct(&s, &g, &MleConfig::default()).unwrap();
        assert!(res.rho_hat.bloch().max_abs_diff(r) < 1e-5);
    }

    #[test]
    fn planar_fit_has_no_y() {
        let g = make_polygon_povm::<f64>(4).unwrap();
        let res = mle_reconstruct(&counts(&[30, 40, 20, 10]), &g, &MleConfig::default()).unwrap();
        assert_eq!(res.rho_hat.bloch().y, 0.0);
        assert!(res.y_unobservable);
    }

    #[test]
    fn zero_counts_rejected() {
        assert!(OutcomeStats::<f64>::from_counts(vec![0, 0, 0]).is_err());
        let g = make_polygon_povm::<f64>(3).unwrap();
        assert!(mle_reconstruct(&counts(&[1, 2]), &g, &MleConfig::default()).is_err());
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let g = make_polygon_povm::<f64>(3).unwrap();
        let cfg = MleConfig {
            max_iter: 3,
            ..MleConfig::default()
        };
        let res = mle_reconstruct(&counts(&[0, 500, 500]), &g, &cfg).unwrap();
        assert!(!res.converged);
        assert_eq!(res.iterations, 3);
    }

    #[test]
    fn octahedron_counts_certified_by_oracle() {
        let g = make_platonic_povm::<f64>(Solid::Octahedron);
        let u = BlochVector::new(1.0, 1.0, 1.0) * (1.0 / 3f64.sqrt());
        let r = u * 0.8;
        let c: Vec<u64> = g
            .born_raw(r)
            .iter()
            .map(|p| (p * 1e7).round() as u64)
            .collect();
        let cert = certify_from_counts_with(
            &OutcomeStats::from_counts(c).unwrap(),
            &g,
            Some(u),
            &MleConfig::default(),
            &OracleConfig::default(),
        )
        .unwrap();
        assert_eq!(cert.report.method, crate::analytic::CertMethod::Oracle);
        let exact = certify_state(r, &g, &OracleConfig::default()).unwrap();
        assert!((cert.report.hmin_sdi - exact.hmin_sdi).abs() < 1e-4);
        assert!((cert.theory.unwrap().hmin_sdi - 1.9274).abs() < 1e-4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn likelihood_monotone_and_iterates_physical(
            c in prop::collection::vec(0u64..2000, 3..9),
            solid in any::<bool>(),
        ) {
            prop_assume!(c.iter().sum::<u64>() > 0);
            let g = if solid && c.len() == 6 {
                make_platonic_povm::<f64>(Solid::Octahedron)
            } else {
                make_polygon_povm::<f64>(c.len()).unwrap()
            };
            let res = mle_reconstruct(&OutcomeStats::from_counts(c).unwrap(), &g, &MleConfig::default()).unwrap();
            for w in res.history.windows(2) {
                prop_assert!(w[1] >= w[0]);
            }
            let (lo, _) = res.rho_hat.eigenvalues();
            prop_assert!(lo >= -1e-12);
            prop_assert!((res.rho_hat.trace() - 1.0).abs() <= 1e-12);
        }
    }
}
