use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Tolerance on `Σ P_k = 1`.
pub const PROB_SUM_TOL: f64 = 1e-9;

/// Per-outcome statistics: probabilities, and the raw counts they came from
/// when available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeStats<T> {
    counts: Option<Vec<u64>>,
    probs: Vec<T>,
}

impl<T: Scalar> OutcomeStats<T> {
    /// Frequencies `P_k = N_k / Σ N`.
    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::Domain("all counts are zero".into()));
        }
        let denom = T::lit(total as f64);
        let probs = counts.iter().map(|&c| T::lit(c as f64) / denom).collect();
        Ok(Self {
            counts: Some(counts),
            probs,
        })
    }

    pub fn from_probs(probs: Vec<T>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidStats("no outcomes".into()));
        }
        let tol = T::tol(PROB_SUM_TOL);
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < -tol) {
            return Err(Error::InvalidStats(format!(
                "probability {} is negative or not finite",
                p.to_f64_lossy()
            )));
        }
        let sum: T = probs.iter().copied().sum();
        if (sum - T::one()).abs() > tol {
            return Err(Error::InvalidStats(format!(
                "probabilities sum to {}",
                sum.to_f64_lossy()
            )));
        }
        let probs = probs.into_iter().map(|p| p.max(T::zero())).collect();
        Ok(Self {
            counts: None,
            probs,
        })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn counts(&self) -> Option<&[u64]> {
        self.counts.as_deref()
    }

    pub fn total(&self) -> Option<u64> {
        self.counts.as_ref().map(|c| c.iter().sum())
    }

    pub fn max_prob(&self) -> T {
        self.probs.iter().copied().fold(T::zero(), T::max)
    }
}
