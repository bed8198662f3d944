//! Heralded single-photon measurement simulator and timetag ingestion.
//!
//! Channel 0 carries the herald by default; detector channel `c ≥ 1`
//! records outcome `c − 1`. Times are integer ticks of [`TICK_PS`].

mod io;
mod timetag;

pub use io::{
    read_counts_csv, read_timetags, write_counts_csv, write_timetags, TimetagFormat, TimetagReader,
    BINARY_RECORD_LEN,
};
pub use timetag::{
    count_coincidences, merge_streams, simulate_timetags, CoincidenceCounter, TimetagGenerator,
    TimetagRecord,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};

use crate::bloch::QubitState;
use crate::error::{Error, Result};
use crate::geometry::PovmGeometry;
use crate::scalar::Scalar;
use crate::stats::OutcomeStats;

/// Timetagger resolution in picoseconds.
pub const TICK_PS: f64 = 81.0;

/// Largest herald/detector tick separation inside a window of total width
/// `window_ps` centred on the herald (closed interval).
pub fn half_window_ticks(window_ps: f64) -> u64 {
    (window_ps / 2.0 / TICK_PS + 1e-9).floor() as u64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoincidenceConfig {
    /// Total window width, centred on the herald.
    pub window_ps: f64,
    pub herald_channel: u8,
}

impl Default for CoincidenceConfig {
    fn default() -> Self {
        Self {
            window_ps: 1000.0,
            herald_channel: 0,
        }
    }
}

impl CoincidenceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_ps > 0.0 && self.window_ps.is_finite()) {
            return Err(Error::Domain(format!(
                "coincidence window {} ps must be positive",
                self.window_ps
            )));
        }
        Ok(())
    }
}

/// How long a simulated run lasts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunLength {
    /// Acquisition time in seconds; the herald count is Poisson.
    Duration(f64),
    /// Exactly `n` heralds over `n / pair_rate` seconds; with unit efficiency
    /// every herald yields one coincidence.
    Coincidences(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig<T> {
    pub true_state: QubitState<T>,
    pub geometry: PovmGeometry<T>,
    /// Heralded pair rate in Hz.
    pub pair_rate: f64,
    pub length: RunLength,
    /// Uncorrelated detector rate in Hz, shared by all detector channels.
    pub accidental_rate: f64,
    /// Per-channel override of `accidental_rate`, one entry per outcome.
    pub accidental_rates: Option<Vec<f64>>,
    /// Probability that a herald's partner photon is detected at all.
    pub herald_efficiency: f64,
    /// Uniform partner delay jitter, ± this many picoseconds.
    pub jitter_ps: f64,
    /// Window assumed by the count-level accidental model.
    pub window_ps: f64,
    pub seed: u64,
}

impl<T: Scalar> SimConfig<T> {
    /// Defaults: 10 kHz pairs, 10⁷ heralds, no accidentals, ±250 ps jitter.
    pub fn new(true_state: QubitState<T>, geometry: PovmGeometry<T>, seed: u64) -> Self {
        Self {
            true_state,
            geometry,
            pair_rate: 1e4,
            length: RunLength::Coincidences(10_000_000),
            accidental_rate: 0.0,
            accidental_rates: None,
            herald_efficiency: 1.0,
            jitter_ps: 250.0,
            window_ps: 1000.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !(self.pair_rate > 0.0 && self.pair_rate.is_finite()) {
            return Err(Error::Domain("pair rate must be positive".into()));
        }
        if !finite_nonneg(self.accidental_rate) || !finite_nonneg(self.jitter_ps) {
            return Err(Error::Domain(
                "rates and jitter must be non-negative".into(),
            ));
        }
        if let Some(r) = &self.accidental_rates {
            if r.len() != self.geometry.outcomes() || !r.iter().all(|v| finite_nonneg(*v)) {
                return Err(Error::Domain(format!(
                    "need {} non-negative per-channel accidental rates",
                    self.geometry.outcomes()
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.herald_efficiency) {
            return Err(Error::Domain("herald efficiency outside [0, 1]".into()));
        }
        if !(self.window_ps > 0.0) {
            return Err(Error::Domain("window must be positive".into()));
        }
        if self.geometry.outcomes() > 254 {
            return Err(Error::Domain("at most 254 detector channels".into()));
        }
        if let RunLength::Duration(d) = self.length {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::Domain("duration must be non-negative".into()));
            }
        }
        Ok(())
    }

    pub fn channel_rates(&self) -> Vec<f64> {
        self.accidental_rates
            .clone()
            .unwrap_or_else(|| vec![self.accidental_rate; self.geometry.outcomes()])
    }

    pub fn duration_s(&self) -> f64 {
        match self.length {
            RunLength::Duration(d) => d,
            RunLength::Coincidences(n) => n as f64 / self.pair_rate,
        }
    }

    pub fn born(&self) -> Vec<f64> {
        let p: Vec<f64> = self
            .geometry
            .born_raw(self.true_state.bloch())
            .iter()
            .map(|v| v.to_f64_lossy())
            .collect();
        let s: f64 = p.iter().sum();
        p.iter().map(|v| v / s).collect()
    }
}

/// Multinomial draw by sequential conditional binomials.
pub(crate) fn multinomial<R: Rng>(rng: &mut R, n: u64, probs: &[f64]) -> Vec<u64> {
    let mut out = vec![0u64; probs.len()];
    let mut left = n;
    let mut mass: f64 = probs.iter().sum();
    for (k, p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if k + 1 == probs.len() || mass <= 0.0 {
            out[k] = left;
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let draw = Binomial::new(left, q).expect("valid binomial").sample(rng);
        out[k] = draw;
        left -= draw;
        mass -= p;
    }
    out
}

fn binomial<R: Rng>(rng: &mut R, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        0
    } else if p >= 1.0 {
        n
    } else {
        Binomial::new(n, p).expect("valid binomial").sample(rng)
    }
}

/// Count-level model of what [`count_coincidences`] reports for a stream from
/// [`simulate_timetags`] with the same configuration.
///
/// Detected partners follow the Born rule. A partner at offset `j` loses to
/// an accidental that lands closer to the herald; averaged over the uniform
/// jitter this happens with probability `1 − (1 − e^{−2λJ}) / (2λJ)`.
/// Heralds without a partner pick up an accidental inside the window with
/// probability `1 − e^{−λW}`. Accidentals land on channels in proportion to
/// their rates.
pub fn simulate_counts<T: Scalar>(cfg: &SimConfig<T>) -> Result<OutcomeStats<T>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let heralds = match cfg.length {
        RunLength::Coincidences(n) => n,
        RunLength::Duration(d) => {
            let mean = cfg.pair_rate * d;
            if mean > 0.0 {
                Poisson::new(mean).expect("valid mean").sample(&mut rng) as u64
            } else {
                0
            }
        }
    };
    let rates = cfg.channel_rates();
    let lambda: f64 = rates.iter().sum::<f64>() * 1e-12; // per ps
    let pairs = binomial(&mut rng, heralds, cfg.herald_efficiency);
    let j = cfg.jitter_ps;
    let p_replace = if lambda > 0.0 && j > 0.0 {
        let x = 2.0 * lambda * j;
        1.0 - (-x).exp_m1() / -x
    } else {
        0.0
    };
    let replaced = binomial(&mut rng, pairs, p_replace);
    let w_eff = (2 * half_window_ticks(cfg.window_ps) + 1) as f64 * TICK_PS;
    let unpaired_hits = binomial(&mut rng, heralds - pairs, -(-lambda * w_eff).exp_m1());
    let mut counts = multinomial(&mut rng, pairs - replaced, &cfg.born());
    if lambda > 0.0 {
        let acc = multinomial(&mut rng, replaced + unpaired_hits, &rates);
        for (c, a) in counts.iter_mut().zip(acc) {
            *c += a;
        }
    }
    OutcomeStats::from_counts(counts)
}
