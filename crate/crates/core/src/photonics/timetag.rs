use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Uniform};

use super::{half_window_ticks, CoincidenceConfig, RunLength, SimConfig, TICK_PS};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimetagRecord {
    pub tick: u64,
    pub channel: u8,
}

impl TimetagRecord {
    pub fn new(channel: u8, tick: u64) -> Self {
        Self { tick, channel }
    }
}

/// Sorts the union of several per-channel streams by `(tick, channel)`.
pub fn merge_streams<I>(streams: I) -> Vec<TimetagRecord>
where
    I: IntoIterator<Item = Vec<TimetagRecord>>,
{
    let mut all: Vec<TimetagRecord> = streams.into_iter().flatten().collect();
    all.sort_unstable();
    all
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Pending {
    tick: u64,
    channel: u8,
    seq: u64,
    accidental: bool,
}

fn to_tick(t_ps: f64) -> u64 {
    (t_ps.max(0.0) / TICK_PS).floor() as u64
}

/// Time-ordered event stream produced by [`simulate_timetags`].
///
/// Memory use is bounded by the number of channels plus the heralds falling
/// inside one jitter span.
pub struct TimetagGenerator {
    rng: ChaCha8Rng,
    heap: BinaryHeap<Reverse<Pending>>,
    born_cdf: Vec<f64>,
    acc_rates_per_ps: Vec<f64>,
    herald_gap: Exp<f64>,
    jitter: Option<Uniform<f64>>,
    jitter_ps: f64,
    efficiency: f64,
    margin: u64,
    /// Arrival time of the next herald, if any remain.
    next_herald_ps: Option<f64>,
    heralds_left: Option<u64>,
    end_ps: f64,
    last_herald_ps: f64,
    acc_last_ps: Vec<f64>,
    seq: u64,
}

impl TimetagGenerator {
    fn new<T: Scalar>(cfg: &SimConfig<T>) -> Result<Self> {
        cfg.validate()?;
        // Offset the stream so it never coincides with simulate_counts.
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7469_6d65_7461_6773);
        let born = cfg.born();
        let mut acc = 0.0;
        let born_cdf = born
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        let rate_per_ps = cfg.pair_rate * 1e-12;
        let herald_gap = Exp::new(rate_per_ps).map_err(|e| Error::Domain(e.to_string()))?;
        let (heralds_left, end_ps) = match cfg.length {
            RunLength::Duration(d) => (None, d * 1e12),
            RunLength::Coincidences(n) => (Some(n), f64::INFINITY),
        };
        let jitter_ps = cfg.jitter_ps;
        let jitter = if jitter_ps > 0.0 {
            Some(
                Uniform::new_inclusive(-jitter_ps, jitter_ps)
                    .map_err(|e| Error::Domain(e.to_string()))?,
            )
        } else {
            None
        };
        let first = herald_gap.sample(&mut rng);
        let mut g = Self {
            rng,
            heap: BinaryHeap::new(),
            born_cdf,
            acc_rates_per_ps: cfg.channel_rates().iter().map(|r| r * 1e-12).collect(),
            herald_gap,
            jitter,
            jitter_ps,
            efficiency: cfg.herald_efficiency,
            margin: (jitter_ps / TICK_PS).ceil() as u64 + 1,
            next_herald_ps: None,
            heralds_left,
            end_ps,
            last_herald_ps: 0.0,
            acc_last_ps: vec![0.0; cfg.geometry.outcomes()],
            seq: 0,
        };
        g.next_herald_ps = g.herald_allowed(first).then_some(first);
        for c in 0..g.acc_rates_per_ps.len() {
            g.schedule_accidental(c);
        }
        Ok(g)
    }

    fn herald_allowed(&self, t: f64) -> bool {
        match self.heralds_left {
            Some(n) => n > 0,
            None => t <= self.end_ps,
        }
    }

    fn push(&mut self, tick: u64, channel: u8, accidental: bool) {
        self.seq += 1;
        self.heap.push(Reverse(Pending {
            tick,
            channel,
            seq: self.seq,
            accidental,
        }));
    }

    fn schedule_accidental(&mut self, outcome: usize) {
        let rate = self.acc_rates_per_ps[outcome];
        if rate <= 0.0 {
            return;
        }
        let t = self.acc_last_ps[outcome]
            + Exp::new(rate).expect("positive rate").sample(&mut self.rng);
        self.acc_last_ps[outcome] = t;
        if t <= self.end_ps {
            self.push(to_tick(t), outcome as u8 + 1, true);
        }
    }

    fn emit_herald(&mut self, t: f64) {
        self.last_herald_ps = t;
        self.push(to_tick(t), 0, false);
        if self.rng.random::<f64>() < self.efficiency {
            let u: f64 = self.rng.random();
            let k = self
                .born_cdf
                .iter()
                .position(|c| u < *c)
                .unwrap_or(self.born_cdf.len() - 1);
            let dt = match &self.jitter {
                Some(j) => j.sample(&mut self.rng),
                None => 0.0,
            };
            self.push(to_tick(t + dt), k as u8 + 1, false);
        }
        if let Some(n) = self.heralds_left.as_mut() {
            *n -= 1;
        }
        let next = t + self.herald_gap.sample(&mut self.rng);
        self.next_herald_ps = self.herald_allowed(next).then_some(next);
        if self.next_herald_ps.is_none() && self.heralds_left.is_some() {
            self.end_ps = self.last_herald_ps + self.jitter_ps + TICK_PS;
        }
    }
}

impl Iterator for TimetagGenerator {
    type Item = TimetagRecord;

    fn next(&mut self) -> Option<TimetagRecord> {
        loop {
            if let Some(th) = self.next_herald_ps {
                let ht = to_tick(th);
                let ready =
                    matches!(self.heap.peek(), Some(Reverse(p)) if p.tick + self.margin < ht);
                if !ready {
                    self.emit_herald(th);
                    continue;
                }
            }
            let Reverse(p) = self.heap.pop()?;
            if p.accidental {
                if p.tick > to_tick(self.end_ps) {
                    continue;
                }
                self.schedule_accidental(p.channel as usize - 1);
            }
            return Some(TimetagRecord::new(p.channel, p.tick));
        }
    }
}

/// Streams a heralded-photon run: heralds on channel 0 form a Poisson
/// process, each partner lands on a Born-sampled detector channel with
/// uniform delay jitter, and every detector channel carries independent
/// Poisson accidentals. Records come out sorted by `(tick, channel)`.
pub fn simulate_timetags<T: Scalar>(cfg: &SimConfig<T>) -> Result<TimetagGenerator> {
    TimetagGenerator::new(cfg)
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    tick: u64,
    channel: u8,
    /// Tick of the herald this event is matched to.
    owner: Option<u64>,
}

/// Streaming herald/detector matcher.
///
/// Each herald takes the nearest free detector event within the closed
/// window `[h − H, h + H]`; ties go to the earlier tick, then the lower
/// channel. Heralds are served in time order and each detector event is
/// consumed at most once. A herald whose window holds only taken events
/// may claim one of them when the earlier herald can be rematched inside
/// its own window, so overlapping heralds never lose a partner to
/// matching order. Input must be sorted by tick.
#[derive(Debug, Clone)]
pub struct CoincidenceCounter {
    half: u64,
    herald: u8,
    outcomes: usize,
    counts: Vec<u64>,
    heralds: VecDeque<u64>,
    detections: VecDeque<Slot>,
    last_tick: u64,
    index: u64,
    herald_total: u64,
}

impl CoincidenceCounter {
    pub fn new(cfg: &CoincidenceConfig, outcomes: usize) -> Result<Self> {
        cfg.validate()?;
        if outcomes == 0 || outcomes > 255 || cfg.herald_channel as usize > outcomes {
            return Err(Error::Domain(format!(
                "herald channel {} incompatible with {outcomes} outcomes",
                cfg.herald_channel
            )));
        }
        Ok(Self {
            half: half_window_ticks(cfg.window_ps),
            herald: cfg.herald_channel,
            outcomes,
            counts: vec![0; outcomes],
            heralds: VecDeque::new(),
            detections: VecDeque::new(),
            last_tick: 0,
            index: 0,
            herald_total: 0,
        })
    }

    pub fn half_window_ticks(&self) -> u64 {
        self.half
    }

    fn outcome_of(&self, channel: u8) -> usize {
        if channel < self.herald {
            channel as usize
        } else {
            channel as usize - 1
        }
    }

    pub fn push(&mut self, rec: TimetagRecord) -> Result<()> {
        let idx = self.index;
        self.index += 1;
        if rec.channel as usize > self.outcomes {
            return Err(Error::Timetag {
                index: idx,
                reason: format!("unknown channel {}", rec.channel),
            });
        }
        if rec.tick < self.last_tick {
            return Err(Error::Timetag {
                index: idx,
                reason: format!("tick {} precedes {}", rec.tick, self.last_tick),
            });
        }
        self.last_tick = rec.tick;
        while let Some(&h) = self.heralds.front() {
            if h.saturating_add(self.half) >= rec.tick {
                break;
            }
            self.heralds.pop_front();
            self.resolve(h);
        }
        // Keep what earlier heralds may still be rematched to.
        let reach = self.half.saturating_mul(4);
        let floor = self
            .heralds
            .front()
            .copied()
            .unwrap_or(rec.tick)
            .saturating_sub(reach);
        while matches!(self.detections.front(), Some(s) if s.tick < floor) {
            self.detections.pop_front();
        }
        if rec.channel == self.herald {
            self.heralds.push_back(rec.tick);
            self.herald_total += 1;
        } else {
            self.detections.push_back(Slot {
                tick: rec.tick,
                channel: rec.channel,
                owner: None,
            });
        }
        Ok(())
    }

    /// Slot indices inside the window of herald `h`, nearest first.
    fn window(&self, h: u64) -> Vec<usize> {
        let lo = h.saturating_sub(self.half);
        let hi = h.saturating_add(self.half);
        let mut idx: Vec<usize> = self
            .detections
            .iter()
            .enumerate()
            .take_while(|(_, s)| s.tick <= hi)
            .filter(|(_, s)| s.tick >= lo)
            .map(|(i, _)| i)
            .collect();
        idx.sort_by_key(|&i| {
            let s = &self.detections[i];
            (s.tick.abs_diff(h), s.tick, s.channel)
        });
        idx
    }

    fn assign(&mut self, slot: usize, h: u64) {
        self.detections[slot].owner = Some(h);
        let k = self.outcome_of(self.detections[slot].channel);
        self.counts[k] += 1;
    }

    /// Moves the owner of `slot` to another event in its window.
    fn release(&mut self, slot: usize, visited: &mut Vec<usize>) -> bool {
        let owner = self.detections[slot].owner.expect("taken slot");
        for j in self.window(owner) {
            if j == slot || visited.contains(&j) {
                continue;
            }
            visited.push(j);
            if self.detections[j].owner.is_none() || self.release(j, visited) {
                let k = self.outcome_of(self.detections[slot].channel);
                self.counts[k] -= 1;
                self.detections[slot].owner = None;
                self.assign(j, owner);
                return true;
            }
        }
        false
    }

    fn resolve(&mut self, h: u64) {
        let cands = self.window(h);
        if let Some(&i) = cands.iter().find(|&&i| self.detections[i].owner.is_none()) {
            self.assign(i, h);
            return;
        }
        let mut visited = Vec::new();
        for i in cands {
            visited.push(i);
            if self.release(i, &mut visited) {
                self.assign(i, h);
                return;
            }
        }
    }

    /// Resolves the remaining heralds and returns counts per outcome.
    pub fn finish(mut self) -> Vec<u64> {
        while let Some(h) = self.heralds.pop_front() {
            self.resolve(h);
        }
        self.counts
    }

    pub fn heralds_seen(&self) -> u64 {
        self.herald_total
    }
}

/// Counts heralded coincidences per outcome over a tick-sorted stream.
pub fn count_coincidences<I>(
    stream: I,
    cfg: &CoincidenceConfig,
    outcomes: usize,
) -> Result<Vec<u64>>
where
    I: IntoIterator<Item = TimetagRecord>,
{
    let mut c = CoincidenceCounter::new(cfg, outcomes)?;
    for r in stream {
        c.push(r)?;
    }
    Ok(c.finish())
}
