//! Seedable Monte Carlo simulation of write propagation and quorum reads.
//!
//! Each trial draws the full vector of write and read delays, finds the
//! write-completion time X₍W₎ and the R fastest read responders, and checks
//! whether every responder replied before receiving the write. This is the
//! event-level reference that every analytic evaluator in the crate is
//! measured against, and the only evaluator for R ≥ 3, N beyond the analytic
//! range, and shifted delay models.
//!
//! # Reproducibility
//!
//! Trial i draws from a ChaCha8 generator keyed with the little-endian bytes
//! of `seed` in the first eight key bytes and of `i` in the next eight.
//! Exponentials are inverted as `shift − ln(1 − U)/rate` with U uniform on
//! [0, 1), the write delays drawn before the read delays. Because the random
//! stream is a function of the trial index alone, results are bit-identical
//! for any chunk count or thread count, and independent implementations can
//! reproduce them from this description.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quorum::{QuorumSizePmf, QuorumSpec};
use crate::staleness::DelayModel;

/// 97.5% standard-normal quantile, for 95% confidence intervals.
const Z_95: f64 = 1.959963984540054;

/// Trials per work unit in the internally parallelized estimators.
const BLOCK_TRIALS: u64 = 1 << 16;

/// A complete simulation request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    spec: QuorumSpec,
    delays: DelayModel,
    t: f64,
    trials: u64,
    seed: u64,
    chunks: u64,
}

impl SimConfig {
    pub fn new(spec: QuorumSpec, delays: DelayModel, t: f64, trials: u64, seed: u64) -> Result<Self> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidTime(t));
        }
        if trials < 1 {
            return Err(Error::InvalidTrials);
        }
        Ok(Self {
            spec,
            delays,
            t,
            trials,
            seed,
            chunks: 1,
        })
    }

    /// Sets the parallelism granularity. Chunking affects scheduling only,
    /// never the estimate.
    pub fn with_chunks(mut self, chunks: u64) -> Result<Self> {
        if chunks < 1 || chunks > self.trials {
            return Err(Error::InvalidChunks {
                chunks,
                trials: self.trials,
            });
        }
        self.chunks = chunks;
        Ok(self)
    }

    pub fn spec(&self) -> QuorumSpec {
        self.spec
    }

    pub fn delays(&self) -> DelayModel {
        self.delays
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn chunks(&self) -> u64 {
        self.chunks
    }
}

/// Outcome of a simulation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimResult {
    pub estimate: f64,
    pub stale_count: u64,
    pub trials: u64,
    pub ci95_halfwidth: f64,
    pub seed: u64,
}

/// Halfwidth of the 95% Wilson score interval for `successes` out of
/// `trials`. Chosen over the normal approximation for sane behaviour when
/// the estimate sits near 0 or 1.
pub fn wilson_halfwidth(successes: u64, trials: u64) -> f64 {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z_95 * Z_95;
    Z_95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n)
}

/// Upper end of the 95% Wilson score interval.
pub fn wilson_upper(successes: u64, trials: u64) -> f64 {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z_95 * Z_95;
    let center = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    (center + wilson_halfwidth(successes, trials)).min(1.0)
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&trial.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

fn sample_exp<R: Rng + ?Sized>(rng: &mut R, rate: f64, shift: f64) -> f64 {
    let u: f64 = rng.random();
    shift - (1.0 - u).ln() / rate
}

struct TrialScratch {
    writes: Vec<f64>,
    order: Vec<f64>,
    readers: Vec<(f64, u32)>,
}

impl TrialScratch {
    fn new(n: usize) -> Self {
        Self {
            writes: Vec::with_capacity(n),
            order: Vec::with_capacity(n),
            readers: Vec::with_capacity(n),
        }
    }

    /// One staleness trial: true iff every one of the R fastest readers
    /// replied before receiving the write, i.e. X₍W₎ + t + Z_i < X_i for
    /// each of them. Strict quorums and W = N can never satisfy this (some
    /// fast reader is among the first W write recipients), so no special
    /// casing is needed.
    fn staleness<R: Rng + ?Sized>(
        &mut self,
        spec: QuorumSpec,
        delays: &DelayModel,
        t: f64,
        rng: &mut R,
    ) -> bool {
        let n = spec.n() as usize;
        let (w, r) = (spec.w() as usize, spec.r() as usize);
        let lambda = delays.write_rate().value();
        let xi = delays.read_rate().value();

        self.writes.clear();
        for _ in 0..n {
            self.writes.push(sample_exp(rng, lambda, delays.write_shift()));
        }
        self.readers.clear();
        for i in 0..n {
            self.readers.push((sample_exp(rng, xi, delays.read_shift()), i as u32));
        }

        self.order.clear();
        self.order.extend_from_slice(&self.writes);
        self.order.select_nth_unstable_by(w - 1, f64::total_cmp);
        let write_done = self.order[w - 1];

        // Ties in read delays break by replica index; they have probability
        // zero but keep the selection total.
        self.readers
            .select_nth_unstable_by(r - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        self.readers[..r]
            .iter()
            .all(|&(z, i)| self.writes[i as usize] > write_done + t + z)
    }

    /// Number of replicas that received the write within t of completion.
    fn holders_count<R: Rng + ?Sized>(
        &mut self,
        n: usize,
        w: usize,
        lambda: f64,
        t: f64,
        rng: &mut R,
    ) -> usize {
        self.writes.clear();
        for _ in 0..n {
            self.writes.push(sample_exp(rng, lambda, 0.0));
        }
        self.order.clear();
        self.order.extend_from_slice(&self.writes);
        self.order.select_nth_unstable_by(w - 1, f64::total_cmp);
        let cutoff = self.order[w - 1] + t;
        self.writes.iter().filter(|&&x| x <= cutoff).count()
    }
}

/// Runs a single staleness trial against the supplied generator.
pub fn run_trial<R: Rng + ?Sized>(
    spec: &QuorumSpec,
    delays: &DelayModel,
    t: f64,
    rng: &mut R,
) -> bool {
    TrialScratch::new(spec.n() as usize).staleness(*spec, delays, t, rng)
}

fn count_stale_range(config: &SimConfig, lo: u64, hi: u64) -> u64 {
    let mut scratch = TrialScratch::new(config.spec.n() as usize);
    let mut stale = 0u64;
    for trial in lo..hi {
        let mut rng = trial_rng(config.seed, trial);
        if scratch.staleness(config.spec, &config.delays, config.t, &mut rng) {
            stale += 1;
        }
    }
    stale
}

fn chunk_ranges(total: u64, chunks: u64) -> Vec<(u64, u64)> {
    let base = total / chunks;
    let remainder = total % chunks;
    let mut ranges = Vec::with_capacity(chunks as usize);
    let mut start = 0;
    for c in 0..chunks {
        let len = base + u64::from(c < remainder);
        ranges.push((start, start + len));
        start += len;
    }
    ranges
}

/// Estimates the staleness probability by independent trials.
///
/// The result is a pure function of `(spec, delays, t, trials, seed)`;
/// chunking only controls how trial ranges are scheduled across threads.
pub fn estimate_pt(config: &SimConfig) -> SimResult {
    let stale_count = if config.chunks == 1 {
        count_stale_range(config, 0, config.trials)
    } else {
        chunk_ranges(config.trials, config.chunks)
            .into_par_iter()
            .map(|(lo, hi)| count_stale_range(config, lo, hi))
            .sum()
    };
    SimResult {
        estimate: stale_count as f64 / config.trials as f64,
        stale_count,
        trials: config.trials,
        ci95_halfwidth: wilson_halfwidth(stale_count, config.trials),
        seed: config.seed,
    }
}

/// Empirical distribution of the number of replicas holding the write t
/// time units after completion. Masses are exact trial fractions.
pub fn estimate_quorum_pmf(
    spec: &QuorumSpec,
    lambda: crate::dist::Rate,
    t: f64,
    trials: u64,
    seed: u64,
) -> Result<QuorumSizePmf> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidTime(t));
    }
    if trials < 1 {
        return Err(Error::InvalidTrials);
    }
    let n = spec.n() as usize;
    let w = spec.w() as usize;
    let support = n - w + 1;

    let count_block = |lo: u64, hi: u64| -> Vec<u64> {
        let mut scratch = TrialScratch::new(n);
        let mut counts = vec![0u64; support];
        for trial in lo..hi {
            let mut rng = trial_rng(seed, trial);
            let holders = scratch.holders_count(n, w, lambda.value(), t, &mut rng);
            counts[holders - w] += 1;
        }
        counts
    };

    let blocks = trials.div_ceil(BLOCK_TRIALS);
    let counts = (0..blocks)
        .into_par_iter()
        .map(|b| count_block(b * BLOCK_TRIALS, ((b + 1) * BLOCK_TRIALS).min(trials)))
        .reduce(
            || vec![0u64; support],
            |mut acc, block| {
                for (a, b) in acc.iter_mut().zip(block) {
                    *a += b;
                }
                acc
            },
        );

    let masses = counts.iter().map(|&c| c as f64 / trials as f64).collect();
    QuorumSizePmf::from_masses(spec.w(), masses)
}
