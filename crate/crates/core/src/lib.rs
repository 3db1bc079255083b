//! Staleness analysis for expanding partial-quorum replication.
//!
//! Dynamo-style key-value stores acknowledge a write after W of N replicas
//! respond and a read after R responses; with W + R ≤ N the two sets may
//! miss each other, so a read can return stale data until anti-entropy
//! catches the remaining replicas up. Under i.i.d. exponential write and
//! read delays this crate computes:
//!
//! * the distribution of the write set's size as it expands after the write
//!   completes ([`quorum`]);
//! * the probability that a read issued t time units after write completion
//!   returns stale data: closed forms for three-way replication, a
//!   general-N analytic evaluator for R ≤ 2, the non-expanding worst-case
//!   bound, and a deterministic parallel Monte Carlo estimator
//!   ([`staleness`], [`sim`]);
//! * minimal (W, R, t) configurations meeting a staleness target at the
//!   lowest expected latency ([`tune`]).
//!
//! All analytic evaluation is in double precision with compensated
//! summation, guarded so that numerical noise outside the probability range
//! raises an error instead of being clamped away silently.

pub mod dist;
mod error;
mod kahan;
pub mod quorum;
pub mod sim;
pub mod staleness;
pub mod tune;

pub use dist::{
    hypoexp_cdf, hypoexp_pdf, spacing_rate, HypoexponentialSpec, Rate, INSTABILITY_TOLERANCE,
    MAX_RATES,
};
pub use error::{Error, Result};
pub use quorum::{
    mean_quorum_size, quorum_size_at_read_pmf, quorum_size_pmf, QuorumSizePmf, QuorumSpec,
    MAX_ANALYTIC_REPLICAS,
};
pub use sim::{
    estimate_pt, estimate_quorum_pmf, run_trial, wilson_halfwidth, wilson_upper, SimConfig,
    SimResult,
};
pub use staleness::{
    analytic_general_pt, closed_form_pt, instantaneous_read_limit, worst_case_bound, DelayModel,
    Method, StalenessEstimate,
};
pub use tune::{
    expected_latency, min_visibility_delay, tune, Objective, ParetoEntry, TuningRequest,
    TuningResult,
};
