//! Stale-read (inconsistency) probability of expanding partial quorums.
//!
//! A read issued t time units after a write completed returns stale data
//! when every one of its R fastest responders answers before receiving that
//! write. Three evaluation routes are provided, in decreasing order of
//! specificity:
//!
//! * [`closed_form_pt`]: exact closed forms for N = 3 and
//!   (W, R) ∈ {(1,1), (2,1), (1,2)};
//! * [`analytic_general_pt`]: general-N evaluation for R ∈ {1, 2} built on
//!   the read-time quorum-size distribution;
//! * [`worst_case_bound`]: the non-expanding-quorum upper bound
//!   C(N−W, R)/C(N, R).
//!
//! The R = 2 evaluators treat the two read responders' staleness
//! conditionals as independent of the quorum-size distribution (a product of
//! expectations rather than a joint expectation). The event-level simulator
//! in [`crate::sim`] does not make that simplification and is the reference
//! for R ≥ 2; see the acceptance suite for the measured difference.

use crate::dist::Rate;
use crate::error::{Error, Result};
use crate::kahan::NeumaierSum;
use crate::quorum::{binomial, quorum_size_at_read_pmf, quorum_size_pmf, QuorumSizePmf, QuorumSpec};

/// Write/read delay distributions: exponential rates with optional
/// deterministic shifts. Shifted models are accepted by the simulator only;
/// every analytic operation rejects them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayModel {
    write_rate: Rate,
    read_rate: Rate,
    write_shift: f64,
    read_shift: f64,
}

impl DelayModel {
    pub fn new(write_rate: Rate, read_rate: Rate) -> Self {
        Self {
            write_rate,
            read_rate,
            write_shift: 0.0,
            read_shift: 0.0,
        }
    }

    pub fn with_shifts(
        write_rate: Rate,
        read_rate: Rate,
        write_shift: f64,
        read_shift: f64,
    ) -> Result<Self> {
        for shift in [write_shift, read_shift] {
            if !shift.is_finite() || shift < 0.0 {
                return Err(Error::InvalidShift(shift));
            }
        }
        Ok(Self {
            write_rate,
            read_rate,
            write_shift,
            read_shift,
        })
    }

    pub fn write_rate(&self) -> Rate {
        self.write_rate
    }

    pub fn read_rate(&self) -> Rate {
        self.read_rate
    }

    pub fn write_shift(&self) -> f64 {
        self.write_shift
    }

    pub fn read_shift(&self) -> f64 {
        self.read_shift
    }

    pub fn is_shifted(&self) -> bool {
        self.write_shift > 0.0 || self.read_shift > 0.0
    }

    pub(crate) fn require_unshifted(&self) -> Result<()> {
        if self.is_shifted() {
            return Err(Error::ShiftedDelaysUnsupported);
        }
        Ok(())
    }
}

/// How a staleness probability was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ClosedForm,
    AnalyticGeneral,
    WorstCaseBound,
    MonteCarlo,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ClosedForm => "closed_form",
            Method::AnalyticGeneral => "analytic_general",
            Method::WorstCaseBound => "worst_case_bound",
            Method::MonteCarlo => "monte_carlo",
        }
    }
}

/// A staleness probability together with its provenance. The confidence
/// halfwidth and trial count are present exactly when the estimate came from
/// the simulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StalenessEstimate {
    probability: f64,
    method: Method,
    ci_halfwidth: Option<f64>,
    trials: Option<u64>,
}

impl StalenessEstimate {
    pub(crate) fn analytic(probability: f64, method: Method) -> Self {
        debug_assert!((0.0..=1.0).contains(&probability));
        Self {
            probability,
            method,
            ci_halfwidth: None,
            trials: None,
        }
    }

    pub(crate) fn monte_carlo(probability: f64, ci_halfwidth: f64, trials: u64) -> Self {
        Self {
            probability,
            method: Method::MonteCarlo,
            ci_halfwidth: Some(ci_halfwidth),
            trials: Some(trials),
        }
    }

    /// Wraps a simulation outcome as an estimate with Monte Carlo provenance.
    pub fn from_simulation(result: &crate::sim::SimResult) -> Self {
        Self::monte_carlo(result.estimate, result.ci95_halfwidth, result.trials)
    }

    pub fn probability(&self) -> f64 {
        self.probability
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn ci_halfwidth(&self) -> Option<f64> {
        self.ci_halfwidth
    }

    pub fn trials(&self) -> Option<u64> {
        self.trials
    }
}

/// Worst-case inconsistency probability for non-expanding quorums and
/// instantaneous reads: C(N−W, R)/C(N, R), the chance that R uniformly
/// chosen responders all miss the original W-replica write set. Zero for
/// strict quorums.
pub fn worst_case_bound(spec: &QuorumSpec) -> StalenessEstimate {
    StalenessEstimate::analytic(outside_fraction(spec.n(), spec.w(), spec.r()), Method::WorstCaseBound)
}

/// Probability that `r` distinct uniformly chosen replicas all lie outside a
/// fixed set of `s` replicas: C(n−s, r)/C(n, r), evaluated as a stable
/// product so it stays exact for any replica count.
fn outside_fraction(n: u32, s: u32, r: u32) -> f64 {
    if r > n - s {
        return 0.0;
    }
    let mut value = 1.0;
    for k in 0..r {
        value *= f64::from(n - s - k) / f64::from(n - k);
    }
    value
}

fn check_time(t: f64) -> Result<()> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidTime(t));
    }
    Ok(())
}

/// Exact closed forms for three-way replication.
///
/// With λ the write rate and ξ the read rate:
///
/// * W=1, R=1: p_t = 2ξe^(−λt)/(λ+3ξ)
/// * W=2, R=1: p_t = ξe^(−λt)/(λ+3ξ)
/// * W=1, R=2: p_t = 6ξ³e^(−2λt)/((λ+2ξ)(λ+3ξ)) ·
///   (2λ/((λ+2ξ)(λ+3ξ)) − (λ−ξ)e^(−λt)/((λ+ξ)(2λ+3ξ)))
pub fn closed_form_pt(spec: &QuorumSpec, delays: &DelayModel, t: f64) -> Result<StalenessEstimate> {
    check_time(t)?;
    delays.require_unshifted()?;
    let (n, w, r) = (spec.n(), spec.w(), spec.r());
    if n != 3 {
        return Err(Error::ClosedFormUnsupported { n, w, r });
    }
    let lambda = delays.write_rate().value();
    let xi = delays.read_rate().value();
    let decay = (-lambda * t).exp();
    let p = match (w, r) {
        // Shared base keeps the factor-of-two relation between the two
        // R = 1 cases bit-exact.
        (1, 1) => 2.0 * (xi * decay / (lambda + 3.0 * xi)),
        (2, 1) => xi * decay / (lambda + 3.0 * xi),
        (1, 2) => {
            let lead = 6.0 * xi.powi(3) * decay * decay / ((lambda + 2.0 * xi) * (lambda + 3.0 * xi));
            let inner = 2.0 * lambda / ((lambda + 2.0 * xi) * (lambda + 3.0 * xi))
                - (lambda - xi) * decay / ((lambda + xi) * (2.0 * lambda + 3.0 * xi));
            lead * inner
        }
        _ => return Err(Error::ClosedFormUnsupported { n, w, r }),
    };
    Ok(StalenessEstimate::analytic(p, Method::ClosedForm))
}

/// Expected staleness weight Σ_s weight(s)·Pr[S = s].
fn expect_over(pmf: &QuorumSizePmf, weight: impl Fn(u32) -> f64) -> f64 {
    let mut sum = NeumaierSum::new();
    for (s, p) in pmf.support() {
        sum.add(weight(s) * p);
    }
    sum.total()
}

/// General-N analytic staleness probability for R ∈ {1, 2}.
///
/// For R = 1 the read is stale exactly when its fastest responder falls
/// outside the write set at response time:
/// p_t = Σ_s (1 − s/N)·Pr[S(t+Z₍₁₎) = s].
///
/// For R = 2 the probability decomposes over whether the first responder is
/// outside the write set at the second response time, or joined it between
/// the two responses:
///
///   p_t = Pr[r₂ out | r₁ out]·Pr[r₁ out at Z₍₂₎]
///       + Pr[r₂ out | r₁ in]·(Pr[r₁ in at Z₍₂₎] − Pr[r₁ in at Z₍₁₎])
///
/// with the conditionals taken as Σ_s (1 − s/(N−1))·Pr[S(t+Z₍₂₎) = s] and
/// Σ_s (1 − (s−1)/(N−1))·Pr[S(t+Z₍₂₎) = s]. Both conditionals are averaged
/// against the unconditional size distribution. That choice makes this
/// route reproduce [`closed_form_pt`] at N = 3, but the event-level model
/// does not factor this way; prefer [`crate::sim`] when R = 2 accuracy
/// against simulation matters.
///
/// Strict quorums return exactly zero for any replica count.
pub fn analytic_general_pt(
    spec: &QuorumSpec,
    delays: &DelayModel,
    t: f64,
) -> Result<StalenessEstimate> {
    check_time(t)?;
    delays.require_unshifted()?;
    if spec.is_strict() {
        return Ok(StalenessEstimate::analytic(0.0, Method::AnalyticGeneral));
    }
    spec.check_analytic_size()?;
    let n = f64::from(spec.n());
    let p = match spec.r() {
        1 => {
            let pmf = quorum_size_at_read_pmf(spec, delays, t, 1)?;
            expect_over(&pmf, |s| 1.0 - f64::from(s) / n)
        }
        2 => {
            let first = quorum_size_at_read_pmf(spec, delays, t, 1)?;
            let second = quorum_size_at_read_pmf(spec, delays, t, 2)?;
            let others = n - 1.0;
            // Both responders outside the write set at the second response:
            // the size-N term is impossible given one responder outside.
            let cond_both_out = expect_over(&second, |s| {
                if s == spec.n() {
                    0.0
                } else {
                    1.0 - f64::from(s) / others
                }
            });
            let first_out = expect_over(&second, |s| 1.0 - f64::from(s) / n);
            // Second responder outside given the first joined the write set
            // between the two responses; requires the set to have grown past W.
            let cond_second_out = expect_over(&second, |s| {
                if s == spec.w() {
                    0.0
                } else {
                    1.0 - (f64::from(s) - 1.0) / others
                }
            });
            let joined_between = ((second.mean() - first.mean()) / n).max(0.0);
            cond_both_out * first_out + cond_second_out * joined_between
        }
        r => return Err(Error::AnalyticUnsupported { r }),
    };
    Ok(StalenessEstimate::analytic(p.clamp(0.0, 1.0), Method::AnalyticGeneral))
}

/// Staleness probability in the instantaneous-read limit (read rate → ∞):
/// all R responders observe the write set as it stands at offset t, so
/// p = Σ_s C(N−s, R)/C(N, R) · Pr[S(t) = s]. At t = 0 this reduces to
/// [`worst_case_bound`].
pub fn instantaneous_read_limit(
    spec: &QuorumSpec,
    lambda: Rate,
    t: f64,
) -> Result<StalenessEstimate> {
    check_time(t)?;
    if spec.is_strict() {
        return Ok(StalenessEstimate::analytic(0.0, Method::AnalyticGeneral));
    }
    spec.check_analytic_size()?;
    if spec.r() > 2 {
        return Err(Error::AnalyticUnsupported { r: spec.r() });
    }
    let pmf = quorum_size_pmf(spec, lambda, t)?;
    let (n, r) = (spec.n(), spec.r());
    let total = binomial(n, r);
    let p = expect_over(&pmf, |s| binomial(n - s, r) / total);
    Ok(StalenessEstimate::analytic(p.clamp(0.0, 1.0), Method::AnalyticGeneral))
}
