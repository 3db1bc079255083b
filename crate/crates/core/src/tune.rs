//! Quorum-size and visibility-delay tuning.
//!
//! Enumerates (W, R) configurations, finds the smallest post-write delay
//! that meets a target staleness bound for each, and returns the Pareto
//! frontier over expected write latency, expected read latency and that
//! delay.

use crate::dist::Rate;
use crate::error::{Error, Result};
use crate::quorum::{QuorumSpec, MAX_ANALYTIC_REPLICAS};
use crate::sim::{estimate_pt, wilson_upper, SimConfig};
use crate::staleness::{
    analytic_general_pt, closed_form_pt, DelayModel, Method, StalenessEstimate,
};

/// Bisection tolerance on the returned visibility delay.
const DELAY_TOLERANCE: f64 = 1e-6;

/// Search cap for the doubling phase, in units of 1/λ.
const SEARCH_CAP: f64 = 1e3;

/// Trials per probability evaluation on the simulator route.
const SIM_ROUTE_TRIALS: u64 = 100_000;

/// Mixing constant for per-configuration simulation seeds.
const SIM_ROUTE_SEED: u64 = 0x51_7c_c1_b7_27_22_0a_95;

/// What the tuner minimizes when ordering the frontier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    MinReadLatency,
    MinWriteLatency,
    MinSum,
}

impl Objective {
    pub fn as_str(self) -> &'static str {
        match self {
            Objective::MinReadLatency => "min_read_latency",
            Objective::MinWriteLatency => "min_write_latency",
            Objective::MinSum => "min_sum",
        }
    }
}

/// A tuning problem: replica count, delay model, staleness target ε, an
/// optional cap on the acceptable visibility delay, and the ordering
/// objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningRequest {
    n: u32,
    delays: DelayModel,
    epsilon: f64,
    t_max: Option<f64>,
    objective: Objective,
}

impl TuningRequest {
    pub fn new(n: u32, delays: DelayModel, epsilon: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidReplicaCount { n });
        }
        check_epsilon(epsilon)?;
        Ok(Self {
            n,
            delays,
            epsilon,
            t_max: None,
            objective: Objective::MinSum,
        })
    }

    pub fn with_t_max(mut self, t_max: f64) -> Result<Self> {
        if !t_max.is_finite() || t_max < 0.0 {
            return Err(Error::InvalidTime(t_max));
        }
        self.t_max = Some(t_max);
        Ok(self)
    }

    pub fn with_objective(mut self, objective: Objective) -> Self {
        self.objective = objective;
        self
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn delays(&self) -> DelayModel {
        self.delays
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn t_max(&self) -> Option<f64> {
        self.t_max
    }

    pub fn objective(&self) -> Objective {
        self.objective
    }
}

/// One feasible configuration on the frontier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParetoEntry {
    pub w: u32,
    pub r: u32,
    pub t_min: f64,
    pub p_at_t: f64,
    pub expected_write_latency: f64,
    pub expected_read_latency: f64,
    pub method: Method,
}

/// Pareto-optimal configurations, sorted by the requested objective.
#[derive(Debug, Clone, PartialEq)]
pub struct TuningResult {
    pub pareto: Vec<ParetoEntry>,
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !epsilon.is_finite() || epsilon <= 0.0 || epsilon > 1.0 {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    Ok(())
}

/// Expected time for `quorum_size` of `n` exponential responses: the k-th
/// order statistic of n i.i.d. exponentials has mean (1/rate)·Σ_{i=n−k+1}^n 1/i.
///
/// # Panics
/// If `quorum_size` is outside 1..=n.
pub fn expected_latency(n: u32, quorum_size: u32, rate: Rate) -> f64 {
    assert!(
        quorum_size >= 1 && quorum_size <= n,
        "quorum size must satisfy 1 <= k <= n, got k={quorum_size}, n={n}"
    );
    let harmonic: f64 = ((n - quorum_size + 1)..=n).map(|i| 1.0 / f64::from(i)).sum();
    harmonic / rate.value()
}

/// How the tuner evaluates p_t for one configuration.
#[derive(Debug, Clone, Copy)]
enum Route {
    /// Strict quorum: p ≡ 0.
    AlwaysConsistent,
    ClosedForm,
    AnalyticGeneral,
    /// Simulation with common random numbers, compared through the Wilson
    /// upper bound so the target is met conservatively.
    Simulate { seed: u64 },
}

fn choose_route(spec: &QuorumSpec, delays: &DelayModel) -> Route {
    if spec.is_strict() {
        return Route::AlwaysConsistent;
    }
    let analytic_ok =
        !delays.is_shifted() && spec.r() <= 2 && spec.n() <= MAX_ANALYTIC_REPLICAS;
    if analytic_ok {
        if spec.n() == 3 && matches!((spec.w(), spec.r()), (1, 1) | (2, 1) | (1, 2)) {
            Route::ClosedForm
        } else {
            Route::AnalyticGeneral
        }
    } else {
        Route::Simulate {
            seed: SIM_ROUTE_SEED ^ (u64::from(spec.w()) << 32 | u64::from(spec.r())),
        }
    }
}

/// Evaluates p_t, returning the estimate and the value compared against ε.
fn evaluate(
    route: Route,
    spec: &QuorumSpec,
    delays: &DelayModel,
    t: f64,
) -> Result<(StalenessEstimate, f64)> {
    match route {
        Route::AlwaysConsistent => {
            let estimate = analytic_general_pt(spec, delays, t)?;
            Ok((estimate, estimate.probability()))
        }
        Route::ClosedForm => {
            let estimate = closed_form_pt(spec, delays, t)?;
            Ok((estimate, estimate.probability()))
        }
        Route::AnalyticGeneral => {
            let estimate = analytic_general_pt(spec, delays, t)?;
            Ok((estimate, estimate.probability()))
        }
        Route::Simulate { seed } => {
            let config = SimConfig::new(*spec, *delays, t, SIM_ROUTE_TRIALS, seed)?
                .with_chunks(SIM_ROUTE_TRIALS.min(8))?;
            let result = estimate_pt(&config);
            let estimate = StalenessEstimate::from_simulation(&result);
            Ok((estimate, wilson_upper(result.stale_count, result.trials)))
        }
    }
}

fn min_delay_detail(
    spec: &QuorumSpec,
    delays: &DelayModel,
    epsilon: f64,
) -> Result<Option<(f64, StalenessEstimate)>> {
    check_epsilon(epsilon)?;
    let route = choose_route(spec, delays);
    let (estimate_at_zero, value_at_zero) = evaluate(route, spec, delays, 0.0)?;
    if value_at_zero <= epsilon {
        return Ok(Some((0.0, estimate_at_zero)));
    }

    // Fixing the seed across t values makes the simulated estimate a
    // non-increasing step function of t, so bisection behaves as it does on
    // the analytic routes.
    let cap = SEARCH_CAP / delays.write_rate().value();
    let mut lo = 0.0;
    let mut hi = 1.0 / delays.write_rate().value();
    loop {
        let (_, value) = evaluate(route, spec, delays, hi)?;
        if value <= epsilon {
            break;
        }
        if hi >= cap {
            return Ok(None);
        }
        lo = hi;
        hi = (hi * 2.0).min(cap);
    }
    while hi - lo > DELAY_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        let (_, value) = evaluate(route, spec, delays, mid)?;
        if value <= epsilon {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (estimate, _) = evaluate(route, spec, delays, hi)?;
    Ok(Some((hi, estimate)))
}

/// Smallest visibility delay t with p_t ≤ ε, to within 1e−6.
///
/// Returns `Ok(None)` when even the search cap of 10³/λ cannot drive the
/// evaluation below ε (only reachable through the conservative simulated
/// upper bound; the analytic probabilities decay to zero).
pub fn min_visibility_delay(
    spec: &QuorumSpec,
    delays: &DelayModel,
    epsilon: f64,
) -> Result<Option<f64>> {
    Ok(min_delay_detail(spec, delays, epsilon)?.map(|(t, _)| t))
}

fn dominates(a: &ParetoEntry, b: &ParetoEntry) -> bool {
    let no_worse = a.expected_write_latency <= b.expected_write_latency
        && a.expected_read_latency <= b.expected_read_latency
        && a.t_min <= b.t_min;
    let better = a.expected_write_latency < b.expected_write_latency
        || a.expected_read_latency < b.expected_read_latency
        || a.t_min < b.t_min;
    no_worse && better
}

/// Enumerates all (W, R) pairs, keeps those meeting ε within the delay cap,
/// and returns the Pareto frontier ordered by the requested objective.
/// Objective ties break by smaller delay, then smaller W+R, then smaller W.
pub fn tune(request: &TuningRequest) -> Result<TuningResult> {
    let n = request.n();
    let delays = request.delays();
    let mut candidates = Vec::new();
    for w in 1..=n {
        for r in 1..=n {
            let spec = QuorumSpec::new(n, w, r)?;
            let Some((t_min, estimate)) = min_delay_detail(&spec, &delays, request.epsilon())?
            else {
                continue;
            };
            if let Some(cap) = request.t_max() {
                if t_min > cap {
                    continue;
                }
            }
            candidates.push(ParetoEntry {
                w,
                r,
                t_min,
                p_at_t: estimate.probability(),
                expected_write_latency: delays.write_shift()
                    + expected_latency(n, w, delays.write_rate()),
                expected_read_latency: delays.read_shift()
                    + expected_latency(n, r, delays.read_rate()),
                method: estimate.method(),
            });
        }
    }

    let mut pareto: Vec<ParetoEntry> = candidates
        .iter()
        .filter(|entry| !candidates.iter().any(|other| dominates(other, entry)))
        .copied()
        .collect();

    let objective_key = |entry: &ParetoEntry| -> f64 {
        match request.objective() {
            Objective::MinReadLatency => entry.expected_read_latency,
            Objective::MinWriteLatency => entry.expected_write_latency,
            Objective::MinSum => entry.expected_write_latency + entry.expected_read_latency,
        }
    };
    pareto.sort_by(|a, b| {
        objective_key(a)
            .total_cmp(&objective_key(b))
            .then(a.t_min.total_cmp(&b.t_min))
            .then((a.w + a.r).cmp(&(b.w + b.r)))
            .then(a.w.cmp(&b.w))
    });

    Ok(TuningResult { pareto })
}
