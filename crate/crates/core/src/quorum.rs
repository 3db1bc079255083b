//! Distribution of the expanding write-quorum size.
//!
//! A write completes once W of N replicas acknowledge it, but the remaining
//! replicas keep receiving it afterwards. `quorum_size_pmf` gives the
//! distribution of how many replicas hold the value a fixed time after the
//! write completed; `quorum_size_at_read_pmf` gives the same distribution at
//! the random moment the j-th fastest read response is sent.

use crate::dist::{Rate, INSTABILITY_TOLERANCE, MAX_RATES};
use crate::error::{Error, Result};
use crate::kahan::NeumaierSum;
use crate::staleness::DelayModel;

/// Largest replica count accepted by the analytic evaluators. Matches the
/// stability range of the alternating sums in [`crate::dist`].
pub const MAX_ANALYTIC_REPLICAS: u32 = MAX_RATES as u32;

/// Replica count N, write quorum W and read quorum R.
///
/// `w + r <= n` is the partial-quorum regime; strict quorums (`w + r > n`)
/// are accepted and yield zero staleness everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuorumSpec {
    n: u32,
    w: u32,
    r: u32,
}

impl QuorumSpec {
    pub fn new(n: u32, w: u32, r: u32) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidReplicaCount { n });
        }
        if w < 1 || w > n {
            return Err(Error::WriteQuorumOutOfRange { w, n });
        }
        if r < 1 || r > n {
            return Err(Error::ReadQuorumOutOfRange { r, n });
        }
        Ok(Self { n, w, r })
    }

    pub fn n(self) -> u32 {
        self.n
    }

    pub fn w(self) -> u32 {
        self.w
    }

    pub fn r(self) -> u32 {
        self.r
    }

    /// Write and read quorums are guaranteed to intersect.
    pub fn is_strict(self) -> bool {
        self.w + self.r > self.n
    }

    pub(crate) fn check_analytic_size(self) -> Result<()> {
        if self.n > MAX_ANALYTIC_REPLICAS {
            return Err(Error::ReplicaCountTooLarge {
                n: self.n,
                max: MAX_ANALYTIC_REPLICAS,
            });
        }
        Ok(())
    }
}

/// Probability mass over the number of replicas holding the latest value,
/// supported on s ∈ {w, …, n}.
#[derive(Debug, Clone, PartialEq)]
pub struct QuorumSizePmf {
    w: u32,
    masses: Vec<f64>,
}

impl QuorumSizePmf {
    /// Validates masses against the probability range and unit total.
    /// Masses inside the noise tolerance are clamped; larger excursions
    /// raise [`Error::NumericalInstability`]. Tiny masses are stored as
    /// computed rather than zeroed so the total stays checkable.
    pub(crate) fn from_masses(w: u32, masses: Vec<f64>) -> Result<Self> {
        debug_assert!(!masses.is_empty());
        let mut clamped = Vec::with_capacity(masses.len());
        let mut total = NeumaierSum::new();
        for &mass in &masses {
            if !(-INSTABILITY_TOLERANCE..=1.0 + INSTABILITY_TOLERANCE).contains(&mass) {
                return Err(Error::NumericalInstability {
                    value: mass,
                    tolerance: INSTABILITY_TOLERANCE,
                });
            }
            let mass = mass.clamp(0.0, 1.0);
            total.add(mass);
            clamped.push(mass);
        }
        let total = total.total();
        if (total - 1.0).abs() > INSTABILITY_TOLERANCE {
            return Err(Error::NumericalInstability {
                value: total,
                tolerance: INSTABILITY_TOLERANCE,
            });
        }
        Ok(Self { w, masses: clamped })
    }

    /// All mass on a single size.
    pub fn degenerate(s: u32) -> Self {
        Self {
            w: s,
            masses: vec![1.0],
        }
    }

    /// Lower support bound (the write quorum size).
    pub fn lower(&self) -> u32 {
        self.w
    }

    /// Upper support bound (the replica count).
    pub fn upper(&self) -> u32 {
        self.w + self.masses.len() as u32 - 1
    }

    /// Pr[S = s]; zero outside the support.
    pub fn mass(&self, s: u32) -> f64 {
        if s < self.w {
            return 0.0;
        }
        self.masses.get((s - self.w) as usize).copied().unwrap_or(0.0)
    }

    pub fn support(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.masses
            .iter()
            .enumerate()
            .map(move |(k, &p)| (self.w + k as u32, p))
    }

    /// Pr[S ≤ s].
    pub fn cumulative(&self, s: u32) -> f64 {
        let mut sum = NeumaierSum::new();
        for (size, p) in self.support() {
            if size <= s {
                sum.add(p);
            }
        }
        sum.total()
    }

    /// Σ s·Pr[S = s].
    pub fn mean(&self) -> f64 {
        let mut sum = NeumaierSum::new();
        for (s, p) in self.support() {
            sum.add(f64::from(s) * p);
        }
        sum.total()
    }
}

/// Expected quorum size under the PMF. Diagnostic companion for sweeps.
pub fn mean_quorum_size(pmf: &QuorumSizePmf) -> f64 {
    pmf.mean()
}

/// Exact binomial coefficient; callers keep n within [`MAX_RATES`].
pub(crate) fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut value: u128 = 1;
    for i in 0..u128::from(k) {
        value = value * (u128::from(n) - i) / (i + 1);
    }
    value as f64
}

fn check_time(t: f64) -> Result<()> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidTime(t));
    }
    Ok(())
}

/// Assembles the quorum-size PMF from a weight function
/// `weight(λᵢ) = E[e^(−λᵢ T)]`, where T is the (possibly random) elapsed
/// time at which the quorum is observed and λᵢ = (n − i + 1)λ:
///
///   Pr[S = w] = weight(λ_{w+1}),
///   Pr[S = s] = Σ_{i=w+1}^{s+1} (−1)^(s−i) (1 − weight(λᵢ))
///               · C(n−w, n−i+1) · C(n−i+1, s−i+1)
///
/// for s > w. The i = n+1 summand carries λ_{n+1} = 0, for which the factor
/// (1 − weight(0)) vanishes identically, so it is skipped outright.
fn pmf_from_weight(n: u32, w: u32, lambda: f64, weight: impl Fn(f64) -> f64) -> Result<QuorumSizePmf> {
    if w == n {
        return Ok(QuorumSizePmf::degenerate(n));
    }
    let lambda_at = |i: u32| f64::from(n - i + 1) * lambda;
    let mut masses = Vec::with_capacity((n - w + 1) as usize);
    masses.push(weight(lambda_at(w + 1)));
    for s in (w + 1)..=n {
        let mut sum = NeumaierSum::new();
        for i in (w + 1)..=(s + 1).min(n) {
            // (−1)^(s−i), written through s+1−i to stay in unsigned range.
            let sign = if (s + 1 - i) % 2 == 0 { -1.0 } else { 1.0 };
            let term = sign
                * (1.0 - weight(lambda_at(i)))
                * binomial(n - w, n - i + 1)
                * binomial(n - i + 1, s + 1 - i);
            sum.add(term);
        }
        masses.push(sum.total());
    }
    QuorumSizePmf::from_masses(w, masses)
}

/// PMF of the number of replicas holding the value `t` time units after the
/// write completed.
pub fn quorum_size_pmf(spec: &QuorumSpec, lambda: Rate, t: f64) -> Result<QuorumSizePmf> {
    check_time(t)?;
    spec.check_analytic_size()?;
    pmf_from_weight(spec.n(), spec.w(), lambda.value(), |rate| (-rate * t).exp())
}

/// Laplace transform of the j-th order statistic of n i.i.d. exponential
/// read delays with rate ξ, evaluated at `lam`:
///
///   E[e^(−lam·Z₍ⱼ₎)] = Σ_{l=1}^{j} C(n,j) C(j,l) (−1)^(j−l) · lξ / ((n−l+1)ξ + lam)
pub(crate) fn read_order_laplace(n: u32, j: u32, xi: f64, lam: f64) -> f64 {
    let mut sum = NeumaierSum::new();
    for l in 1..=j {
        let sign = if (j - l) % 2 == 1 { -1.0 } else { 1.0 };
        let rate_l = f64::from(n - l + 1) * xi;
        sum.add(sign * binomial(n, j) * binomial(j, l) * f64::from(l) * xi / (rate_l + lam));
    }
    sum.total()
}

/// PMF of the number of replicas holding the value at the moment the j-th
/// fastest read response is sent, i.e. t + Z₍ⱼ₎ after write completion.
///
/// `j` is the rank of the read responder (1 = fastest), not a replica
/// identity. Mixing the fixed-offset PMF over the density of Z₍ⱼ₎ replaces
/// each e^(−λᵢt) factor with e^(−λᵢt)·E[e^(−λᵢZ₍ⱼ₎)].
pub fn quorum_size_at_read_pmf(
    spec: &QuorumSpec,
    delays: &DelayModel,
    t: f64,
    j: u32,
) -> Result<QuorumSizePmf> {
    check_time(t)?;
    spec.check_analytic_size()?;
    delays.require_unshifted()?;
    if j < 1 || j > spec.r() {
        return Err(Error::ReadIndexOutOfRange { j, r: spec.r() });
    }
    let n = spec.n();
    let xi = delays.read_rate().value();
    pmf_from_weight(n, spec.w(), delays.write_rate().value(), |rate| {
        (-rate * t).exp() * read_order_laplace(n, j, xi, rate)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{hypoexp_cdf, HypoexponentialSpec};

    fn rate(value: f64) -> Rate {
        Rate::new(value).unwrap()
    }

    fn delays(lambda: f64, xi: f64) -> DelayModel {
        DelayModel::new(rate(lambda), rate(xi))
    }

    #[test]
    fn spec_validation() {
        assert!(QuorumSpec::new(3, 1, 2).is_ok());
        assert_eq!(
            QuorumSpec::new(0, 1, 1).unwrap_err(),
            Error::InvalidReplicaCount { n: 0 }
        );
        assert_eq!(
            QuorumSpec::new(3, 0, 1).unwrap_err(),
            Error::WriteQuorumOutOfRange { w: 0, n: 3 }
        );
        assert_eq!(
            QuorumSpec::new(3, 4, 1).unwrap_err(),
            Error::WriteQuorumOutOfRange { w: 4, n: 3 }
        );
        assert_eq!(
            QuorumSpec::new(3, 1, 0).unwrap_err(),
            Error::ReadQuorumOutOfRange { r: 0, n: 3 }
        );
        assert!(QuorumSpec::new(3, 2, 2).unwrap().is_strict());
        assert!(!QuorumSpec::new(3, 1, 2).unwrap().is_strict());
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(20, 10), 184_756.0);
        assert_eq!(binomial(4, 0), 1.0);
        assert_eq!(binomial(3, 5), 0.0);
    }

    #[test]
    fn zero_elapsed_time_is_degenerate_at_w() {
        let spec = QuorumSpec::new(3, 1, 1).unwrap();
        let pmf = quorum_size_pmf(&spec, rate(1.0), 0.0).unwrap();
        assert_eq!(pmf.mass(1), 1.0);
        assert_eq!(pmf.mass(2), 0.0);
        assert_eq!(pmf.mass(3), 0.0);
        assert_eq!(pmf.mean(), 1.0);
    }

    #[test]
    fn full_write_quorum_is_degenerate_at_n() {
        let spec = QuorumSpec::new(3, 3, 1).unwrap();
        let pmf = quorum_size_pmf(&spec, rate(1.0), 5.0).unwrap();
        assert_eq!(pmf.mass(3), 1.0);
        assert_eq!(pmf.lower(), 3);
        assert_eq!(pmf.upper(), 3);
        assert_eq!(mean_quorum_size(&pmf), 3.0);
    }

    // Frozen values cross-checked against a 10^7-trial Monte Carlo count of
    // arrivals within X_(W) + t.
    #[test]
    fn three_replica_reference_values() {
        let spec = QuorumSpec::new(3, 1, 1).unwrap();
        let pmf = quorum_size_pmf(&spec, rate(1.0), 1.0).unwrap();
        assert!((pmf.mass(1) - 0.135335283236613).abs() < 1e-12);
        assert!((pmf.mass(2) - 0.465088315869659).abs() < 1e-12);
        assert!((pmf.mass(3) - 0.399576400893728).abs() < 1e-12);
        assert!((pmf.mean() - 2.264241117657115).abs() < 1e-12);

        let spec = QuorumSpec::new(3, 2, 1).unwrap();
        let pmf = quorum_size_pmf(&spec, rate(1.0), 1.0).unwrap();
        assert!((pmf.mass(2) - 0.367879441171442).abs() < 1e-12);
        assert!((pmf.mass(3) - 0.632120558828558).abs() < 1e-12);
    }

    #[test]
    fn lowest_mass_is_exactly_exponential() {
        for n in 2..=10 {
            for w in 1..n {
                let spec = QuorumSpec::new(n, w, 1).unwrap();
                for t in [0.0, 0.25, 1.0, 3.0] {
                    let pmf = quorum_size_pmf(&spec, rate(1.0), t).unwrap();
                    let expected = (-f64::from(n - w) * t).exp();
                    assert!(
                        (pmf.mass(w) - expected).abs() < 1e-14,
                        "n={n} w={w} t={t}"
                    );
                }
            }
        }
    }

    #[test]
    fn normalization_within_tolerance() {
        for n in 2..=10u32 {
            for w in 1..=n {
                let spec = QuorumSpec::new(n, w, 1).unwrap();
                for k in 0..=50 {
                    let t = 0.1 * f64::from(k);
                    let pmf = quorum_size_pmf(&spec, rate(1.0), t).unwrap();
                    let total: f64 = pmf.support().map(|(_, p)| p).sum();
                    assert!((total - 1.0).abs() < 1e-9, "n={n} w={w} t={t}: {total}");
                }
            }
        }
    }

    #[test]
    fn stochastically_monotone_in_time() {
        for n in [3u32, 5, 8] {
            for w in 1..n {
                let spec = QuorumSpec::new(n, w, 1).unwrap();
                let mut prev: Option<QuorumSizePmf> = None;
                for k in 0..=25 {
                    let pmf = quorum_size_pmf(&spec, rate(1.0), 0.2 * f64::from(k)).unwrap();
                    if let Some(earlier) = &prev {
                        for s in w..=n {
                            assert!(
                                pmf.cumulative(s) <= earlier.cumulative(s) + 1e-12,
                                "n={n} w={w} s={s}"
                            );
                        }
                    }
                    prev = Some(pmf);
                }
            }
        }
    }

    /// Independent route: Pr[S = s] = Pr[Σ_{i=w+1}^{s} Yᵢ ≤ t] −
    /// Pr[Σ_{i=w+1}^{s+1} Yᵢ ≤ t], with the empty sum ≤ t certain and the
    /// sum through i = n+1 never finishing.
    fn pmf_via_hypoexp(n: u32, w: u32, lambda: f64, t: f64) -> Vec<f64> {
        let cdf = |hi: u32| -> f64 {
            let rates = ((w + 1)..=hi).map(|i| f64::from(n - i + 1) * lambda).collect();
            hypoexp_cdf(&HypoexponentialSpec::new(rates).unwrap(), t).unwrap()
        };
        (w..=n)
            .map(|s| {
                let reached_s = if s == w { 1.0 } else { cdf(s) };
                let reached_next = if s == n { 0.0 } else { cdf(s + 1) };
                reached_s - reached_next
            })
            .collect()
    }

    #[test]
    fn matches_hypoexponential_difference_route() {
        for (n, w, t) in [(3, 1, 1.0), (4, 2, 0.5), (6, 1, 0.7), (8, 3, 2.0), (10, 9, 0.3)] {
            let spec = QuorumSpec::new(n, w, 1).unwrap();
            let pmf = quorum_size_pmf(&spec, rate(1.0), t).unwrap();
            let reference = pmf_via_hypoexp(n, w, 1.0, t);
            for (k, s) in (w..=n).enumerate() {
                assert!(
                    (pmf.mass(s) - reference[k]).abs() < 1e-10,
                    "n={n} w={w} t={t} s={s}: {} vs {}",
                    pmf.mass(s),
                    reference[k]
                );
            }
        }
    }

    #[test]
    fn matches_monte_carlo_oracle_at_small_n() {
        for (n, w, t) in [(4u32, 2u32, 0.5), (6, 3, 1.0)] {
            let spec = QuorumSpec::new(n, w, 1).unwrap();
            let trials = 200_000u64;
            let analytic = quorum_size_pmf(&spec, rate(1.0), t).unwrap();
            let empirical =
                crate::sim::estimate_quorum_pmf(&spec, rate(1.0), t, trials, 0xABCD + u64::from(n))
                    .unwrap();
            for (s, p) in analytic.support() {
                let sigma = (p * (1.0 - p) / trials as f64).sqrt();
                assert!(
                    (empirical.mass(s) - p).abs() <= 5.0 * sigma.max(1e-12),
                    "n={n} w={w} t={t} s={s}: {} vs {}",
                    empirical.mass(s),
                    p
                );
            }
        }
    }

    #[test]
    fn at_read_full_quorum_is_degenerate() {
        let spec = QuorumSpec::new(3, 3, 2).unwrap();
        let pmf = quorum_size_at_read_pmf(&spec, &delays(1.0, 1.0), 0.5, 1).unwrap();
        assert_eq!(pmf.mass(3), 1.0);
    }

    // Frozen: xi_1/(xi_1 + lambda_2) = 3/5 at the fastest read response.
    #[test]
    fn at_read_reference_values() {
        let spec = QuorumSpec::new(3, 1, 1).unwrap();
        let pmf = quorum_size_at_read_pmf(&spec, &delays(1.0, 1.0), 0.0, 1).unwrap();
        assert!((pmf.mass(1) - 0.6).abs() < 1e-12);
        assert!((pmf.mass(2) - 0.3).abs() < 1e-12);
        assert!((pmf.mass(3) - 0.1).abs() < 1e-12);

        let spec = QuorumSpec::new(3, 2, 1).unwrap();
        let pmf = quorum_size_at_read_pmf(&spec, &delays(1.0, 1.0), 1.0, 1).unwrap();
        assert!((pmf.mass(2) - 0.275909580878582).abs() < 1e-12);
    }

    #[test]
    fn at_read_validates_rank() {
        let spec = QuorumSpec::new(3, 1, 2).unwrap();
        let d = delays(1.0, 1.0);
        assert_eq!(
            quorum_size_at_read_pmf(&spec, &d, 0.0, 0).unwrap_err(),
            Error::ReadIndexOutOfRange { j: 0, r: 2 }
        );
        assert_eq!(
            quorum_size_at_read_pmf(&spec, &d, 0.0, 3).unwrap_err(),
            Error::ReadIndexOutOfRange { j: 3, r: 2 }
        );
    }

    #[test]
    fn at_read_rejects_shifted_delays() {
        let spec = QuorumSpec::new(3, 1, 1).unwrap();
        let shifted = DelayModel::with_shifts(rate(1.0), rate(1.0), 0.1, 0.0).unwrap();
        assert_eq!(
            quorum_size_at_read_pmf(&spec, &shifted, 0.0, 1).unwrap_err(),
            Error::ShiftedDelaysUnsupported
        );
    }

    #[test]
    fn instantaneous_reads_recover_fixed_offset_pmf() {
        let spec = QuorumSpec::new(4, 2, 2).unwrap();
        let fast_reads = delays(1.0, 1e9);
        for t in [0.0, 0.5, 1.5] {
            let at_read = quorum_size_at_read_pmf(&spec, &fast_reads, t, 1).unwrap();
            let fixed = quorum_size_pmf(&spec, rate(1.0), t).unwrap();
            for s in 2..=4 {
                assert!((at_read.mass(s) - fixed.mass(s)).abs() < 1e-6, "t={t} s={s}");
            }
        }
    }

    #[test]
    fn analytic_size_limit_enforced() {
        let spec = QuorumSpec::new(21, 1, 1).unwrap();
        assert_eq!(
            quorum_size_pmf(&spec, rate(1.0), 1.0).unwrap_err(),
            Error::ReplicaCountTooLarge { n: 21, max: 20 }
        );
    }
}
