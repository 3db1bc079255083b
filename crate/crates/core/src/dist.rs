//! Exponential order-statistic spacings and hypoexponential evaluation.
//!
//! For n i.i.d. exponential delays with rate λ, the spacing between the
//! (i−1)-th and i-th order statistics is itself exponential with rate
//! (n−i+1)λ, and partial sums of such spacings are hypoexponential with
//! pairwise-distinct rates. Every analytic probability in this crate reduces
//! to evaluating those two facts.

use crate::error::{Error, Result};
use crate::kahan::NeumaierSum;

/// Largest supported rate-list length (and replica count for the analytic
/// evaluators built on top). The distinct-rate product formula cancels
/// catastrophically beyond this range.
pub const MAX_RATES: usize = 20;

/// Tolerance for numerical noise around the [0, 1] probability range.
/// Intermediate results farther outside the range than this raise
/// [`Error::NumericalInstability`] instead of being clamped.
pub const INSTABILITY_TOLERANCE: f64 = 1e-9;

/// A strictly positive, finite rate (units 1/time).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rate(f64);

impl Rate {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value <= 0.0 {
            return Err(Error::InvalidRate(value));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Rate of the i-th order-statistic spacing of n i.i.d. exponentials:
/// the gap X₍ᵢ₎ − X₍ᵢ₋₁₎ is exponential with rate (n − i + 1)·λ.
pub fn spacing_rate(n: u32, i: u32, lambda: Rate) -> Result<Rate> {
    if i < 1 || i > n {
        return Err(Error::SpacingIndexOutOfRange { i, n });
    }
    Rate::new(f64::from(n - i + 1) * lambda.value())
}

/// A sum of independent exponentials with pairwise-distinct positive rates.
#[derive(Debug, Clone, PartialEq)]
pub struct HypoexponentialSpec {
    rates: Vec<f64>,
}

impl HypoexponentialSpec {
    /// Validates that all rates are positive, finite and pairwise distinct.
    ///
    /// Repeated rates are rejected: the product-form density below divides by
    /// rate differences. Rate lists derived from order-statistic spacings are
    /// always distinct, so this is not a practical restriction here.
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::EmptyRates);
        }
        if rates.len() > MAX_RATES {
            return Err(Error::TooManyRates {
                count: rates.len(),
                max: MAX_RATES,
            });
        }
        for &rate in &rates {
            if !rate.is_finite() || rate <= 0.0 {
                return Err(Error::InvalidRate(rate));
            }
        }
        let mut sorted = rates.clone();
        sorted.sort_by(f64::total_cmp);
        for pair in sorted.windows(2) {
            if pair[0] == pair[1] {
                return Err(Error::RepeatedRates(pair[0]));
            }
        }
        Ok(Self { rates })
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }
}

fn check_time(t: f64) -> Result<()> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidTime(t));
    }
    Ok(())
}

/// Partial-fraction coefficient of the i-th exponential term:
/// Π_{j≠i} λⱼ/(λⱼ − λᵢ).
fn mixture_coefficient(rates: &[f64], i: usize) -> f64 {
    let mut coeff = 1.0;
    for (j, &rate) in rates.iter().enumerate() {
        if j != i {
            coeff *= rate / (rate - rates[i]);
        }
    }
    coeff
}

fn guard_probability(value: f64) -> Result<f64> {
    if !(-INSTABILITY_TOLERANCE..=1.0 + INSTABILITY_TOLERANCE).contains(&value) {
        return Err(Error::NumericalInstability {
            value,
            tolerance: INSTABILITY_TOLERANCE,
        });
    }
    Ok(value.clamp(0.0, 1.0))
}

/// CDF of the rate sum at time `t`:
/// Pr[Σᵢ Yᵢ ≤ t] = Σᵢ (1 − e^(−λᵢ t)) Π_{j≠i} λⱼ/(λⱼ − λᵢ).
pub fn hypoexp_cdf(spec: &HypoexponentialSpec, t: f64) -> Result<f64> {
    check_time(t)?;
    let mut sum = NeumaierSum::new();
    for (i, &rate) in spec.rates.iter().enumerate() {
        sum.add(mixture_coefficient(&spec.rates, i) * (1.0 - (-rate * t).exp()));
    }
    guard_probability(sum.total())
}

/// Density of the rate sum at time `t`:
/// f(t) = Σᵢ λᵢ e^(−λᵢ t) Π_{j≠i} λⱼ/(λⱼ − λᵢ).
pub fn hypoexp_pdf(spec: &HypoexponentialSpec, t: f64) -> Result<f64> {
    check_time(t)?;
    let mut sum = NeumaierSum::new();
    for (i, &rate) in spec.rates.iter().enumerate() {
        sum.add(mixture_coefficient(&spec.rates, i) * rate * (-rate * t).exp());
    }
    let value = sum.total();
    if value < -INSTABILITY_TOLERANCE {
        return Err(Error::NumericalInstability {
            value,
            tolerance: INSTABILITY_TOLERANCE,
        });
    }
    Ok(value.max(0.0))
}
