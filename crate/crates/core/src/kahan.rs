//! Compensated summation for alternating series.

/// Neumaier's improvement of Kahan summation.
///
/// The alternating binomial sums evaluated in this crate cancel heavily as
/// the number of terms grows; naive accumulation loses digits that the
/// instability guards would then misattribute. The compensation term makes
/// the running error independent of the summation order.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub(crate) fn new() -> Self {
        Self::default()
    }

    pub(crate) fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}
