use thiserror::Error;

/// Errors raised by input validation and numerical guards.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("rate must be positive and finite, got {0}")]
    InvalidRate(f64),

    #[error("time must be non-negative and finite, got {0}")]
    InvalidTime(f64),

    #[error("delay shift must be non-negative and finite, got {0}")]
    InvalidShift(f64),

    #[error("rate list must be non-empty")]
    EmptyRates,

    #[error("rate list has {count} entries, supported maximum is {max}")]
    TooManyRates { count: usize, max: usize },

    #[error("rates must be pairwise distinct, found duplicate {0}")]
    RepeatedRates(f64),

    #[error("spacing index must satisfy 1 <= i <= n, got i={i}, n={n}")]
    SpacingIndexOutOfRange { i: u32, n: u32 },

    #[error("replica count must satisfy N >= 1, got N={n}")]
    InvalidReplicaCount { n: u32 },

    #[error("write quorum must satisfy 1 <= W <= N, got W={w}, N={n}")]
    WriteQuorumOutOfRange { w: u32, n: u32 },

    #[error("read quorum must satisfy 1 <= R <= N, got R={r}, N={n}")]
    ReadQuorumOutOfRange { r: u32, n: u32 },

    #[error("read order index must satisfy 1 <= j <= R, got j={j}, R={r}")]
    ReadIndexOutOfRange { j: u32, r: u32 },

    #[error("analytic evaluation supports N <= {max}, got N={n}; use the simulator")]
    ReplicaCountTooLarge { n: u32, max: u32 },

    #[error("target probability must lie in (0, 1], got {0}")]
    InvalidEpsilon(f64),

    #[error("trial count must satisfy trials >= 1")]
    InvalidTrials,

    #[error("chunk count must satisfy 1 <= chunks <= trials, got chunks={chunks}, trials={trials}")]
    InvalidChunks { chunks: u64, trials: u64 },

    #[error("shifted delay models are simulation-only; analytic evaluation requires zero shifts")]
    ShiftedDelaysUnsupported,

    #[error("no closed form for N={n}, W={w}, R={r}; use the general evaluator or the simulator")]
    ClosedFormUnsupported { n: u32, w: u32, r: u32 },

    #[error("analytic evaluation supports R <= 2, got R={r}; use the simulator")]
    AnalyticUnsupported { r: u32 },

    #[error("numerical instability: intermediate value {value} exceeds tolerance {tolerance}")]
    NumericalInstability { value: f64, tolerance: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
