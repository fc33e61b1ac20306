use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The weight law violates `E[W log2 W] < 1`; the cascade would degenerate to zero.
    #[error("non-degeneracy condition failed: E[W log2 W] = {e_w_log2_w} >= 1")]
    DegenerateGenerator { e_w_log2_w: f64 },

    #[error("{what} undefined at {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("resource limit: {requested} cells requested, cap is {cap}")]
    ResourceLimit { requested: u128, cap: u64 },

    #[error("level {j} is beyond the construction depth {level}")]
    LevelOutOfRange { j: u32, level: u32 },

    #[error("pool holds {available} cascades but {needed} are required")]
    InsufficientPool { needed: usize, available: usize },

    #[error("window granularity 2^-{granularity} finer than the {available} extra levels available")]
    GranularityTooFine { granularity: u32, available: u32 },

    #[error("exponent p = {0} not supported (p must be > 0)")]
    UnsupportedExponent(f64),

    #[error("no interior window positions at level {j} for a support of 2^{support_log2}")]
    EmptyWindow { j: u32, support_log2: u32 },

    #[error("degenerate least-squares fit: fewer than two distinct abscissae")]
    DegenerateFit,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("{trials} trials given, at least {required} required")]
    InsufficientTrials { trials: usize, required: usize },

    #[error("malformed measure dump: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
