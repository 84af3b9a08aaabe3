use thiserror::Error;

pub type Result<T> = std::result::Result<T, OdinError>;

#[derive(Debug, Error)]
pub enum OdinError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid sample set: {0}")]
    InvalidSamples(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("bandwidth {h} is too small: h^{d} underflows")]
    DegenerateBandwidth { h: f64, d: usize },

    #[error("leave-one-out estimate needs at least one remaining sample (n_effective = 0)")]
    EmptyEffectiveSample,

    #[error("bandwidth grid exhausted: eval point {eval_index} has no neighbor within h/2 = {required:.6} even at the largest grid value")]
    GridExhausted { eval_index: usize, required: f64 },

    #[error("nonpositive density argument ({x}, {y}) for functional `{name}`")]
    NonpositiveDensity { name: String, x: f64, y: f64 },

    #[error("non-finite estimate at l = {l}")]
    NonFiniteEstimate { l: f64 },

    #[error("infeasible weight problem: {0}")]
    Infeasible(String),

    #[error("rank-deficient constraint matrix: row {row} ({label}) is linearly dependent on earlier rows")]
    RankDeficient { row: usize, label: String },

    #[error("lambda = {lambda} is below d + 1 = {required}; parametric rate not guaranteed")]
    LambdaTooSmall { lambda: u32, required: u32 },

    #[error("weight solver did not converge after {iterations} iterations (max residual {max_residual:e})")]
    NoConvergence { iterations: usize, max_residual: f64 },

    #[error("quadrature did not reach tolerance {requested:e} (achieved {achieved:e})")]
    Quadrature { requested: f64, achieved: f64 },

    #[error("sample size mismatch: ensemble estimators need N1 == N2 (got {n1} and {n2})")]
    SampleSizeMismatch { n1: usize, n2: usize },

    #[error("statistics: {0}")]
    Stats(String),

    #[error("invalid experiment config: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
