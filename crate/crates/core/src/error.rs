use thiserror::Error;

/// Errors shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A dense reference-tensor computation was asked for at a size where it
    /// can no longer be enumerated (n^d entries or d! permutation groups).
    #[error("oracle scale exceeded: {0}")]
    OracleScaleExceeded(String),

    /// Moment order above the exactly-representable factorial range.
    #[error("order overflow: d={0} exceeds the maximum supported order {max}", max = crate::comb::MAX_ORDER)]
    OrderOverflow(usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty sample set")]
    EmptySamples,

    #[error("samples already carry an augmentation row")]
    AlreadyAugmented,

    /// Post-processing cannot rescale a component whose augmented mean
    /// coordinate collapsed to zero.
    #[error("degenerate augmented coordinate for component {component}: |{value:.3e}| < {threshold:.3e}")]
    DegenerateAugmentedCoordinate {
        component: usize,
        value: f64,
        threshold: f64,
    },

    #[error("weights do not form a mixture: {0}")]
    InvalidWeights(String),

    #[error("covariance is not positive semidefinite (eigenvalue {0:.3e})")]
    NotPositiveSemidefinite(f64),

    /// Every optimization restart produced a non-finite objective.
    #[error("all {0} restarts diverged to a non-finite objective")]
    AllRestartsDiverged(usize),

    #[error("non-finite objective encountered")]
    NonFiniteObjective,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
