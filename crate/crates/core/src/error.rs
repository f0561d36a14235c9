use alloc::string::String;

/// Errors produced by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("cholesky decomposition failed: pivot {pivot} is {value:e} (matrix not positive definite)")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    DivergedTraining { epoch: usize },

    #[error("langevin chain diverged at step {step}")]
    DivergedSampling { step: usize },

    #[error("all {attempted} langevin chains diverged")]
    AllChainsDiverged { attempted: usize },

    #[error("malformed model stream at byte {offset}: {reason}")]
    Parse { offset: usize, reason: &'static str },

    #[error("unsupported model format version {found} (supported: {supported})")]
    UnsupportedVersion { found: u16, supported: u16 },

    #[error("need at least {needed} samples, got {found}")]
    InsufficientSamples { needed: usize, found: usize },

    #[error("no samples within radius {radius} of the anchor; use a larger radius")]
    EmptyNeighbourhood { radius: f64 },

    #[error("posterior undefined: every weighted class density is zero")]
    UndefinedPosterior,

    #[error("newton-raphson did not converge after {iterations} iterations (last residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("newton-raphson hit a stationary gradient at iteration {iteration}")]
    StationaryGradient { iteration: usize },

    #[error("class {class} has {count} members; stratification needs at least 2")]
    Stratification { class: u8, count: usize },

    #[error("cannot flip {requested} labels of class {class}: only {available} present")]
    FlipCount { class: u8, requested: usize, available: usize },

    #[error("grids do not match: {0} vs {1} cells")]
    GridMismatch(usize, usize),

    #[error("invalid label {0}; labels must be 0 or 1")]
    InvalidLabel(u8),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: &str) -> Error {
    Error::InvalidConfig(String::from(msg))
}
