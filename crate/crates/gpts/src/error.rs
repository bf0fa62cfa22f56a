use thiserror::Error;

/// Errors raised by the library, grouped by category so callers (notably the
/// CLI) can map them to stable exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or operation received an out-of-range parameter.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Malformed data fed into an operation (non-finite reward, non-PSD
    /// matrix, unparseable description, ...).
    #[error("invalid input: {0}")]
    Input(String),

    /// A path does not have the depth the kernel expects.
    #[error("depth mismatch: kernel expects depth {expected}, path has depth {found}")]
    DepthMismatch { expected: usize, found: usize },

    /// The requested construction is undefined for this kernel.
    #[error("unsupported kernel: {0}")]
    UnsupportedKernel(String),

    /// Covariance factorization broke down (noise-free duplicate arm).
    #[error("degenerate update: {0}")]
    DegenerateUpdate(String),

    /// Every arm has been played; nothing is left to select.
    #[error("search tree exhausted: no selectable arms remain")]
    ExhaustedTree,

    /// A dense construction would exceed the configured size cap.
    #[error("size cap exceeded: {requested} paths > cap {cap}")]
    SizeCap { requested: u128, cap: usize },

    /// Kernel parameters fall outside the regime a bound requires.
    #[error("kernel regime violation: {0}")]
    Regime(String),

    /// The generative environment rejected an action sequence.
    #[error("environment error: {0}")]
    Environment(String),

    /// A quantity violated a relation that holds by theorem; this signals an
    /// implementation bug, not a bad input.
    #[error("property violation: {0}")]
    PropertyViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
