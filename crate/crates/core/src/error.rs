use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("component index {index} out of range (model has {count} components)")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{what} must be nonnegative, got {value}")]
    NegativeRate { what: String, value: f64 },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("invalid model: {}", .0.join("; "))]
    InvalidModel(Vec<String>),

    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),

    #[error("time step too large at t = {time}: {detail}")]
    StepTooLarge { time: f64, detail: String },

    #[error("selected jump into component {target} from component {source_component} (label {label}) has zero amplitude")]
    ZeroNormJump {
        target: usize,
        source_component: usize,
        label: u32,
    },

    #[error("expectation value has imaginary residue {0:e}; observable is not Hermitian")]
    ImaginaryResidue(f64),

    #[error("time grids do not match: {0}")]
    GridMismatch(String),

    #[error("invariant breached at t = {time}: {what}")]
    InvariantBreach { time: f64, what: String },

    #[error("trajectory {index} failed: {source}")]
    Trajectory {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for a step-size guard failure, possibly wrapped in a trajectory error.
    pub fn is_step_too_large(&self) -> bool {
        match self {
            Error::StepTooLarge { .. } => true,
            Error::Trajectory { source, .. } => source.is_step_too_large(),
            _ => false,
        }
    }
}
