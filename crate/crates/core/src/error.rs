use alloc::string::String;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("outcome sets of the two distributions differ")]
    OutcomeMismatch,

    #[error("unknown axis `{0}`")]
    UnknownAxis(String),

    #[error("axis `{0}` appears in more than one subset")]
    OverlappingAxes(String),

    #[error("enumeration needs {required} table entries, cutoff is {cutoff}")]
    EnumerationCutoff { required: u128, cutoff: u128 },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("reward {value} for action {action} is outside [0, 1]")]
    RewardOutOfRange { action: usize, value: f64 },

    /// Every hypothesis was ruled out by the observed data.
    #[error("contradiction: {0}")]
    Contradiction(String),
}

pub type Result<T> = core::result::Result<T, Error>;
