use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("mismatched generator count: {0} vs {1}")]
    MismatchedGeneratorCount(usize, usize),
    #[error("too many odd generators: {0} (max 12)")]
    TooManyGenerators(usize),
    #[error("mask {mask:#b} out of range for {generators} generators")]
    MaskOutOfRange { mask: u32, generators: usize },
    #[error("element has zero body and is not invertible")]
    ZeroBody,
    #[error("only even elements can be inverted")]
    OddElement,

    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("unknown coordinate `{0}`")]
    UnknownCoordinate(String),
    #[error("duplicate coordinate name `{0}`")]
    DuplicateCoordinate(String),
    #[error("odd derivative across a factor of mixed parity")]
    NonHomogeneousOperand,
    #[error("argument outside function domain: {0}")]
    Domain(String),
    #[error("parity violation: {0}")]
    ParityViolation(String),
    #[error("signature mismatch: {0}")]
    SignatureMismatch(String),

    #[error("body matrix is singular at {0}")]
    SingularBody(String),
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("trajectory left the chart domain at t = {t}: {detail}")]
    LeftDomain { t: f64, detail: String },
    #[error("grid too short: need at least {needed} samples, got {got}")]
    GridTooShort { needed: usize, got: usize },
    #[error("vector field is not homogeneous")]
    NonHomogeneousField,
    #[error("invalid metric: {0}")]
    InvalidMetric(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model error: {0}")]
    Model(String),
}
