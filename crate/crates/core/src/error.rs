use thiserror::Error;

/// Crate-wide error type.
///
/// Variants are grouped by the subsystem that raises them; `is_input_error`
/// and `is_numerical_error` exist so callers (notably the CLI) can map errors
/// onto a stable exit-code contract without matching every variant.
#[derive(Debug, Error)]
pub enum Error {
    // tensor kernels
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: String,
        expected: String,
        got: String,
    },
    #[error("conv kernel of {kernel} taps does not fit an input of {input} timesteps")]
    WindowTooLong { input: usize, kernel: usize },
    #[error("{context}: tensor is empty")]
    EmptyTensor { context: String },
    #[error("{context}: non-finite value encountered")]
    NonFinite { context: String },
    #[error("invalid dimension in {context}: {detail}")]
    InvalidDimension { context: String, detail: String },

    // layers / model
    #[error("backward called without a cached forward pass")]
    MissingCache,
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("model file version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("malformed model file: {0}")]
    MalformedModel(String),
    #[error("model file checksum mismatch: stored {stored}, computed {computed}")]
    ChecksumMismatch { stored: String, computed: String },

    // data pipeline
    #[error("missing required column '{0}' in CSV header")]
    MissingColumn(String),
    #[error("input file has no data rows")]
    EmptyFile,
    #[error("{bad} of {total} rows failed to parse (more than 10%); first error at line {first_line}: {first_reason}")]
    TooManyBadRows {
        bad: usize,
        total: usize,
        first_line: u64,
        first_reason: String,
    },
    #[error("no usable observations remain for '{key}' after cleaning")]
    EmptySeries { key: String },
    #[error("series has zero variance; cannot normalize")]
    ZeroVariance,
    #[error("series of length {length} is too short for window {window} with horizon {horizon}")]
    SeriesTooShort {
        length: usize,
        window: usize,
        horizon: usize,
    },
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    FractionOutOfRange(f64),
    #[error("city '{0}' not present in the input data")]
    UnknownCity(String),

    // training
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss at epoch {epoch}; training aborted")]
    NonFiniteLoss { epoch: usize },
    #[error("parameter/gradient layout mismatch in {context}: expected {expected}, got {got}")]
    LayoutMismatch {
        context: String,
        expected: String,
        got: String,
    },

    // metrics / baselines
    #[error("length mismatch: predictions {pred} vs targets {target}")]
    LengthMismatch { pred: usize, target: usize },
    #[error("{context}: empty input")]
    EmptyInput { context: String },
    #[error("target variance is zero; score undefined")]
    ZeroTargetVariance,
    #[error("underdetermined system: {samples} samples for {features} features (need at least {})", features + 1)]
    Underdetermined { samples: usize, features: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad input data or configuration
    /// (CLI exit code 2).
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::MissingColumn(_)
                | Error::EmptyFile
                | Error::TooManyBadRows { .. }
                | Error::EmptySeries { .. }
                | Error::ZeroVariance
                | Error::SeriesTooShort { .. }
                | Error::FractionOutOfRange(_)
                | Error::UnknownCity(_)
                | Error::InvalidConfig(_)
                | Error::InvalidSpec(_)
                | Error::VersionMismatch { .. }
                | Error::MalformedModel(_)
                | Error::ChecksumMismatch { .. }
                | Error::ShapeMismatch { .. }
                | Error::Underdetermined { .. }
        )
    }

    /// True for numerical failures during computation (CLI exit code 3).
    pub fn is_numerical_error(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteLoss { .. } | Error::NonFinite { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
