use thiserror::Error;

/// Errors produced by the duct solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "cutoff resonance at mode {mode}: |k - sqrt(1-M^2) n pi / d| = {gap:e} (condition k != sqrt(1-M^2) n pi/d violated)"
    )]
    CutoffResonance { mode: usize, gap: f64 },

    #[error("singular kernel: {0}")]
    Singularity(String),

    #[error("representation error: {0}")]
    Representation(String),

    #[error("degenerate layer for mode {mode}: denominator modulus {modulus:e}")]
    DegenerateLayer { mode: usize, modulus: f64 },

    #[error("ill-posed linear system: zero pivot at row {row}")]
    IllPosed { row: usize },

    #[error("level error: {0}")]
    Level(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("insufficient data: {usable} usable points, need at least 3")]
    InsufficientData { usable: usize },

    #[error("estimator failed for seed {seed}: {source}")]
    Estimator { seed: u64, source: Box<Error> },

    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Broad category, used by the command line front end to pick an exit code.
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidConfig(_) | Error::Parse { .. } | Error::CutoffResonance { .. } => {
                ErrorCategory::Config
            }
            Error::Estimator { source, .. } => source.category(),
            _ => ErrorCategory::Numerical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Numerical,
}
