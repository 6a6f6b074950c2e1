use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{x} is not invertible modulo {modulus}")]
    NotInvertible { x: i64, modulus: u64 },

    #[error("arguments are not coprime to the modulus {modulus}")]
    NotCoprime { modulus: u64 },

    #[error("invalid modulus: {0}")]
    InvalidModulus(String),

    #[error("invalid trace function spec: {0}")]
    InvalidSpec(String),

    #[error("the Gauss sum of the trivial character is not normalized")]
    TrivialCharacter,

    #[error("identity `{identity}` violated at {at}: defect {defect:e} exceeds {tolerance:e}")]
    IdentityViolation {
        identity: String,
        at: String,
        defect: f64,
        tolerance: f64,
    },

    #[error("lemma part ({part}) violated for {instance}: {detail}")]
    LemmaViolation {
        part: u8,
        instance: String,
        detail: String,
    },

    #[error("integer overflow while computing {0}")]
    Overflow(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("prime-pair measure is empty ({0})")]
    EmptyMeasure(String),

    #[error("h-truncation too coarse: tail bound {tail:e} at hmax = {hmax}")]
    TruncationTooCoarse { hmax: u64, tail: f64 },

    #[error("invalid character-sum instance: {0}")]
    InvalidInstance(String),

    #[error("degenerate normalization: {0}")]
    DegenerateNorm(String),

    #[error("quadrature failed to reach tolerance {tolerance:e} on [{a}, {b}]")]
    QuadratureFailure { a: f64, b: f64, tolerance: f64 },

    #[error("malformed data: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn identity(
        identity: impl Into<String>,
        at: impl std::fmt::Display,
        defect: f64,
        tolerance: f64,
    ) -> Self {
        Error::IdentityViolation {
            identity: identity.into(),
            at: at.to_string(),
            defect,
            tolerance,
        }
    }

    /// True for the failures that mean "a checked identity or bound does not hold",
    /// as opposed to bad input or I/O trouble.
    pub fn is_verification_failure(&self) -> bool {
        matches!(
            self,
            Error::IdentityViolation { .. } | Error::LemmaViolation { .. }
        )
    }
}
