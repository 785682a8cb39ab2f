use thiserror::Error;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed input: bad file, bad schema, out-of-range parameter.
    Schema,
    /// A module precondition was violated at run time.
    Precondition,
    /// A configured resource cap would be exceeded.
    Resource,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("not a simplex point: entries sum to {sum} (tolerance 1e-12)")]
    InvalidSimplex { sum: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected d = {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("ball of radius {radius} around {site:?} leaves the window (enlarge the buffer)")]
    WindowTruncated { site: Vec<i64>, radius: u32 },

    #[error("requested time {t} is beyond the schedule horizon {horizon}")]
    HorizonExceeded { t: f64, horizon: f64 },

    #[error("snapshot times must be sorted and nonnegative")]
    UnsortedTimes,

    #[error(
        "walker left the certified region at step {step} (max excursion {max_excursion}, \
         window radius {radius}); suggested buffer W >= {suggested_buffer}"
    )]
    BufferBreach {
        step: usize,
        max_excursion: i64,
        radius: i64,
        suggested_buffer: u32,
    },

    #[error("kernel mass outside the window is {outside:e}, above budget {budget:e}; need window radius >= {required_radius}")]
    MassBudgetExceeded {
        outside: f64,
        budget: f64,
        required_radius: u32,
    },

    #[error("expected {expected} events exceeds the materialization cap {cap}; use the streaming schedule")]
    StreamingRequired { expected: f64, cap: u64 },

    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),

    #[error("annealed drift is zero; the walk needs a non-zero annealed drift")]
    ZeroDrift,

    #[error("operation needs an atomic distribution; supply a sample budget for sampled distributions")]
    NonAtomic,

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidSimplex { .. }
            | Error::InvalidInput(_)
            | Error::DimensionMismatch { .. }
            | Error::Json(_)
            | Error::Io(_) => ErrorClass::Schema,
            Error::StreamingRequired { .. } | Error::ResourceCap(_) => ErrorClass::Resource,
            _ => ErrorClass::Precondition,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
