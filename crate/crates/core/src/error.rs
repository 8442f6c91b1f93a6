use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("assignment has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("species index {index} out of range for an alphabet of {n} species")]
    UnknownSpecies { index: usize, n: usize },

    #[error("invalid alphabet: {0}")]
    BadAlphabet(String),

    #[error("profiles do not sum to one at x = {x} (sum = {sum})")]
    ProfileNotStochastic { x: f64, sum: f64 },

    #[error("rate {rate} for {what} is negative at N = {n_sites}")]
    RatePositivity { what: String, rate: f64, n_sites: usize },

    #[error("ring size {0} is too small (need N >= 3)")]
    BadN(usize),

    #[error("fold reactions need an even alphabet of at least 4 species, got {0}")]
    FoldOnOddAlphabet(usize),

    #[error("configuration is frozen: total rate is zero")]
    Frozen,

    #[error("{bins} bins do not evenly divide {sites} sites")]
    BinMismatch { bins: usize, sites: usize },

    #[error("quadrature step {step} exceeds horizon/100 = {limit}")]
    GridTooCoarse { step: f64, limit: f64 },

    #[error("time step {dt} exceeds the stability bound {bound}")]
    CflViolation { dt: f64, bound: f64 },

    #[error("density {value} left [0, 1] at cell {cell}, t = {t}")]
    OutOfRange { value: f64, cell: usize, t: f64 },

    #[error("checkpoints must be sorted and lie in [0, {horizon}]")]
    BadCheckpoints { horizon: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("all {replicas} replicas failed at N = {n_sites}: {first}")]
    ReplicasFailed {
        n_sites: usize,
        replicas: usize,
        first: Box<Error>,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
