use thiserror::Error;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Guard,
    Algorithm,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: tau has {tau} entries, R has {refl}")]
    LengthMismatch { tau: usize, refl: usize },

    #[error("model needs at least {min} interfaces, got {found}")]
    TooFewInterfaces { min: usize, found: usize },

    #[error("tau[{index}] must be strictly positive, got {value}")]
    NonPositiveTravelTime { index: usize, value: String },

    #[error("R[{index}] must lie in (-1, 1), got {value}")]
    ReflectivityOutOfRange { index: usize, value: String },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid physical profile: {0}")]
    InvalidProfile(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{what} guard exceeded (limit {limit})")]
    GuardExceeded { what: &'static str, limit: usize },

    #[error("time cluster spans {span}, more than the allowed {limit}; time tolerance too coarse")]
    ClusterSpan { span: String, limit: String },

    #[error("binomial coefficient overflow for transit count vector {0:?}")]
    BinomialOverflow(Vec<u32>),

    #[error("model is not generic: {0}")]
    NonGeneric(String),

    #[error("response is empty: every amplitude cancelled")]
    EmptyResponse,

    #[error("arrival-time inversion stalled at layer {layer}: {reason}")]
    InversionStalled { layer: usize, reason: String },

    #[error("no arrival matches primary k^{layer} at time {time}")]
    PrimaryNotFound { layer: usize, time: String },

    #[error("recovered R[{index}] = {value} lies outside (-1, 1)")]
    RecoveredReflectivityOutOfRange { index: usize, value: String },

    #[error("every arrival was rejected as spurious")]
    AllArrivalsRejected,

    #[error("redundancy set for interface {n} is empty")]
    EmptyCorrectionSet { n: usize },

    #[error("|R''[{index}]| is below the division floor")]
    DivisionFloor { index: usize },

    #[error("induced reflectivity {value} is not in (-1, 1) \\ {{0}}")]
    InducedReflectivity { value: String },

    #[error("no generic model found within {attempts} attempts")]
    ResampleBudget { attempts: usize },

    #[error("internal consistency check failed: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            LengthMismatch { .. }
            | TooFewInterfaces { .. }
            | NonPositiveTravelTime { .. }
            | ReflectivityOutOfRange { .. }
            | InvalidData(_)
            | InvalidProfile(_)
            | DimensionMismatch { .. }
            | IndexOutOfRange { .. }
            | InvalidArgument(_)
            | Parse(_)
            | Json(_) => ErrorKind::Validation,
            GuardExceeded { .. } | ClusterSpan { .. } | BinomialOverflow(_) => ErrorKind::Guard,
            NonGeneric(_)
            | EmptyResponse
            | InversionStalled { .. }
            | PrimaryNotFound { .. }
            | RecoveredReflectivityOutOfRange { .. }
            | AllArrivalsRejected
            | EmptyCorrectionSet { .. }
            | DivisionFloor { .. }
            | InducedReflectivity { .. }
            | ResampleBudget { .. }
            | Internal(_) => ErrorKind::Algorithm,
            Io(_) => ErrorKind::Io,
        }
    }

    /// Short machine-readable tag for the variant.
    pub fn tag(&self) -> &'static str {
        use Error::*;
        match self {
            LengthMismatch { .. } => "length_mismatch",
            TooFewInterfaces { .. } => "too_few_interfaces",
            NonPositiveTravelTime { .. } => "non_positive_travel_time",
            ReflectivityOutOfRange { .. } => "reflectivity_out_of_range",
            InvalidData(_) => "invalid_data",
            InvalidProfile(_) => "invalid_profile",
            DimensionMismatch { .. } => "dimension_mismatch",
            IndexOutOfRange { .. } => "index_out_of_range",
            InvalidArgument(_) => "invalid_argument",
            Parse(_) => "parse",
            GuardExceeded { .. } => "guard_exceeded",
            ClusterSpan { .. } => "cluster_span",
            BinomialOverflow(_) => "binomial_overflow",
            NonGeneric(_) => "non_generic",
            EmptyResponse => "empty_response",
            InversionStalled { .. } => "inversion_stalled",
            PrimaryNotFound { .. } => "primary_not_found",
            RecoveredReflectivityOutOfRange { .. } => "recovered_reflectivity_out_of_range",
            AllArrivalsRejected => "all_arrivals_rejected",
            EmptyCorrectionSet { .. } => "empty_correction_set",
            DivisionFloor { .. } => "division_floor",
            InducedReflectivity { .. } => "induced_reflectivity",
            ResampleBudget { .. } => "resample_budget",
            Internal(_) => "internal",
            Io(_) => "io",
            Json(_) => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
