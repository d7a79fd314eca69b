use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate node set: {0}")]
    DegenerateNodes(String),
    #[error("direction lies outside every mesh region")]
    OutsideMesh,
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("region {0} has degenerate scaled vertices")]
    DegenerateRegion(usize),
    #[error("objective is not finite")]
    NonFinite,
    #[error("root finder could not bracket a solution")]
    NoBracket,
    #[error("all angular kernel weights vanish near this direction")]
    SparseKernel,
    #[error("cross-validation fold is empty")]
    EmptyFold,
    #[error("truncation point carries no probability mass")]
    UntenableTruncation,
    #[error("bounding froze every node without reaching the unit box")]
    BoundingFailed,
    #[error("return period {period} is shorter than the threshold period {minimum}")]
    ReturnPeriodTooShort { period: f64, minimum: f64 },
    #[error("level {u} lies below the minimum valid level {minimum}")]
    LevelTooLow { u: f64, minimum: f64 },
    #[error("region is not contained in the exceedance region")]
    RegionBelowThreshold,
    #[error("generalised Pareto fit failed: {0}")]
    GpdFit(String),
    #[error("proposal fit failed: {0}")]
    ProposalFit(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
