use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("vertex {vertex} outside box of volume {volume}")]
    VertexOutOfRange { vertex: u64, volume: u64 },
    #[error("scale {scale} outside 1..={max}")]
    ScaleOutOfRange { scale: u32, max: u32 },
    #[error("arithmetic overflow: {0}")]
    Overflow(&'static str),
    #[error("kernel not integrable: {0}")]
    NotIntegrable(String),
    #[error("box too large for direct mode: expected {expected:.3e} arrivals at scale {scale}")]
    BoxTooLarge { scale: u32, expected: f64 },
    #[error("family is not monotone in lambda at scale {scale}")]
    NotMonotone { scale: u32 },
    #[error("block sets overlap")]
    Overlap,
    #[error("enumeration limit exceeded: {0} subsets")]
    EnumerationLimit(u128),
    #[error("schedule infeasible: {0}")]
    Schedule(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
