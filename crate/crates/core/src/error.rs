use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("shape mismatch: {left} vs {right}")]
    ShapeMismatch { left: String, right: String },
    #[error("block count mismatch: {0} vs {1}")]
    BlockCount(usize, usize),
    #[error("block index {index} out of range for {blocks} blocks")]
    InvalidBlock { index: usize, blocks: usize },
    #[error("point has {got} coordinates, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("point is not on the product of unit spheres (block {0})")]
    NotOnSphere(usize),
    #[error("block {block} has odd degree {degree}")]
    OddDegree { block: usize, degree: u32 },
    #[error("dim P = {dim} exceeds the exact-arithmetic cap {cap}")]
    TooLarge { dim: usize, cap: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("inconsistent linear system: {0}")]
    InconsistentSystem(String),
    #[error("degenerate shape: {0}")]
    Degenerate(String),
    #[error("T(p_v) deviates from K_v / A by {0}")]
    LIdentity(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
