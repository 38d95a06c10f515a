use thiserror::Error;

/// Errors raised anywhere in the solver stack.
#[derive(Debug, Error)]
pub enum SumkError {
    #[error("malformed instance: {0}")]
    Malformed(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("instance is infeasible: no item type can ever add positive weight")]
    Infeasible,

    #[error("instance is not normalized: type {type_index} has mass at weight 0")]
    NotNormalized { type_index: usize },

    #[error("capacity {capacity} exceeds the exact solver cap {cap}; use the approximation scheme instead")]
    ExactCapExceeded { capacity: u64, cap: u64 },

    #[error("remaining capacity {w} outside [1, {capacity}]")]
    CapacityOutOfRange { w: u64, capacity: u64 },

    #[error("epsilon must lie in (0, 1), got {0}")]
    InvalidEpsilon(f64),

    #[error("multiplicity {0} is not a power of two")]
    NotPowerOfTwo(u64),

    #[error("item {index} has cost {cost} below the expensive threshold {threshold}")]
    CheapItem { index: usize, cost: f64, threshold: f64 },

    #[error("frontier did not reach capacity {capacity} within {cap} iterations")]
    IterationCap { capacity: u64, cap: u64 },

    #[error("policy returned invalid action (type {type_index}, count {count}) at remaining capacity {w}")]
    InvalidAction { w: u64, type_index: usize, count: u64 },

    #[error("invalid generator spec: {0}")]
    InvalidGenSpec(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SumkError>;
