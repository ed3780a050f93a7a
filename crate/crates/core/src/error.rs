use crate::utility::Violation;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("infeasible association: {0}")]
    Infeasible(Violation),

    #[error(
        "instance too large for exhaustive search: {n_ue} UEs (max {max_ue}), \
         largest candidate set {max_candidates} (max {candidate_cap})"
    )]
    OracleSize {
        n_ue: usize,
        max_ue: usize,
        max_candidates: usize,
        candidate_cap: usize,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("non-finite loss: {0}")]
    NonFiniteLoss(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
