use thiserror::Error;

use crate::adjoint::DomainError;

/// Errors raised while simulating or optimizing.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("degenerate geometry at step {step:?}: {reason}")]
    Degenerate { step: Option<usize>, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite {quantity} at iteration {iteration}")]
    NonFinite { iteration: usize, quantity: &'static str },
}

impl SimError {
    pub(crate) fn degenerate(reason: impl Into<String>) -> Self {
        SimError::Degenerate {
            step: None,
            reason: reason.into(),
        }
    }

    /// Attaches a step index to a degeneracy raised inside a transition.
    pub(crate) fn at_step(self, index: usize) -> Self {
        match self {
            SimError::Degenerate { step: None, reason } => SimError::Degenerate {
                step: Some(index),
                reason,
            },
            other => other,
        }
    }
}

impl From<DomainError> for SimError {
    fn from(e: DomainError) -> Self {
        SimError::degenerate(e.to_string())
    }
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
