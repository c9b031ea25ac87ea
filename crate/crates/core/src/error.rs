use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("non-finite input `{name}` = {value}")]
    NonFinite { name: &'static str, value: f64 },

    #[error("non-finite value in {what} at day {day}, slot {slot}")]
    NonFiniteIntermediate {
        what: &'static str,
        day: usize,
        slot: usize,
    },

    #[error("invalid day {day}: {reason}")]
    InvalidDay { day: usize, reason: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("loss mask selects no slots")]
    EmptyMask,

    #[error("trace was produced with different inputs: {0}")]
    TraceMismatch(&'static str),

    #[error("training diverged at epoch {epoch}, day index {day}: loss = {loss}")]
    Diverged { epoch: usize, day: usize, loss: f64 },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            reason: reason.into(),
        }
    }
}

pub(crate) fn check_finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { name, value })
    }
}
