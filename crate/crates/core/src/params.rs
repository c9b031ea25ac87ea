use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};

/// Trainable recurrence weights plus the day-one latent state.
///
/// `a1`, `a2` drive the target recurrence, `b1`, `b2` the discount recurrence.
/// `lambda0` is in utility units; `beta0` lies in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorParams {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub lambda0: f64,
    pub beta0: f64,
}

impl BehaviorParams {
    pub fn new(a1: f64, a2: f64, b1: f64, b2: f64, lambda0: f64, beta0: f64) -> Result<Self> {
        let params = Self {
            a1,
            a2,
            b1,
            b2,
            lambda0,
            beta0,
        };
        params.validate()?;
        Ok(params)
    }

    /// Weights `(1, 0, 1, 0)`: the latent state never moves, which is
    /// discounted satisficing.
    pub fn discounted_satisficing(lambda0: f64, beta0: f64) -> Result<Self> {
        Self::new(1.0, 0.0, 1.0, 0.0, lambda0, beta0)
    }

    /// Discounted satisficing with no discount.
    pub fn satisficing(lambda0: f64) -> Result<Self> {
        Self::discounted_satisficing(lambda0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        check_finite("a1", self.a1)?;
        check_finite("a2", self.a2)?;
        check_finite("b1", self.b1)?;
        check_finite("b2", self.b2)?;
        check_finite("lambda0", self.lambda0)?;
        check_finite("beta0", self.beta0)?;
        if self.lambda0 < 0.0 {
            return Err(Error::invalid("lambda0", "must be >= 0"));
        }
        if !(self.beta0 > 0.0 && self.beta0 <= 1.0) {
            return Err(Error::invalid("beta0", "must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn weights(&self) -> [f64; 4] {
        [self.a1, self.a2, self.b1, self.b2]
    }

    pub fn with_weights(self, [a1, a2, b1, b2]: [f64; 4]) -> Self {
        Self {
            a1,
            a2,
            b1,
            b2,
            ..self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_initial_state() {
        assert!(BehaviorParams::new(0.8, 0.2, 0.8, 0.2, -1.0, 0.5).is_err());
        assert!(BehaviorParams::new(0.8, 0.2, 0.8, 0.2, 1.0, 0.0).is_err());
        assert!(BehaviorParams::new(0.8, 0.2, 0.8, 0.2, 1.0, 1.01).is_err());
        assert!(BehaviorParams::new(f64::NAN, 0.2, 0.8, 0.2, 1.0, 0.5).is_err());
        assert!(BehaviorParams::new(0.8, 0.2, 0.8, 0.2, 0.0, 1.0).is_ok());
    }

    #[test]
    fn satisficing_is_undiscounted() {
        let p = BehaviorParams::satisficing(15.0).unwrap();
        assert_eq!(p.weights(), [1.0, 0.0, 1.0, 0.0]);
        assert_eq!(p.beta0, 1.0);
    }
}
