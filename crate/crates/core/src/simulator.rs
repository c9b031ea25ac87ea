//! Synthetic drivers: exponential ride utilities labelled by the DDS model.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{simulate_history, DriverHistory, LatentTrajectory, ModelConfig};
use crate::noise::NoiseDraw;
use crate::params::BehaviorParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub days: usize,
    pub width: usize,
    /// Mean of the exponential ride utility.
    pub exp_scale: f64,
    pub generator: BehaviorParams,
    pub noise_std_eps: f64,
    pub noise_std_eta: f64,
    pub model: ModelConfig,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            days: 500,
            width: 30,
            exp_scale: 10.0,
            generator: BehaviorParams {
                a1: 0.8,
                a2: 0.2,
                b1: 0.8,
                b2: 0.2,
                lambda0: 70.0,
                beta0: 0.87,
            },
            noise_std_eps: 1.0,
            noise_std_eta: 1.0,
            model: ModelConfig::default(),
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.days == 0 {
            return Err(Error::invalid("days", "must be >= 1"));
        }
        if self.width == 0 {
            return Err(Error::invalid("width", "must be >= 1"));
        }
        if !(self.exp_scale > 0.0 && self.exp_scale.is_finite()) {
            return Err(Error::invalid("exp_scale", "must be positive and finite"));
        }
        for (name, v) in [
            ("noise_std_eps", self.noise_std_eps),
            ("noise_std_eta", self.noise_std_eta),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be >= 0 and finite"));
            }
        }
        self.generator.validate()?;
        self.model.validate()
    }
}

/// A generated driver together with everything needed to score a learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDriver {
    pub history: DriverHistory,
    pub latent: LatentTrajectory,
    pub generator: BehaviorParams,
    pub noise: NoiseDraw,
}

fn draw_utilities<R: Rng>(rng: &mut R, config: &SimConfig) -> Result<Vec<Vec<f64>>> {
    let exp = Exp::new(1.0 / config.exp_scale)
        .map_err(|_| Error::invalid("exp_scale", "must be positive and finite"))?;
    Ok((0..config.days)
        .map(|_| (0..config.width).map(|_| rng.sample(exp)).collect())
        .collect())
}

/// `days x width` i.i.d. exponential utilities with mean `exp_scale`.
pub fn generate_utilities(config: &SimConfig) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    draw_utilities(&mut ChaCha8Rng::seed_from_u64(config.seed), config)
}

/// Utilities from [`generate_utilities`] followed by per-day noise from the
/// same stream, labelled with [`simulate_history`]. The first ride of every
/// day is accepted.
pub fn generate_driver(config: &SimConfig) -> Result<SyntheticDriver> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let utilities = draw_utilities(&mut rng, config)?;
    let noise = NoiseDraw::sample(
        &mut rng,
        config.days,
        config.noise_std_eps,
        config.noise_std_eta,
    );
    let (history, latent) = simulate_history(&config.generator, &utilities, &noise, &config.model)?;
    Ok(SyntheticDriver {
        history,
        latent,
        generator: config.generator,
        noise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn utilities_are_nonnegative_and_seeded() {
        let cfg = SimConfig {
            days: 20,
            width: 5,
            seed: 11,
            ..SimConfig::default()
        };
        let a = generate_utilities(&cfg).unwrap();
        assert_eq!(a, generate_utilities(&cfg).unwrap());
        assert!(a.iter().flatten().all(|u| *u >= 0.0));
        let other = generate_utilities(&SimConfig { seed: 12, ..cfg }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn invalid_config_is_rejected() {
        assert!(generate_driver(&SimConfig {
            exp_scale: 0.0,
            ..SimConfig::default()
        })
        .is_err());
        assert!(generate_driver(&SimConfig {
            days: 0,
            ..SimConfig::default()
        })
        .is_err());
    }

    #[test]
    fn every_day_starts_with_an_acceptance() {
        let d = generate_driver(&SimConfig {
            days: 100,
            seed: 5,
            ..SimConfig::default()
        })
        .unwrap();
        assert!(d.history.days().iter().all(|day| day.labels()[0]));
    }
}
