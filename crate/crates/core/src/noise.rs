use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Per-day additive noise for the target (`eps`) and discount (`eta`)
/// recurrences. Values are stored already scaled by their standard deviation.
///
/// Entry 0 belongs to day one, which uses the initial state verbatim, so it is
/// never read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseDraw {
    pub eps: Vec<f64>,
    pub eta: Vec<f64>,
}

impl NoiseDraw {
    pub fn zeros(days: usize) -> Self {
        Self {
            eps: alloc::vec![0.0; days],
            eta: alloc::vec![0.0; days],
        }
    }

    /// Draws `eps ~ N(0, std_eps^2)` and `eta ~ N(0, std_eta^2)` for `days` days.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, days: usize, std_eps: f64, std_eta: f64) -> Self {
        let mut eps = Vec::with_capacity(days);
        let mut eta = Vec::with_capacity(days);
        for _ in 0..days {
            let e: f64 = rng.sample(StandardNormal);
            let h: f64 = rng.sample(StandardNormal);
            eps.push(std_eps * e);
            eta.push(std_eta * h);
        }
        Self { eps, eta }
    }

    pub fn len(&self) -> usize {
        self.eps.len().min(self.eta.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
