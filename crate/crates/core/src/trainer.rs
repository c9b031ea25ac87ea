//! Sampled backpropagation through time.
//!
//! Each update averages the gradient over `samples` independent noise draws
//! before a plain gradient step. In the default per-day mode the days are
//! visited from last to first and each day's loss gets its own update; the
//! latent recurrence still rolls from day one with teacher forcing.

use alloc::vec::Vec;
use core::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradient::{backward, forward_scoped, Gradients, LossConfig, LossScope, MaskMode};
use crate::math;
use crate::model::{self, continues, DriverHistory, ModelConfig, ModelKind};
use crate::noise::NoiseDraw;
use crate::params::BehaviorParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    /// One update per day, days in reverse order.
    #[default]
    PerDayReverse,
    /// One update per epoch from the sum of the per-day gradients.
    FullBatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub samples: usize,
    pub epochs: usize,
    pub temperature: f64,
    pub noise_std_eps: f64,
    pub noise_std_eta: f64,
    pub seed: u64,
    pub update_mode: UpdateMode,
    pub train_initial_state: bool,
    /// Keep `(a1, a2, b1, b2)` at their initial values.
    pub freeze_weights: bool,
    /// Draw the `samples` noise vectors once per epoch instead of per day.
    pub freeze_noise_per_epoch: bool,
    pub mask_mode: MaskMode,
    pub p_min: f64,
    pub model: ModelConfig,
    /// Starting point of the descent.
    pub init: BehaviorParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            samples: 32,
            epochs: 20,
            temperature: 1.0,
            noise_std_eps: 1.0,
            noise_std_eta: 1.0,
            seed: 0,
            update_mode: UpdateMode::PerDayReverse,
            train_initial_state: true,
            freeze_weights: false,
            freeze_noise_per_epoch: false,
            mask_mode: MaskMode::AllSlots,
            p_min: 1e-7,
            model: ModelConfig::default(),
            // With a1 + a2 = 1 the target's fixed point is the daily total.
            init: BehaviorParams {
                a1: 0.5,
                a2: 0.5,
                b1: 0.5,
                b2: 0.5,
                lambda0: 50.0,
                beta0: 0.9,
            },
        }
    }
}

impl TrainConfig {
    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            temperature: self.temperature,
            mask_mode: self.mask_mode,
            p_min: self.p_min,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(
                "learning_rate",
                "must be positive and finite",
            ));
        }
        if self.samples == 0 {
            return Err(Error::invalid("samples", "must be >= 1"));
        }
        for (name, v) in [
            ("noise_std_eps", self.noise_std_eps),
            ("noise_std_eta", self.noise_std_eta),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be >= 0 and finite"));
            }
        }
        self.loss_config().validate()?;
        self.model.validate()?;
        self.init.validate()
    }

    /// The discounted-satisficing restriction of this configuration: frozen
    /// identity weights, no noise, trainable initial state.
    pub fn ds_restricted(&self) -> Self {
        Self {
            noise_std_eps: 0.0,
            noise_std_eta: 0.0,
            train_initial_state: true,
            freeze_weights: true,
            model: ModelConfig {
                kind: ModelKind::Ds,
                ..self.model
            },
            init: self.init.with_weights([1.0, 0.0, 1.0, 0.0]),
            ..self.clone()
        }
    }
}

/// A history and the number of leading days used for training. The rest, if
/// any, is the test split.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainData {
    pub history: DriverHistory,
    pub train_days: usize,
}

impl TrainData {
    pub fn new(history: DriverHistory, train_days: usize) -> Result<Self> {
        if train_days == 0 || train_days > history.len() {
            return Err(Error::invalid("train_days", "must lie in 1..=days"));
        }
        Ok(Self {
            history,
            train_days,
        })
    }

    pub fn train_only(history: DriverHistory) -> Self {
        let train_days = history.len();
        Self {
            history,
            train_days,
        }
    }

    fn test_range(&self) -> Option<Range<usize>> {
        (self.train_days < self.history.len()).then(|| self.train_days..self.history.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    /// BCE of the zero-noise rollout.
    pub loss: f64,
    /// Fraction of scored slots whose continue decision matches the next label.
    pub decision_accuracy: f64,
    /// Fraction of days whose predicted stop equals the observed one.
    pub stop_exact: f64,
    /// Mean absolute error of the predicted stop, in rides.
    pub stop_mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train: SplitMetrics,
    pub test: Option<SplitMetrics>,
    /// Mean absolute gap between learned and generator zero-noise targets.
    pub lambda_error: Option<f64>,
    pub beta_error: Option<f64>,
    pub params: BehaviorParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub train_days: usize,
    pub test_days: usize,
    pub epochs: Vec<EpochRecord>,
    pub final_params: BehaviorParams,
}

/// Zero-noise evaluation of `params` on `days`, rolling the latent state from
/// day one.
pub fn evaluate(
    params: &BehaviorParams,
    history: &DriverHistory,
    days: Range<usize>,
    model: &ModelConfig,
    loss: &LossConfig,
) -> Result<SplitMetrics> {
    let noise = NoiseDraw::zeros(days.end);
    let trace = forward_scoped(
        history,
        params,
        &noise,
        model,
        loss,
        LossScope::Days {
            start: days.start,
            end: days.end,
        },
    )?;
    let mut correct = 0usize;
    let mut exact = 0usize;
    let mut abs_err = 0.0;
    for day in &trace.days {
        for t in 0..day.thresholds.len() {
            if day.mask[t] {
                let predicted = continues(day.thresholds[t] - day.cumulative[t]);
                if predicted == day.targets[t] {
                    correct += 1;
                }
            }
        }
        let observed = history.day(day.day).stop_count();
        let state = &trace.latent[day.day];
        let predicted =
            model::stopping_task(history.day(day.day).utilities(), state.lambda, state.beta)
                .unwrap_or(history.width());
        if predicted == observed {
            exact += 1;
        }
        abs_err += math::abs(predicted as f64 - observed as f64);
    }
    let n_days = trace.days.len() as f64;
    Ok(SplitMetrics {
        loss: trace.loss,
        decision_accuracy: correct as f64 / trace.scored_slots as f64,
        stop_exact: exact as f64 / n_days,
        stop_mae: abs_err / n_days,
    })
}

/// Stop predicted for day `day_index` from the continue rule, with a zero-noise
/// latent state teacher forced on the preceding days. Returns the width when
/// the driver never stops.
pub fn predict_stop(
    params: &BehaviorParams,
    day_index: usize,
    history: &DriverHistory,
    model: &ModelConfig,
) -> Result<usize> {
    if day_index >= history.len() {
        return Err(Error::Shape(alloc::format!(
            "day {} outside a {}-day history",
            day_index,
            history.len()
        )));
    }
    let latent = model::rollout(params, history, None, model, day_index + 1)?;
    let state = &latent[day_index];
    let mut cumulative = 0.0;
    let mut thr = state.lambda;
    for (i, u) in history.day(day_index).utilities().iter().enumerate() {
        cumulative += u;
        if !continues(thr - cumulative) {
            return Ok(i + 1);
        }
        thr *= state.beta;
    }
    Ok(history.width())
}

fn latent_errors(
    params: &BehaviorParams,
    truth: &BehaviorParams,
    history: &DriverHistory,
    model: &ModelConfig,
) -> Result<(f64, f64)> {
    let learned = model::rollout(params, history, None, model, history.len())?;
    let generator = model::rollout(truth, history, None, model, history.len())?;
    let n = history.len() as f64;
    let (mut dl, mut db) = (0.0, 0.0);
    for (a, b) in learned.iter().zip(generator.iter()) {
        dl += math::abs(a.lambda - b.lambda);
        db += math::abs(a.beta - b.beta);
    }
    Ok((dl / n, db / n))
}

struct Learner<'a> {
    history: &'a DriverHistory,
    config: &'a TrainConfig,
    loss: LossConfig,
    rng: ChaCha8Rng,
    params: BehaviorParams,
}

impl Learner<'_> {
    fn draw(&mut self) -> NoiseDraw {
        NoiseDraw::sample(
            &mut self.rng,
            self.history.len(),
            self.config.noise_std_eps,
            self.config.noise_std_eta,
        )
    }

    /// Gradient of day `d`'s loss averaged over the sample draws, or `None`
    /// when the day has nothing to score.
    fn day_gradient(
        &mut self,
        d: usize,
        frozen: Option<&[NoiseDraw]>,
        epoch: usize,
    ) -> Result<Option<Gradients>> {
        let samples = self.config.samples;
        let mut sum = Gradients::default();
        for r in 0..samples {
            let fresh;
            let noise = match frozen {
                Some(draws) => &draws[r],
                None => {
                    fresh = self.draw();
                    &fresh
                }
            };
            let trace = match forward_scoped(
                self.history,
                &self.params,
                noise,
                &self.config.model,
                &self.loss,
                LossScope::day(d),
            ) {
                Ok(t) => t,
                Err(Error::EmptyMask) => return Ok(None),
                Err(Error::NonFiniteIntermediate { .. } | Error::NonFinite { .. }) => {
                    return Err(Error::Diverged {
                        epoch,
                        day: d,
                        loss: f64::NAN,
                    })
                }
                Err(e) => return Err(e),
            };
            if !trace.loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    day: d,
                    loss: trace.loss,
                });
            }
            sum.add_assign(&backward(&trace, self.history, &self.params)?);
        }
        Ok(Some(sum.scaled(1.0 / samples as f64)))
    }

    fn apply(&mut self, grads: Gradients, epoch: usize, day: usize) -> Result<()> {
        let mut g = grads;
        if self.config.freeze_weights {
            g = g.without_weights();
        }
        if !self.config.train_initial_state {
            g = g.without_initial_state();
        }
        if !g.is_finite() {
            return Err(Error::Diverged {
                epoch,
                day,
                loss: f64::NAN,
            });
        }
        let lr = self.config.learning_rate;
        let p = &mut self.params;
        p.a1 -= lr * g.d_a1;
        p.a2 -= lr * g.d_a2;
        p.b1 -= lr * g.d_b1;
        p.b2 -= lr * g.d_b2;
        p.lambda0 = model::project(p.lambda0 - lr * g.d_lambda0, 0.0, f64::INFINITY);
        p.beta0 = model::project(p.beta0 - lr * g.d_beta0, self.config.model.beta_min, 1.0);
        if p.weights()
            .iter()
            .chain([&p.lambda0])
            .any(|v| !v.is_finite())
        {
            return Err(Error::Diverged {
                epoch,
                day,
                loss: f64::NAN,
            });
        }
        Ok(())
    }
}

/// Train with sampled BPTT. `truth`, when given, is the generator used to
/// score latent-trajectory recovery each epoch.
pub fn sbptt_train(
    data: &TrainData,
    config: &TrainConfig,
    truth: Option<&BehaviorParams>,
) -> Result<TrainReport> {
    config.validate()?;
    let train = data.history.slice(0..data.train_days)?;
    let mut init = config.init;
    if config.model.kind == ModelKind::S {
        init.beta0 = 1.0;
    }
    let mut learner = Learner {
        history: &train,
        config,
        loss: config.loss_config(),
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        params: init,
    };
    let loss_cfg = config.loss_config();
    let mut epochs = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let frozen: Option<Vec<NoiseDraw>> = config
            .freeze_noise_per_epoch
            .then(|| (0..config.samples).map(|_| learner.draw()).collect());

        match config.update_mode {
            UpdateMode::PerDayReverse => {
                for d in (0..data.train_days).rev() {
                    if let Some(g) = learner.day_gradient(d, frozen.as_deref(), epoch)? {
                        learner.apply(g, epoch, d)?;
                    }
                }
            }
            UpdateMode::FullBatch => {
                let mut total = Gradients::default();
                for d in (0..data.train_days).rev() {
                    if let Some(g) = learner.day_gradient(d, frozen.as_deref(), epoch)? {
                        total.add_assign(&g);
                    }
                }
                learner.apply(total, epoch, 0)?;
            }
        }

        let params = learner.params;
        let diverged = |e: Error| match e {
            Error::NonFinite { .. } | Error::NonFiniteIntermediate { .. } => Error::Diverged {
                epoch,
                day: 0,
                loss: f64::NAN,
            },
            other => other,
        };
        let train_metrics = evaluate(
            &params,
            &data.history,
            0..data.train_days,
            &config.model,
            &loss_cfg,
        )
        .map_err(diverged)?;
        if !train_metrics.loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                day: 0,
                loss: train_metrics.loss,
            });
        }
        let test_metrics = match data.test_range() {
            Some(range) => Some(
                evaluate(&params, &data.history, range, &config.model, &loss_cfg)
                    .map_err(diverged)?,
            ),
            None => None,
        };
        let (lambda_error, beta_error) = match truth {
            Some(t) => {
                let (l, b) =
                    latent_errors(&params, t, &data.history, &config.model).map_err(diverged)?;
                (Some(l), Some(b))
            }
            None => (None, None),
        };
        epochs.push(EpochRecord {
            epoch,
            train: train_metrics,
            test: test_metrics,
            lambda_error,
            beta_error,
            params,
        });
    }

    Ok(TrainReport {
        config: config.clone(),
        train_days: data.train_days,
        test_days: data.history.len() - data.train_days,
        epochs,
        final_params: learner.params,
    })
}

/// Discounted-satisficing baseline: the same trainer with identity weights
/// frozen, no noise and a trainable `(lambda0, beta0)`.
pub fn train_ds_baseline(data: &TrainData, config: &TrainConfig) -> Result<TrainReport> {
    sbptt_train(data, &config.ds_restricted(), None)
}

/// Gradient averaged over `noises` for the loss of `scope`, summed in draw order.
pub fn averaged_gradient(
    history: &DriverHistory,
    params: &BehaviorParams,
    noises: &[NoiseDraw],
    model: &ModelConfig,
    loss: &LossConfig,
    scope: LossScope,
) -> Result<Gradients> {
    if noises.is_empty() {
        return Err(Error::invalid("samples", "must be >= 1"));
    }
    let mut sum = Gradients::default();
    for noise in noises {
        let trace = forward_scoped(history, params, noise, model, loss, scope)?;
        sum.add_assign(&backward(&trace, history, params)?);
    }
    Ok(sum.scaled(1.0 / noises.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DaySequence;
    use alloc::vec;

    fn history() -> DriverHistory {
        DriverHistory::new(vec![
            DaySequence::from_stop(vec![6.0, 4.0, 2.0, 0.0, 9.0], 4).unwrap(),
            DaySequence::from_stop(vec![6.0, 4.0, 2.0, 0.0, 9.0], 2).unwrap(),
            DaySequence::from_stop(vec![1.0, 1.0, 1.0, 1.0, 1.0], 5).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn train_data_bounds() {
        assert!(TrainData::new(history(), 0).is_err());
        assert!(TrainData::new(history(), 4).is_err());
        let data = TrainData::new(history(), 2).unwrap();
        assert_eq!(data.test_range(), Some(2..3));
        assert_eq!(TrainData::train_only(history()).test_range(), None);
    }

    #[test]
    fn restriction_freezes_identity_weights() {
        let ds = TrainConfig::default().ds_restricted();
        assert_eq!(ds.init.weights(), [1.0, 0.0, 1.0, 0.0]);
        assert!(ds.freeze_weights && ds.train_initial_state);
        assert_eq!((ds.noise_std_eps, ds.noise_std_eta), (0.0, 0.0));
        assert_eq!(ds.model.kind, ModelKind::Ds);
    }

    #[test]
    fn predict_stop_on_the_worked_day() {
        let params = BehaviorParams::new(0.8, 0.2, 0.8, 0.2, 15.0, 0.9).unwrap();
        let model = ModelConfig::default();
        assert_eq!(predict_stop(&params, 0, &history(), &model).unwrap(), 4);
        assert!(predict_stop(&params, 3, &history(), &model).is_err());
        let never = BehaviorParams::discounted_satisficing(1e9, 1.0).unwrap();
        assert_eq!(predict_stop(&never, 2, &history(), &model).unwrap(), 5);
    }

    #[test]
    fn satisficing_runs_keep_beta_at_one() {
        let config = TrainConfig {
            samples: 2,
            epochs: 2,
            learning_rate: 1e-3,
            model: ModelConfig {
                kind: ModelKind::S,
                ..ModelConfig::default()
            },
            ..TrainConfig::default()
        };
        let report = sbptt_train(&TrainData::train_only(history()), &config, None).unwrap();
        assert_eq!(report.final_params.beta0, 1.0);
        assert_eq!(report.epochs.len(), 2);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let data = TrainData::train_only(history());
        let zero_samples = TrainConfig {
            samples: 0,
            ..TrainConfig::default()
        };
        assert!(sbptt_train(&data, &zero_samples, None).is_err());
        let bad_rate = TrainConfig {
            learning_rate: -1.0,
            ..TrainConfig::default()
        };
        assert!(sbptt_train(&data, &bad_rate, None).is_err());
    }
}
