//! Forward pass, BCE loss and reverse-mode gradients of the DDS network.
//!
//! For each scored day the forward pass produces, per slot `t`, the
//! probability of continuing after ride `t`,
//! `sigmoid((beta_d^(t-1) * lambda_d - U_{d,t}) / temperature)`. Its target is
//! whether ride `t + 1` was accepted, so the last slot of a day has no target.
//! Latent states are teacher forced: the update into day `d` reads the
//! observed utility total and stop count of day `d - 1`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::model::{self, Activation, DriverHistory, LatentTrajectory, ModelConfig, ModelKind};
use crate::noise::NoiseDraw;
use crate::params::BehaviorParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// Every slot that has a next slot, padding included.
    #[default]
    AllSlots,
    /// Slots up to and including the stop; the padded tail is ignored.
    PrefixPlusOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub temperature: f64,
    pub mask_mode: MaskMode,
    /// Probabilities are clipped to `[p_min, 1 - p_min]` before the log.
    pub p_min: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            mask_mode: MaskMode::AllSlots,
            p_min: 1e-7,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::invalid("temperature", "must be positive and finite"));
        }
        if !(self.p_min > 0.0 && self.p_min < 0.5) {
            return Err(Error::invalid("p_min", "must lie in (0, 0.5)"));
        }
        Ok(())
    }
}

/// Which days contribute loss terms. The latent recurrence always rolls from
/// day one up to the last scored day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossScope {
    All,
    /// Zero-based half-open day range.
    Days {
        start: usize,
        end: usize,
    },
}

impl LossScope {
    pub fn day(d: usize) -> Self {
        LossScope::Days {
            start: d,
            end: d + 1,
        }
    }

    fn bounds(self, days: usize) -> Result<(usize, usize)> {
        match self {
            LossScope::All => Ok((0, days)),
            LossScope::Days { start, end } if start < end && end <= days => Ok((start, end)),
            LossScope::Days { start, end } => Err(Error::Shape(alloc::format!(
                "loss scope {}..{} outside 0..{}",
                start,
                end,
                days
            ))),
        }
    }
}

/// Slot-level intermediates of one scored day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayTrace {
    pub day: usize,
    pub thresholds: Vec<f64>,
    pub cumulative: Vec<f64>,
    /// Clipped continue probabilities.
    pub probs: Vec<f64>,
    /// `targets[t]` is the label of slot `t + 1`.
    pub targets: Vec<bool>,
    pub mask: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardTrace {
    pub params: BehaviorParams,
    pub model: ModelConfig,
    pub loss_config: LossConfig,
    /// Latent states for days `0..=last scored day`.
    pub latent: LatentTrajectory,
    pub days: Vec<DayTrace>,
    pub loss: f64,
    pub scored_slots: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Gradients {
    pub d_a1: f64,
    pub d_a2: f64,
    pub d_b1: f64,
    pub d_b2: f64,
    pub d_lambda0: f64,
    pub d_beta0: f64,
}

impl Gradients {
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.d_a1,
            self.d_a2,
            self.d_b1,
            self.d_b2,
            self.d_lambda0,
            self.d_beta0,
        ]
    }

    pub fn from_array([d_a1, d_a2, d_b1, d_b2, d_lambda0, d_beta0]: [f64; 6]) -> Self {
        Self {
            d_a1,
            d_a2,
            d_b1,
            d_b2,
            d_lambda0,
            d_beta0,
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        let mut out = self.as_array();
        for (o, v) in out.iter_mut().zip(other.as_array()) {
            *o += v;
        }
        *self = Self::from_array(out);
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_array(self.as_array().map(|v| v * factor))
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }

    pub fn without_initial_state(self) -> Self {
        Self {
            d_lambda0: 0.0,
            d_beta0: 0.0,
            ..self
        }
    }

    pub fn without_weights(self) -> Self {
        Self {
            d_a1: 0.0,
            d_a2: 0.0,
            d_b1: 0.0,
            d_b2: 0.0,
            ..self
        }
    }
}

#[inline]
fn clip(p: f64, p_min: f64) -> f64 {
    model::project(p, p_min, 1.0 - p_min)
}

#[inline]
fn bce_term(p: f64, label: bool) -> f64 {
    if label {
        -math::ln(p)
    } else {
        -math::ln_1p(-p)
    }
}

/// Mean binary cross-entropy over masked slots, probabilities clipped to
/// `[p_min, 1 - p_min]`.
pub fn bce_loss(probs: &[f64], labels: &[bool], mask: &[bool], p_min: f64) -> Result<f64> {
    if probs.len() != labels.len() || probs.len() != mask.len() {
        return Err(Error::Shape(alloc::format!(
            "probs {}, labels {}, mask {}",
            probs.len(),
            labels.len(),
            mask.len()
        )));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for ((p, y), m) in probs.iter().zip(labels).zip(mask) {
        if *m {
            sum += bce_term(clip(*p, p_min), *y);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(sum / n as f64)
}

fn day_mask(width: usize, stop_count: usize, mode: MaskMode) -> impl Iterator<Item = bool> {
    let limit = match mode {
        MaskMode::AllSlots => width.saturating_sub(1),
        MaskMode::PrefixPlusOne => stop_count.min(width.saturating_sub(1)),
    };
    (0..width).map(move |t| t < limit)
}

pub fn forward(
    history: &DriverHistory,
    params: &BehaviorParams,
    noise: &NoiseDraw,
    model: &ModelConfig,
    loss: &LossConfig,
) -> Result<ForwardTrace> {
    forward_scoped(history, params, noise, model, loss, LossScope::All)
}

/// Forward pass whose loss covers only the days in `scope`.
pub fn forward_scoped(
    history: &DriverHistory,
    params: &BehaviorParams,
    noise: &NoiseDraw,
    model: &ModelConfig,
    loss: &LossConfig,
    scope: LossScope,
) -> Result<ForwardTrace> {
    model.validate()?;
    loss.validate()?;
    let (start, end) = scope.bounds(history.len())?;
    let latent = model::rollout(params, history, Some(noise), model, end)?;
    let width = history.width();

    let mut days = Vec::with_capacity(end - start);
    let mut sum = 0.0;
    let mut scored = 0usize;
    for d in start..end {
        let day = history.day(d);
        let state = &latent[d];
        let mut thresholds = Vec::with_capacity(width);
        let mut cumulative = Vec::with_capacity(width);
        let mut probs = Vec::with_capacity(width);
        let mut targets = Vec::with_capacity(width);
        let mask: Vec<bool> = day_mask(width, day.stop_count(), loss.mask_mode).collect();

        let mut thr = state.lambda;
        let mut cum = 0.0;
        for (t, u) in day.utilities().iter().enumerate() {
            cum += u;
            let z = (thr - cum) / loss.temperature;
            let p = clip(math::sigmoid(z), loss.p_min);
            let target = day.labels().get(t + 1).copied().unwrap_or(false);
            if !(z.is_finite() && p.is_finite()) {
                return Err(Error::NonFiniteIntermediate {
                    what: "decision probability",
                    day: d,
                    slot: t,
                });
            }
            if mask[t] {
                sum += bce_term(p, target);
                scored += 1;
            }
            thresholds.push(thr);
            cumulative.push(cum);
            probs.push(p);
            targets.push(target);
            thr *= state.beta;
        }
        days.push(DayTrace {
            day: d,
            thresholds,
            cumulative,
            probs,
            targets,
            mask,
        });
    }
    if scored == 0 {
        return Err(Error::EmptyMask);
    }
    let loss_value = sum / scored as f64;
    if !loss_value.is_finite() {
        return Err(Error::NonFiniteIntermediate {
            what: "loss",
            day: end - 1,
            slot: 0,
        });
    }
    Ok(ForwardTrace {
        params: *params,
        model: *model,
        loss_config: *loss,
        latent,
        days,
        loss: loss_value,
        scored_slots: scored,
    })
}

/// Exact gradient of `trace.loss` with respect to the weights and the initial
/// state. A clamped projection passes no gradient, including exactly at a bound.
pub fn backward(
    trace: &ForwardTrace,
    history: &DriverHistory,
    params: &BehaviorParams,
) -> Result<Gradients> {
    if trace.params != *params {
        return Err(Error::TraceMismatch("parameters differ"));
    }
    let rolled = trace.latent.len();
    if rolled == 0 || rolled > history.len() {
        return Err(Error::TraceMismatch(
            "latent length does not fit the history",
        ));
    }
    if trace
        .days
        .iter()
        .any(|d| d.day >= rolled || d.thresholds.len() != history.width())
    {
        return Err(Error::TraceMismatch("day traces do not fit the history"));
    }
    let tau = trace.loss_config.temperature;
    let n = trace.scored_slots as f64;

    // Direct loss sensitivity of each day's (lambda, beta).
    let mut g_lambda = alloc::vec![0.0; rolled];
    let mut g_beta = alloc::vec![0.0; rolled];
    for day in &trace.days {
        let state = &trace.latent[day.day];
        let labels = history.day(day.day).labels();
        if day.targets.len() != labels.len() {
            return Err(Error::TraceMismatch("day width differs"));
        }
        let (lambda, beta) = (state.lambda, state.beta);
        let mut gl = 0.0;
        let mut gb = 0.0;
        // beta^t and beta^(t-1)
        let mut pow = 1.0;
        let mut pow_prev = 0.0;
        for t in 0..day.thresholds.len() {
            if day.mask[t] {
                let z = (day.thresholds[t] - day.cumulative[t]) / tau;
                let raw = math::sigmoid(z);
                let p_min = trace.loss_config.p_min;
                if raw > p_min && raw < 1.0 - p_min {
                    let y = if day.targets[t] { 1.0 } else { 0.0 };
                    let d_thr = (raw - y) / (n * tau);
                    gl += d_thr * pow;
                    if t > 0 {
                        gb += d_thr * (t as f64) * pow_prev * lambda;
                    }
                }
            }
            pow_prev = pow;
            pow *= beta;
        }
        g_lambda[day.day] += gl;
        g_beta[day.day] += gb;
    }

    let mut grads = Gradients::default();
    let mut carry_lambda = 0.0;
    let mut carry_beta = 0.0;
    for d in (1..rolled).rev() {
        let gl = g_lambda[d] + carry_lambda;
        let gb = g_beta[d] + carry_beta;
        match trace.model.kind {
            ModelKind::Ds | ModelKind::S => {
                carry_lambda = gl;
                carry_beta = gb;
            }
            ModelKind::Dds => {
                let state = &trace.latent[d];
                let prev = &trace.latent[d - 1];
                let prev_day = history.day(d - 1);
                let gl_pre = if state.lambda_clamped { 0.0 } else { gl };
                let gb_pre = if state.beta_clamped {
                    0.0
                } else {
                    match trace.model.activation {
                        Activation::Clamp => gb,
                        Activation::Smooth => gb * state.beta * (1.0 - state.beta),
                    }
                };
                grads.d_a1 += gl_pre * prev.lambda;
                grads.d_a2 += gl_pre * prev_day.feedback_utility(trace.model.utility_feedback);
                grads.d_b1 += gb_pre * prev.beta;
                grads.d_b2 += gb_pre * math::exp(-(prev_day.stop_count() as f64));
                carry_lambda = gl_pre * params.a1;
                carry_beta = gb_pre * params.b1;
            }
        }
    }
    grads.d_lambda0 = g_lambda[0] + carry_lambda;
    grads.d_beta0 = match trace.model.kind {
        ModelKind::S => 0.0,
        ModelKind::Dds | ModelKind::Ds => g_beta[0] + carry_beta,
    };
    if !grads.is_finite() {
        return Err(Error::NonFiniteIntermediate {
            what: "gradient",
            day: 0,
            slot: 0,
        });
    }
    Ok(grads)
}

/// Central finite differences of the scoped loss in every coordinate, with the
/// noise held fixed.
#[allow(clippy::too_many_arguments)]
pub fn finite_diff_gradients(
    history: &DriverHistory,
    params: &BehaviorParams,
    noise: &NoiseDraw,
    model: &ModelConfig,
    loss: &LossConfig,
    scope: LossScope,
    step: f64,
) -> Result<Gradients> {
    if step.is_nan() || step <= 0.0 {
        return Err(Error::invalid("step", "must be > 0"));
    }
    let coords = [
        params.a1,
        params.a2,
        params.b1,
        params.b2,
        params.lambda0,
        params.beta0,
    ];
    let at = |values: [f64; 6]| -> Result<f64> {
        let [a1, a2, b1, b2, lambda0, beta0] = values;
        let p = BehaviorParams {
            a1,
            a2,
            b1,
            b2,
            lambda0,
            beta0,
        };
        Ok(forward_scoped(history, &p, noise, model, loss, scope)?.loss)
    };
    let mut out = [0.0; 6];
    for i in 0..6 {
        let mut plus = coords;
        let mut minus = coords;
        plus[i] += step;
        minus[i] -= step;
        out[i] = (at(plus)? - at(minus)?) / (2.0 * step);
    }
    Ok(Gradients::from_array(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DaySequence, UtilityFeedback};
    use alloc::vec;

    fn history(days: &[(&[f64], usize)]) -> DriverHistory {
        DriverHistory::new(
            days.iter()
                .map(|(u, s)| DaySequence::from_stop(u.to_vec(), *s).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn bce_examples() {
        let l = bce_loss(&[0.5, 0.5], &[true, false], &[true, true], 1e-7).unwrap();
        assert!((l - core::f64::consts::LN_2).abs() < 1e-15);
        let l = bce_loss(&[0.9, 0.1], &[true, false], &[true, true], 1e-7).unwrap();
        assert!((l - 0.105_360_515_657_826_3).abs() < 1e-12);
        let exact = bce_loss(&[1.0, 0.0], &[true, false], &[true, true], 1e-7).unwrap();
        assert!(exact < 1.1e-7);
        assert_eq!(
            bce_loss(&[0.3], &[true], &[false], 1e-7),
            Err(Error::EmptyMask)
        );
        assert!(bce_loss(&[0.3], &[true, false], &[true], 1e-7).is_err());
    }

    #[test]
    fn single_scored_slot_at_even_odds() {
        // lambda0 = 5 equals the first utility, so the first slot sits at p = 1/2
        // and its target (second ride accepted) is 1.
        let h = history(&[(&[5.0, 1.0], 2)]);
        let p = BehaviorParams::new(0.8, 0.2, 0.8, 0.2, 5.0, 0.9).unwrap();
        let trace = forward(
            &h,
            &p,
            &NoiseDraw::zeros(1),
            &ModelConfig::default(),
            &LossConfig::default(),
        )
        .unwrap();
        assert_eq!(trace.scored_slots, 1);
        assert_eq!(trace.days[0].probs[0], 0.5);
        assert!((trace.loss - core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn near_perfect_margins_give_near_zero_loss() {
        // Stops at ride 3: thresholds far above the running sum before it and far
        // below from ride 3 on.
        let h = history(&[(&[1.0, 1.0, 500.0, 1.0, 1.0], 3)]);
        let p = BehaviorParams::new(1.0, 0.0, 1.0, 0.0, 200.0, 1.0).unwrap();
        let trace = forward(
            &h,
            &p,
            &NoiseDraw::zeros(1),
            &ModelConfig::default(),
            &LossConfig::default(),
        )
        .unwrap();
        assert!(trace.loss < 1e-6, "loss {}", trace.loss);
    }

    #[test]
    fn second_day_thresholds_follow_the_updates() {
        let rides = [6.0, 4.0, 2.0, 0.0, 9.0];
        let h = history(&[(&rides, 4), (&rides, 2)]);
        let p = BehaviorParams::new(0.8, 0.2, 0.8, 0.2, 15.0, 0.9).unwrap();
        let model = ModelConfig {
            utility_feedback: UtilityFeedback::FullDay,
            ..ModelConfig::default()
        };
        let trace = forward(&h, &p, &NoiseDraw::zeros(2), &model, &LossConfig::default()).unwrap();
        let lambda = 16.2;
        let beta = 0.72 + 0.2 * libm::exp(-4.0);
        let thr = &trace.days[1].thresholds;
        assert!((thr[0] - lambda).abs() < 1e-12);
        assert!((thr[1] - lambda * beta).abs() < 1e-12);
        assert!((thr[2] - lambda * beta * beta).abs() < 1e-12);
    }

    #[test]
    fn mask_modes() {
        let h = history(&[(&[1.0, 2.0, 3.0, 4.0, 5.0], 2)]);
        let p = BehaviorParams::new(0.8, 0.2, 0.8, 0.2, 3.0, 0.9).unwrap();
        let run = |mode| {
            let loss = LossConfig {
                mask_mode: mode,
                ..LossConfig::default()
            };
            forward(&h, &p, &NoiseDraw::zeros(1), &ModelConfig::default(), &loss).unwrap()
        };
        assert_eq!(
            run(MaskMode::AllSlots).days[0].mask,
            vec![true, true, true, true, false]
        );
        assert_eq!(
            run(MaskMode::PrefixPlusOne).days[0].mask,
            vec![true, true, false, false, false]
        );
        assert_eq!(
            run(MaskMode::AllSlots).days[0].targets,
            vec![true, false, false, false, false]
        );
    }

    #[test]
    fn single_day_has_no_weight_gradient() {
        let h = history(&[(&[2.0, 2.0, 2.0, 2.0], 3)]);
        let p = BehaviorParams::new(0.8, 0.2, 0.8, 0.2, 5.0, 0.8).unwrap();
        let model = ModelConfig::default();
        let loss = LossConfig::default();
        let trace = forward(&h, &p, &NoiseDraw::zeros(1), &model, &loss).unwrap();
        let g = backward(&trace, &h, &p).unwrap();
        assert_eq!([g.d_a1, g.d_a2, g.d_b1, g.d_b2], [0.0; 4]);
        assert!(g.d_lambda0 != 0.0);
    }

    #[test]
    fn clamped_days_block_gradient() {
        // Large negative noise pins every later target at zero.
        let h = history(&[
            (&[2.0, 2.0, 2.0], 2),
            (&[2.0, 2.0, 2.0], 1),
            (&[2.0, 2.0, 2.0], 1),
        ]);
        let p = BehaviorParams::new(0.8, 0.2, 1.0, 0.0, 5.0, 0.8).unwrap();
        let noise = NoiseDraw {
            eps: vec![0.0, -100.0, -100.0],
            eta: vec![0.0, 5.0, 5.0],
        };
        let model = ModelConfig::default();
        let loss = LossConfig::default();
        let trace = forward_scoped(
            &h,
            &p,
            &noise,
            &model,
            &loss,
            LossScope::Days { start: 1, end: 3 },
        )
        .unwrap();
        assert!(trace.latent[1].lambda_clamped && trace.latent[2].lambda_clamped);
        assert!(trace.latent[1].beta_clamped && trace.latent[2].beta_clamped);
        let g = backward(&trace, &h, &p).unwrap();
        assert_eq!(g.as_array(), [0.0; 6]);
    }

    #[test]
    fn backward_rejects_other_params() {
        let h = history(&[(&[2.0, 2.0, 2.0], 2)]);
        let p = BehaviorParams::new(0.8, 0.2, 0.8, 0.2, 5.0, 0.8).unwrap();
        let trace = forward(
            &h,
            &p,
            &NoiseDraw::zeros(1),
            &ModelConfig::default(),
            &LossConfig::default(),
        )
        .unwrap();
        let other = BehaviorParams { a1: 0.7, ..p };
        assert_eq!(
            backward(&trace, &h, &other),
            Err(Error::TraceMismatch("parameters differ"))
        );
    }

    #[test]
    fn scope_is_checked() {
        let h = history(&[(&[2.0, 2.0], 1)]);
        let p = BehaviorParams::new(0.8, 0.2, 0.8, 0.2, 5.0, 0.8).unwrap();
        let r = forward_scoped(
            &h,
            &p,
            &NoiseDraw::zeros(1),
            &ModelConfig::default(),
            &LossConfig::default(),
            LossScope::Days { start: 0, end: 2 },
        );
        assert!(r.is_err());
    }
}
