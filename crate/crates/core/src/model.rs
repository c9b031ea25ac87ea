//! Satisficing, discounted satisficing and dynamic discounted satisficing.
//!
//! Day `d` has a target `lambda_d >= 0` and a discount `beta_d` in `[beta_min, 1]`.
//! The threshold for the `t`-th ride is `beta_d^(t-1) * lambda_d`; the driver
//! stops at the first ride whose accumulated utility reaches it. From day two
//! on the latent state follows
//!
//! ```text
//! lambda_d = P[0, inf)( a1 * lambda_{d-1} + a2 * U_{d-1} + eps_d )
//! beta_d   = P[beta_min, 1]( b1 * beta_{d-1} + b2 * exp(-T_{d-1}) + eta_d )
//! ```
//!
//! where `U_{d-1}` and `T_{d-1}` are the previous day's utility total and stop
//! count. Day one uses `(lambda0, beta0)` as given.

use alloc::string::ToString;
use alloc::vec::Vec;
use core::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};
use crate::math;
use crate::noise::NoiseDraw;
use crate::params::BehaviorParams;

/// Nonlinearity applied to the pre-activation of the latent recurrences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// Hard projection onto `[0, inf)` and `[beta_min, 1]`.
    #[default]
    Clamp,
    /// ReLU for the target, logistic for the discount (floored at `beta_min`).
    Smooth,
}

/// Which utility total of the previous day feeds the target recurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityFeedback {
    /// Utility of the accepted rides only.
    #[default]
    Accepted,
    /// Utility of every offered slot of the day.
    FullDay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Dynamic discounted satisficing.
    #[default]
    Dds,
    /// Discounted satisficing: `(lambda0, beta0)` every day.
    Ds,
    /// Satisficing: constant threshold `lambda0`.
    S,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub beta_min: f64,
    pub activation: Activation,
    pub utility_feedback: UtilityFeedback,
    pub kind: ModelKind,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            beta_min: 1e-6,
            activation: Activation::Clamp,
            utility_feedback: UtilityFeedback::Accepted,
            kind: ModelKind::Dds,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_min > 0.0 && self.beta_min <= 1.0) {
            return Err(Error::invalid("beta_min", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Result of a projected affine update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projected {
    pub value: f64,
    pub pre: f64,
    /// The pre-activation sits on or beyond a bound; no gradient passes.
    pub clamped: bool,
}

/// Clamp `x` onto `[lo, hi]`. `hi` may be `f64::INFINITY`.
#[inline]
pub fn project(x: f64, lo: f64, hi: f64) -> f64 {
    debug_assert!(lo <= hi);
    if x <= lo {
        lo
    } else if x >= hi {
        hi
    } else {
        x
    }
}

pub fn update_lambda(
    prev_lambda: f64,
    prev_total_utility: f64,
    eps: f64,
    params: &BehaviorParams,
) -> Result<Projected> {
    check_finite("prev_lambda", prev_lambda)?;
    check_finite("prev_total_utility", prev_total_utility)?;
    check_finite("eps", eps)?;
    if prev_lambda < 0.0 {
        return Err(Error::invalid("prev_lambda", "must be >= 0"));
    }
    let pre = params.a1 * prev_lambda + params.a2 * prev_total_utility + eps;
    check_finite("lambda_pre", pre)?;
    Ok(Projected {
        value: project(pre, 0.0, f64::INFINITY),
        pre,
        clamped: pre <= 0.0,
    })
}

pub fn update_beta(
    prev_beta: f64,
    prev_stop_count: usize,
    eta: f64,
    params: &BehaviorParams,
    config: &ModelConfig,
) -> Result<Projected> {
    check_finite("prev_beta", prev_beta)?;
    check_finite("eta", eta)?;
    if !(prev_beta > 0.0 && prev_beta <= 1.0) {
        return Err(Error::invalid("prev_beta", "must lie in (0, 1]"));
    }
    if prev_stop_count == 0 {
        return Err(Error::invalid("prev_stop_count", "must be >= 1"));
    }
    let fatigue = math::exp(-(prev_stop_count as f64));
    let pre = params.b1 * prev_beta + params.b2 * fatigue + eta;
    check_finite("beta_pre", pre)?;
    Ok(match config.activation {
        Activation::Clamp => Projected {
            value: project(pre, config.beta_min, 1.0),
            pre,
            clamped: pre <= config.beta_min || pre >= 1.0,
        },
        Activation::Smooth => {
            let s = math::sigmoid(pre);
            if s <= config.beta_min {
                Projected {
                    value: config.beta_min,
                    pre,
                    clamped: true,
                }
            } else {
                Projected {
                    value: s,
                    pre,
                    clamped: false,
                }
            }
        }
    })
}

/// `beta^(t-1) * lambda` for 1-based `t`, built by repeated multiplication so
/// it matches the running thresholds used everywhere else bit for bit.
pub fn threshold(lambda: f64, beta: f64, t: usize) -> f64 {
    debug_assert!(t >= 1);
    let mut thr = lambda;
    for _ in 1..t {
        thr *= beta;
    }
    thr
}

/// Smallest 1-based `t` whose accumulated utility reaches `beta^(t-1) * lambda`,
/// or `None` when no offered slot satisfies the threshold.
pub fn stopping_task(utilities: &[f64], lambda: f64, beta: f64) -> Option<usize> {
    debug_assert!(lambda >= 0.0 && beta > 0.0 && beta <= 1.0);
    let mut cumulative = 0.0;
    let mut thr = lambda;
    for (i, u) in utilities.iter().enumerate() {
        cumulative += u;
        if cumulative >= thr {
            return Some(i + 1);
        }
        thr *= beta;
    }
    None
}

/// Probability of continuing after ride `t`:
/// `sigmoid((beta^(t-1) * lambda - cumulative) / temperature)`.
///
/// The driver continues iff the margin is strictly positive, i.e. the
/// probability is strictly above one half. A margin of exactly zero stops.
pub fn decision_probability(
    lambda: f64,
    beta: f64,
    t: usize,
    cumulative_utility: f64,
    temperature: f64,
) -> f64 {
    debug_assert!(temperature > 0.0);
    math::sigmoid((threshold(lambda, beta, t) - cumulative_utility) / temperature)
}

/// Continue rule on the margin `threshold - cumulative`.
#[inline]
pub fn continues(margin: f64) -> bool {
    margin > 0.0
}

/// One observed (or simulated) day of ride offers and decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaySequence {
    utilities: Vec<f64>,
    labels: Vec<bool>,
    stop_count: usize,
    total_utility: f64,
}

impl DaySequence {
    pub fn new(utilities: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if utilities.is_empty() {
            return Err(Error::Shape("day has no slots".to_string()));
        }
        if utilities.len() != labels.len() {
            return Err(Error::Shape(alloc::format!(
                "{} utilities but {} labels",
                utilities.len(),
                labels.len()
            )));
        }
        for u in &utilities {
            check_finite("utility", *u)?;
            if *u < 0.0 {
                return Err(Error::invalid("utility", "must be >= 0"));
            }
        }
        let stop_count = labels.iter().take_while(|l| **l).count();
        if labels[stop_count..].iter().any(|l| *l) {
            return Err(Error::invalid("labels", "must be a prefix of ones"));
        }
        if stop_count == 0 {
            return Err(Error::invalid(
                "labels",
                "the first ride of a day is always accepted",
            ));
        }
        let total_utility = utilities[..stop_count].iter().sum();
        Ok(Self {
            utilities,
            labels,
            stop_count,
            total_utility,
        })
    }

    pub fn from_stop(utilities: Vec<f64>, stop_count: usize) -> Result<Self> {
        let labels = (0..utilities.len()).map(|i| i < stop_count).collect();
        Self::new(utilities, labels)
    }

    pub fn utilities(&self) -> &[f64] {
        &self.utilities
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn stop_count(&self) -> usize {
        self.stop_count
    }

    pub fn total_utility(&self) -> f64 {
        self.total_utility
    }

    pub fn width(&self) -> usize {
        self.utilities.len()
    }

    pub fn full_day_utility(&self) -> f64 {
        self.utilities.iter().sum()
    }

    pub fn feedback_utility(&self, mode: UtilityFeedback) -> f64 {
        match mode {
            UtilityFeedback::Accepted => self.total_utility,
            UtilityFeedback::FullDay => self.full_day_utility(),
        }
    }
}

/// A driver's days, all padded to the same width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverHistory {
    days: Vec<DaySequence>,
    width: usize,
}

impl DriverHistory {
    pub fn new(days: Vec<DaySequence>) -> Result<Self> {
        let width = days
            .first()
            .map(DaySequence::width)
            .ok_or_else(|| Error::Shape("history has no days".to_string()))?;
        if let Some((i, _)) = days.iter().enumerate().find(|(_, d)| d.width() != width) {
            return Err(Error::InvalidDay {
                day: i,
                reason: alloc::format!("width {} differs from {}", days[i].width(), width),
            });
        }
        Ok(Self { days, width })
    }

    pub fn days(&self) -> &[DaySequence] {
        &self.days
    }

    pub fn day(&self, index: usize) -> &DaySequence {
        &self.days[index]
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    /// Days `range` as a history of their own.
    pub fn slice(&self, range: core::ops::Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.days.len() {
            return Err(Error::Shape(alloc::format!(
                "day range {}..{} out of 0..{}",
                range.start,
                range.end,
                self.days.len()
            )));
        }
        Self::new(self.days[range].to_vec())
    }

    pub fn stop_counts(&self) -> Vec<usize> {
        self.days.iter().map(DaySequence::stop_count).collect()
    }
}

/// Latent state of one day, with the pre-activation values kept for
/// reverse-mode differentiation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentState {
    pub lambda: f64,
    pub beta: f64,
    pub lambda_pre: f64,
    pub beta_pre: f64,
    pub lambda_clamped: bool,
    pub beta_clamped: bool,
}

impl LatentState {
    fn fixed(lambda: f64, beta: f64) -> Self {
        Self {
            lambda,
            beta,
            lambda_pre: lambda,
            beta_pre: beta,
            lambda_clamped: false,
            beta_clamped: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LatentTrajectory(pub Vec<LatentState>);

impl LatentTrajectory {
    pub fn lambdas(&self) -> Vec<f64> {
        self.0.iter().map(|s| s.lambda).collect()
    }

    pub fn betas(&self) -> Vec<f64> {
        self.0.iter().map(|s| s.beta).collect()
    }
}

impl Deref for LatentTrajectory {
    type Target = [LatentState];

    fn deref(&self) -> &[LatentState] {
        &self.0
    }
}

pub(crate) fn initial_state(params: &BehaviorParams, config: &ModelConfig) -> LatentState {
    match config.kind {
        ModelKind::S => LatentState::fixed(params.lambda0, 1.0),
        ModelKind::Dds | ModelKind::Ds => LatentState::fixed(params.lambda0, params.beta0),
    }
}

/// Latent state of the day after `prev`, given what happened on the previous day.
pub(crate) fn next_state(
    prev: &LatentState,
    prev_utility: f64,
    prev_stop_count: usize,
    eps: f64,
    eta: f64,
    params: &BehaviorParams,
    config: &ModelConfig,
) -> Result<LatentState> {
    match config.kind {
        ModelKind::Ds | ModelKind::S => Ok(*prev),
        ModelKind::Dds => {
            let lambda = update_lambda(prev.lambda, prev_utility, eps, params)?;
            let beta = update_beta(prev.beta, prev_stop_count, eta, params, config)?;
            Ok(LatentState {
                lambda: lambda.value,
                beta: beta.value,
                lambda_pre: lambda.pre,
                beta_pre: beta.pre,
                lambda_clamped: lambda.clamped,
                beta_clamped: beta.clamped,
            })
        }
    }
}

/// Teacher-forced latent trajectory over the first `days` days of `history`:
/// each day's update reads the observed utility total and stop count of the
/// day before. `noise = None` rolls out without noise.
pub fn rollout(
    params: &BehaviorParams,
    history: &DriverHistory,
    noise: Option<&NoiseDraw>,
    config: &ModelConfig,
    days: usize,
) -> Result<LatentTrajectory> {
    if days > history.len() {
        return Err(Error::Shape(alloc::format!(
            "rollout of {} days over a {}-day history",
            days,
            history.len()
        )));
    }
    if let Some(n) = noise {
        if n.len() < days {
            return Err(Error::Shape(alloc::format!(
                "noise covers {} days, need {}",
                n.len(),
                days
            )));
        }
    }
    let mut states = Vec::with_capacity(days);
    if days == 0 {
        return Ok(LatentTrajectory(states));
    }
    states.push(initial_state(params, config));
    for d in 1..days {
        let prev_day = history.day(d - 1);
        let (eps, eta) = noise.map_or((0.0, 0.0), |n| (n.eps[d], n.eta[d]));
        let next = next_state(
            &states[d - 1],
            prev_day.feedback_utility(config.utility_feedback),
            prev_day.stop_count(),
            eps,
            eta,
            params,
            config,
        )?;
        states.push(next);
    }
    Ok(LatentTrajectory(states))
}

/// Generate a driver's decisions from raw ride utilities.
///
/// Each day stops at [`stopping_task`]; a day that never reaches its threshold
/// accepts every offered ride. The next day's update reads the simulated
/// totals of the day before.
pub fn simulate_history(
    params: &BehaviorParams,
    raw_utilities: &[Vec<f64>],
    noise: &NoiseDraw,
    config: &ModelConfig,
) -> Result<(DriverHistory, LatentTrajectory)> {
    params.validate()?;
    config.validate()?;
    let days = raw_utilities.len();
    if days == 0 {
        return Err(Error::Shape("no days to simulate".to_string()));
    }
    if noise.len() < days {
        return Err(Error::Shape(alloc::format!(
            "noise covers {} days, need {}",
            noise.len(),
            days
        )));
    }
    let mut out_days: Vec<DaySequence> = Vec::with_capacity(days);
    let mut states = Vec::with_capacity(days);
    for (d, utilities) in raw_utilities.iter().enumerate() {
        let state = if d == 0 {
            initial_state(params, config)
        } else {
            let prev_day = &out_days[d - 1];
            next_state(
                &states[d - 1],
                prev_day.feedback_utility(config.utility_feedback),
                prev_day.stop_count(),
                noise.eps[d],
                noise.eta[d],
                params,
                config,
            )?
        };
        let stop = stopping_task(utilities, state.lambda, state.beta).unwrap_or(utilities.len());
        let day =
            DaySequence::from_stop(utilities.clone(), stop).map_err(|e| Error::InvalidDay {
                day: d,
                reason: e.to_string(),
            })?;
        out_days.push(day);
        states.push(state);
    }
    Ok((DriverHistory::new(out_days)?, LatentTrajectory(states)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn example_params() -> BehaviorParams {
        BehaviorParams::new(0.8, 0.2, 0.8, 0.2, 15.0, 0.9).unwrap()
    }

    const RIDES: [f64; 5] = [6.0, 4.0, 2.0, 0.0, 9.0];

    #[test]
    fn project_clamps_and_passes_through() {
        assert_eq!(project(-3.0, 0.0, f64::INFINITY), 0.0);
        assert_eq!(project(0.5, 0.0, 1.0), 0.5);
        assert_eq!(project(1.4, 0.0, 1.0), 1.0);
        assert_eq!(project(1e300, 0.0, f64::INFINITY), 1e300);
    }

    #[test]
    fn lambda_update_matches_worked_values() {
        let p = example_params();
        let up = update_lambda(15.0, 21.0, 0.0, &p).unwrap();
        assert!((up.value - 16.2).abs() < 1e-12);
        assert!(!up.clamped);
        let accepted = update_lambda(15.0, 12.0, 0.0, &p).unwrap();
        assert!((accepted.value - 14.4).abs() < 1e-12);

        let unit = BehaviorParams::new(1.0, 0.0, 1.0, 0.0, 1.0, 1.0).unwrap();
        let low = update_lambda(1.0, 0.0, -5.0, &unit).unwrap();
        assert_eq!(low.value, 0.0);
        assert_eq!(low.pre, -4.0);
        assert!(low.clamped);
    }

    #[test]
    fn lambda_update_rejects_bad_inputs() {
        let p = example_params();
        assert!(update_lambda(f64::NAN, 1.0, 0.0, &p).is_err());
        assert!(update_lambda(1.0, f64::INFINITY, 0.0, &p).is_err());
        assert!(update_lambda(-1.0, 1.0, 0.0, &p).is_err());
    }

    #[test]
    fn beta_update_matches_worked_values() {
        let p = example_params();
        let cfg = ModelConfig::default();
        let up = update_beta(0.9, 3, 0.0, &p, &cfg).unwrap();
        assert!((up.value - (0.72 + 0.2 * libm::exp(-3.0))).abs() < 1e-12);
        assert!((up.value - 0.73).abs() < 1e-3);

        let unit = BehaviorParams::new(1.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let far = update_beta(0.5, 800, 0.0, &unit, &cfg).unwrap();
        assert_eq!(far.value, 0.5);

        let keep = BehaviorParams::new(1.0, 0.0, 1.0, 0.0, 1.0, 1.0).unwrap();
        let high = update_beta(0.9, 1, 1.0, &keep, &cfg).unwrap();
        assert_eq!(high.value, 1.0);
        assert!(high.clamped);
    }

    #[test]
    fn beta_floor_is_configurable() {
        let keep = BehaviorParams::new(1.0, 0.0, 1.0, 0.0, 1.0, 1.0).unwrap();
        let cfg = ModelConfig {
            beta_min: 0.05,
            ..ModelConfig::default()
        };
        let low = update_beta(0.5, 2, -3.0, &keep, &cfg).unwrap();
        assert_eq!(low.value, 0.05);
        assert!(low.clamped);
        assert!(update_beta(0.0, 2, 0.0, &keep, &cfg).is_err());
        assert!(update_beta(0.5, 0, 0.0, &keep, &cfg).is_err());
    }

    #[test]
    fn smooth_beta_is_logistic() {
        let keep = BehaviorParams::new(1.0, 0.0, 1.0, 0.0, 1.0, 1.0).unwrap();
        let cfg = ModelConfig {
            activation: Activation::Smooth,
            ..ModelConfig::default()
        };
        let up = update_beta(0.5, 2, 0.0, &keep, &cfg).unwrap();
        assert!((up.value - 1.0 / (1.0 + libm::exp(-0.5))).abs() < 1e-15);
        assert!(!up.clamped);
    }

    #[test]
    fn stopping_task_examples() {
        assert_eq!(stopping_task(&RIDES, 15.0, 1.0), Some(5));
        // Accumulated 12 is still short of 15 * 0.81 = 12.15 at the third ride.
        assert_eq!(stopping_task(&RIDES, 15.0, 0.9), Some(4));
        assert_eq!(stopping_task(&RIDES, 0.0, 0.9), Some(1));
        assert_eq!(stopping_task(&RIDES, 100.0, 1.0), None);
    }

    #[test]
    fn tie_stops() {
        // Accumulated 10 equals the threshold 10 at the second ride.
        assert_eq!(stopping_task(&[6.0, 4.0, 1.0], 20.0, 0.5), Some(2));
        let p = decision_probability(20.0, 0.5, 2, 10.0, 1.0);
        assert_eq!(p, 0.5);
        assert!(!continues(threshold(20.0, 0.5, 2) - 10.0));
    }

    #[test]
    fn decision_probability_examples() {
        assert_eq!(decision_probability(7.0, 0.3, 1, 7.0, 1.0), 0.5);
        let p = decision_probability(15.0, 0.9, 1, 6.0, 1.0);
        assert!((p - 1.0 / (1.0 + libm::exp(-9.0))).abs() < 1e-15);
        assert!((p - 0.99988).abs() < 1e-5);
        let q = decision_probability(0.0, 0.9, 3, 12.0, 1.0);
        assert!((q - 6.144e-6).abs() < 1e-8);
        // temperature flattens the curve
        let warm = decision_probability(15.0, 0.9, 1, 6.0, 10.0);
        assert!((warm - 1.0 / (1.0 + libm::exp(-0.9))).abs() < 1e-15);
    }

    #[test]
    fn day_sequence_invariants() {
        let day = DaySequence::new(vec![10.0, 20.0, 15.0], vec![true, true, false]).unwrap();
        assert_eq!(day.stop_count(), 2);
        assert_eq!(day.total_utility(), 30.0);
        assert_eq!(day.full_day_utility(), 45.0);
        assert!(DaySequence::new(vec![1.0, 2.0], vec![true, false, false]).is_err());
        assert!(DaySequence::new(vec![1.0, 2.0], vec![false, true]).is_err());
        assert!(DaySequence::new(vec![1.0, 2.0], vec![false, false]).is_err());
        assert!(DaySequence::new(vec![-1.0, 2.0], vec![true, false]).is_err());
        assert!(DaySequence::new(vec![], vec![]).is_err());
    }

    #[test]
    fn history_rejects_ragged_days() {
        let a = DaySequence::from_stop(vec![1.0, 2.0], 1).unwrap();
        let b = DaySequence::from_stop(vec![1.0, 2.0, 3.0], 1).unwrap();
        assert!(DriverHistory::new(vec![a.clone(), b]).is_err());
        assert!(DriverHistory::new(vec![]).is_err());
        let h = DriverHistory::new(vec![a.clone(), a]).unwrap();
        assert_eq!(h.width(), 2);
        assert_eq!(h.slice(1..2).unwrap().len(), 1);
        assert!(h.slice(1..3).is_err());
    }

    #[test]
    fn illustrative_example_two_days() {
        let p = example_params();
        let utilities = vec![RIDES.to_vec(), RIDES.to_vec()];
        let noise = NoiseDraw::zeros(2);

        let (hist, latent) =
            simulate_history(&p, &utilities, &noise, &ModelConfig::default()).unwrap();
        assert_eq!(latent[0].lambda, 15.0);
        assert_eq!(latent[0].beta, 0.9);
        assert_eq!(hist.day(0).stop_count(), 4);
        assert_eq!(hist.day(0).total_utility(), 12.0);
        assert!((latent[1].lambda - 14.4).abs() < 1e-12);

        let full = ModelConfig {
            utility_feedback: UtilityFeedback::FullDay,
            ..ModelConfig::default()
        };
        let (_, latent) = simulate_history(&p, &utilities, &noise, &full).unwrap();
        assert!((latent[1].lambda - 16.2).abs() < 1e-12);
    }

    #[test]
    fn zero_target_stops_at_first_ride() {
        let p = BehaviorParams::new(0.8, 0.2, 0.8, 0.2, 0.0, 0.9).unwrap();
        let (hist, _) = simulate_history(
            &p,
            &[vec![3.0, 1.0, 1.0, 1.0]],
            &NoiseDraw::zeros(1),
            &ModelConfig::default(),
        )
        .unwrap();
        assert_eq!(hist.day(0).labels(), &[true, false, false, false]);
    }

    #[test]
    fn unmet_threshold_accepts_everything() {
        let p = BehaviorParams::new(0.8, 0.2, 0.8, 0.2, 1e9, 0.99).unwrap();
        let (hist, _) = simulate_history(
            &p,
            &[vec![3.0, 1.0, 1.0]],
            &NoiseDraw::zeros(1),
            &ModelConfig::default(),
        )
        .unwrap();
        assert_eq!(hist.day(0).stop_count(), 3);
    }

    #[test]
    fn rollout_matches_simulation_latents() {
        let p = example_params();
        let utilities = vec![RIDES.to_vec(); 4];
        let noise = NoiseDraw {
            eps: vec![0.0, 0.3, -0.7, 1.1],
            eta: vec![0.0, 0.05, -0.02, 0.01],
        };
        let cfg = ModelConfig::default();
        let (hist, latent) = simulate_history(&p, &utilities, &noise, &cfg).unwrap();
        let rolled = rollout(&p, &hist, Some(&noise), &cfg, 4).unwrap();
        assert_eq!(rolled, latent);
        assert!(rollout(&p, &hist, Some(&noise), &cfg, 5).is_err());
    }
}
