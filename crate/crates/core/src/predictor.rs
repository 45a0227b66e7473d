//! Synthetic ensemble world model with a controllable accuracy and spread.
//!
//! Each call first decides which side the ensemble leans to (the true value
//! with probability `accuracy`), then draws one soft vote per member around
//! that side. `μ` is the mean vote for "true"; `σ` is the vote variance
//! normalised by its largest possible value (1/4), so it lies in [0, 1].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::store::{GroundedStore, PredicateId};

/// How much the noise scale grows per unit of observed overconfidence.
pub const RECALIBRATION_GAIN: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Discretized {
    Value(bool),
    Ambiguous,
}

/// Slack absorbing rounding in `μ - 1/2` (0.6 - 0.5 is not exactly 0.1).
const MARGIN_SLACK: f64 = 1e-12;

/// `|μ - 1/2| < ε`, up to floating-point rounding.
pub fn is_ambiguous(mu: f64, epsilon: f64) -> bool {
    (mu - 0.5).abs() < epsilon - MARGIN_SLACK
}

/// A value when `|μ - 1/2| ≥ ε`, otherwise ambiguous.
pub fn discretize(pred: Prediction, epsilon: f64) -> Discretized {
    if !is_ambiguous(pred.mu, epsilon) {
        Discretized::Value(pred.mu >= 0.5)
    } else {
        Discretized::Ambiguous
    }
}

/// Read-only access to ground truth, available to synthetic models only.
pub trait HiddenTruth {
    fn hidden_value(&self, p: &PredicateId) -> Option<bool>;
}

pub trait WorldModel {
    /// Vote mean and spread for `p` given the grounded store.
    fn predict(&mut self, grounded: &GroundedStore, p: &PredicateId, hidden: &dyn HiddenTruth) -> Prediction;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPredictorConfig {
    pub accuracy: f64,
    pub ensemble_size: usize,
    /// Standard deviation of member logit noise; 0 gives a unanimous ensemble.
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for SyntheticPredictorConfig {
    fn default() -> Self {
        SyntheticPredictorConfig {
            accuracy: 0.8,
            ensemble_size: 5,
            noise_scale: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticPredictor {
    config: SyntheticPredictorConfig,
    rng: ChaCha8Rng,
}

impl SyntheticPredictor {
    pub fn new(config: SyntheticPredictorConfig) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        SyntheticPredictor { config, rng }
    }

    pub fn config(&self) -> &SyntheticPredictorConfig {
        &self.config
    }

    /// Prediction for a predicate whose true value is `truth`.
    pub fn predict_value(&mut self, truth: bool) -> Prediction {
        let a = self.config.accuracy.clamp(0.0, 1.0);
        let side = if self.rng.random::<f64>() < a { truth } else { !truth };
        let base = logit(a.max(1.0 - a));
        let n = self.config.ensemble_size.max(1);
        let votes: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = if self.config.noise_scale > 0.0 {
                    StandardNormal.sample(&mut self.rng)
                } else {
                    0.0
                };
                let s = sigmoid(base + self.config.noise_scale * z);
                if side {
                    s
                } else {
                    1.0 - s
                }
            })
            .collect();
        let mu = votes.iter().sum::<f64>() / n as f64;
        let sigma = if n == 1 {
            0.0
        } else {
            let var = votes.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n as f64;
            (4.0 * var).min(1.0)
        };
        Prediction {
            mu: mu.clamp(0.0, 1.0),
            sigma,
        }
    }
}

impl WorldModel for SyntheticPredictor {
    fn predict(&mut self, _grounded: &GroundedStore, p: &PredicateId, hidden: &dyn HiddenTruth) -> Prediction {
        let truth = hidden.hidden_value(p).unwrap_or(false);
        self.predict_value(truth)
    }
}

fn logit(a: f64) -> f64 {
    (a / (1.0 - a)).ln()
}

fn sigmoid(x: f64) -> f64 {
    if x == f64::INFINITY {
        1.0
    } else if x == f64::NEG_INFINITY {
        0.0
    } else {
        1.0 / (1.0 + (-x).exp())
    }
}

/// A prediction paired with the value later verified for the same predicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionOutcome {
    pub predicate: PredicateId,
    pub predicted: bool,
    pub actual: bool,
    pub sigma: f64,
}

/// Error rate minus mean reported spread. Positive means overconfident.
pub fn calibration_gap(outcomes: &[PredictionOutcome]) -> f64 {
    if outcomes.is_empty() {
        return 0.0;
    }
    let n = outcomes.len() as f64;
    let err = outcomes.iter().filter(|o| o.predicted != o.actual).count() as f64 / n;
    let spread = outcomes.iter().map(|o| o.sigma).sum::<f64>() / n;
    err - spread
}

/// Widens the ensemble spread when errors outrun it.
/// An ensemble that is already at least as uncertain as it is wrong is left
/// unchanged.
pub fn recalibrate(config: &SyntheticPredictorConfig, outcomes: &[PredictionOutcome]) -> SyntheticPredictorConfig {
    let gap = calibration_gap(outcomes);
    let mut out = config.clone();
    if gap > 0.0 {
        out.noise_scale += RECALIBRATION_GAIN * gap;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(accuracy: f64, noise: f64, seed: u64) -> SyntheticPredictorConfig {
        SyntheticPredictorConfig {
            accuracy,
            ensemble_size: 5,
            noise_scale: noise,
            seed,
        }
    }

    #[test]
    fn perfect_accuracy_is_exact() {
        let mut p = SyntheticPredictor::new(cfg(1.0, 2.0, 3));
        for i in 0..200 {
            let truth = i % 3 == 0;
            let pred = p.predict_value(truth);
            assert_eq!(pred.mu, if truth { 1.0 } else { 0.0 });
            assert_eq!(pred.sigma, 0.0);
        }
    }

    #[test]
    fn single_member_has_zero_spread() {
        let mut p = SyntheticPredictor::new(SyntheticPredictorConfig {
            ensemble_size: 1,
            ..cfg(0.7, 1.5, 1)
        });
        for _ in 0..100 {
            assert_eq!(p.predict_value(true).sigma, 0.0);
        }
    }

    #[test]
    fn outputs_stay_in_range() {
        for &a in &[0.0, 0.3, 0.5, 0.9, 1.0] {
            let mut p = SyntheticPredictor::new(cfg(a, 3.0, 9));
            for i in 0..200 {
                let pr = p.predict_value(i % 2 == 0);
                assert!((0.0..=1.0).contains(&pr.mu), "{pr:?}");
                assert!((0.0..=1.0).contains(&pr.sigma), "{pr:?}");
            }
        }
    }

    #[test]
    fn discretize_boundaries() {
        let at = |mu| Prediction { mu, sigma: 0.0 };
        assert_eq!(discretize(at(0.5), 0.0), Discretized::Value(true));
        assert_eq!(discretize(at(0.6), 0.1), Discretized::Value(true));
        assert_eq!(discretize(at(0.4), 0.1), Discretized::Value(false));
        assert_eq!(discretize(at(0.59), 0.1), Discretized::Ambiguous);
        assert_eq!(discretize(at(1.0), 0.5), Discretized::Value(true));
    }

    #[test]
    fn calibrated_outcomes_leave_config_unchanged() {
        let c = cfg(0.7, 0.5, 0);
        let outcomes: Vec<PredictionOutcome> = (0..10)
            .map(|i| PredictionOutcome {
                predicate: "x()".parse().unwrap(),
                predicted: true,
                actual: i >= 3,
                sigma: 0.3,
            })
            .collect();
        let out = recalibrate(&c, &outcomes);
        assert!((out.noise_scale - c.noise_scale).abs() < 1e-6);
        assert_eq!(recalibrate(&c, &[]), c);
    }

    #[test]
    fn overconfidence_widens_spread() {
        let c = cfg(0.7, 0.0, 0);
        let outcomes: Vec<PredictionOutcome> = (0..10)
            .map(|i| PredictionOutcome {
                predicate: "x()".parse().unwrap(),
                predicted: true,
                actual: i >= 3,
                sigma: 0.0,
            })
            .collect();
        let out = recalibrate(&c, &outcomes);
        assert!((out.noise_scale - RECALIBRATION_GAIN * 0.3).abs() < 1e-12);
    }
}
