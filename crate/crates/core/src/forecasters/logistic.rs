use serde::{Deserialize, Serialize};

use crate::error::{check_outcome, Error, Result};
use crate::scalar::Scalar;

/// Predictions are clamped to `[CLAMP, 1 − CLAMP]`.
pub const CLAMP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum StepRule {
    Fixed { eta: f64 },
    /// Per-coordinate `η / √(Σg² + δ)`, the current gradient included in the sum.
    Adaptive { eta: f64, delta: f64 },
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::Fixed { eta: 0.0005 }
    }
}

/// Online logistic regression `p = σ(w·x)` trained by log-loss gradient steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticForecaster<S> {
    weights: Vec<S>,
    rule: StepRule,
    grad_sq: Vec<S>,
}

fn sigmoid<S: Scalar>(z: S) -> S {
    if z >= S::zero() {
        S::one() / (S::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (S::one() + e)
    }
}

impl<S: Scalar> LogisticForecaster<S> {
    pub fn new(dim: usize, rule: StepRule) -> Self {
        Self {
            weights: vec![S::zero(); dim],
            rule,
            grad_sq: vec![S::zero(); dim],
        }
    }

    pub fn with_weights(weights: Vec<S>, rule: StepRule) -> Self {
        let dim = weights.len();
        Self {
            weights,
            rule,
            grad_sq: vec![S::zero(); dim],
        }
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    fn score(&self, x: &[S]) -> Result<S> {
        if x.len() != self.weights.len() {
            return Err(Error::domain(format!(
                "covariate dimension {} does not match model dimension {}",
                x.len(),
                self.weights.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("covariates must be finite"));
        }
        Ok(self.weights.iter().zip(x).map(|(&w, &v)| w * v).sum())
    }

    /// `σ(w·x)` clamped away from 0 and 1.
    pub fn predict(&self, x: &[S]) -> Result<S> {
        let lo = S::lit(CLAMP);
        Ok(sigmoid(self.score(x)?).max(lo).min(S::one() - lo))
    }

    /// One log-loss gradient step `w ← w − rate·(σ(w·x) − y)·x`.
    pub fn learn(&mut self, x: &[S], y: u8) -> Result<()> {
        check_outcome(y)?;
        let residual = sigmoid(self.score(x)?) - S::from_count(y as u64);
        for (k, (&xk, w)) in x.iter().zip(self.weights.iter_mut()).enumerate() {
            let g = residual * xk;
            let rate = match self.rule {
                StepRule::Fixed { eta } => S::lit(eta),
                StepRule::Adaptive { eta, delta } => {
                    self.grad_sq[k] += g * g;
                    S::lit(eta) / (self.grad_sq[k] + S::lit(delta)).sqrt()
                }
            };
            *w -= rate * g;
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::domain("weights became non-finite"));
        }
        Ok(())
    }
}
