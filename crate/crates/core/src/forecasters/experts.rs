use serde::{Deserialize, Serialize};

use crate::error::{check_outcome, Error, Result};
use crate::scalar::Scalar;

/// Exponential weights over `K` expert probability streams, squared loss,
/// anytime rate `η_t = √(8 ln K / t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertAggregator<S> {
    log_weights: Vec<S>,
    steps: u64,
    loss_aggregate: S,
    loss_experts: Vec<S>,
}

impl<S: Scalar> ExpertAggregator<S> {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("expert count must be at least 1".into()));
        }
        Ok(Self {
            log_weights: vec![S::zero(); k],
            steps: 0,
            loss_aggregate: S::zero(),
            loss_experts: vec![S::zero(); k],
        })
    }

    pub fn experts(&self) -> usize {
        self.log_weights.len()
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Normalized weights.
    pub fn weights(&self) -> Vec<S> {
        let top = self.log_weights.iter().copied().fold(S::neg_infinity(), S::max);
        let raw: Vec<S> = self.log_weights.iter().map(|&l| (l - top).exp()).collect();
        let total: S = raw.iter().copied().sum();
        raw.into_iter().map(|w| w / total).collect()
    }

    fn check(&self, forecasts: &[S]) -> Result<()> {
        if forecasts.len() != self.experts() {
            return Err(Error::domain(format!(
                "expected {} expert forecasts, got {}",
                self.experts(),
                forecasts.len()
            )));
        }
        if forecasts.iter().any(|p| !(*p >= S::zero() && *p <= S::one())) {
            return Err(Error::domain("expert forecasts must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Weighted average of the expert forecasts.
    pub fn aggregate(&self, forecasts: &[S]) -> Result<S> {
        self.check(forecasts)?;
        let p: S = self.weights().iter().zip(forecasts).map(|(&w, &p)| w * p).sum();
        Ok(p.max(S::zero()).min(S::one()))
    }

    pub fn update(&mut self, forecasts: &[S], y: u8) -> Result<()> {
        check_outcome(y)?;
        let p = self.aggregate(forecasts)?;
        let ys = S::from_count(y as u64);
        self.steps += 1;
        let k = S::from_count(self.experts() as u64);
        let eta = (S::lit(8.0) * k.ln() / S::from_count(self.steps)).sqrt();
        self.loss_aggregate += (ys - p) * (ys - p);
        for ((lw, loss), &pk) in self.log_weights.iter_mut().zip(self.loss_experts.iter_mut()).zip(forecasts) {
            let l = (ys - pk) * (ys - pk);
            *loss += l;
            *lw -= eta * l;
        }
        // keep log-weights bounded; normalisation is shift-invariant
        let top = self.log_weights.iter().copied().fold(S::neg_infinity(), S::max);
        for lw in self.log_weights.iter_mut() {
            *lw -= top;
        }
        Ok(())
    }

    /// Average squared loss of expert `k` so far.
    pub fn expert_mean_loss(&self, k: usize) -> Result<S> {
        if self.steps == 0 {
            return Err(Error::Empty);
        }
        Ok(self.loss_experts[k] / S::from_count(self.steps))
    }

    pub fn mean_loss(&self) -> Result<S> {
        if self.steps == 0 {
            return Err(Error::Empty);
        }
        Ok(self.loss_aggregate / S::from_count(self.steps))
    }

    /// Average excess loss of the aggregate over each expert.
    pub fn regrets(&self) -> Result<Vec<S>> {
        if self.steps == 0 {
            return Err(Error::Empty);
        }
        let t = S::from_count(self.steps);
        Ok(self.loss_experts.iter().map(|&l| (self.loss_aggregate - l) / t).collect())
    }

    /// Average excess loss over the best expert in hindsight.
    pub fn external_regret(&self) -> Result<S> {
        Ok(self.regrets()?.into_iter().fold(S::neg_infinity(), S::max))
    }
}
