//! Synthetic Nature: the process choosing `(x_t, y_t)` each round.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::config::{GeneratorKind, Mode};
use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// Information revealed before the raw forecast is made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Context {
    Covariates(Vec<f64>),
    Forecast(f64),
    Experts(Vec<f64>),
}

/// How `y_t` is settled once the recalibrator has committed to its forecast.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeRule {
    /// Drawn before the round; independent of the forecast.
    Fixed(u8),
    /// `1` if the expected emitted forecast is at most ½, else `0`.
    SignFlip,
}

impl OutcomeRule {
    /// Settles the outcome given the mean of the forecast distribution (not the sample).
    pub fn resolve(self, expected_forecast: f64) -> u8 {
        match self {
            OutcomeRule::Fixed(y) => y,
            OutcomeRule::SignFlip => (expected_forecast <= 0.5) as u8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Revealed {
    pub context: Context,
    pub rule: OutcomeRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nature {
    kind: GeneratorKind,
    mode: Mode,
    rng: StreamRng,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Nature {
    pub fn new(kind: GeneratorKind, mode: Mode, seed: u64) -> Result<Self> {
        let panel = matches!(kind, GeneratorKind::ExpertPanel { .. });
        if panel != (mode == Mode::MultiExpert) {
            return Err(Error::Config(format!("generator `{kind}` is not available in {mode:?} mode")));
        }
        Ok(Self {
            kind,
            mode,
            rng: StreamRng::new(seed),
        })
    }

    pub fn kind(&self) -> GeneratorKind {
        self.kind
    }

    /// Dimension of revealed covariates in covariate mode.
    pub fn covariate_dim(&self) -> usize {
        match self.kind {
            GeneratorKind::IidBernoulli { .. } => 1,
            _ => 2,
        }
    }

    fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    fn bernoulli(&mut self, p: f64) -> u8 {
        (self.rng.unit() < p) as u8
    }

    /// Produces round `t` (1-based).
    pub fn reveal(&mut self, t: u64) -> Revealed {
        match self.kind {
            GeneratorKind::IidBernoulli { q } => {
                let context = match self.mode {
                    Mode::ForecastStream => Context::Forecast(self.rng.unit()),
                    _ => Context::Covariates(vec![1.0]),
                };
                let y = self.bernoulli(q);
                Revealed {
                    context,
                    rule: OutcomeRule::Fixed(y),
                }
            }
            GeneratorKind::MiscalibratedLink { a, b } => {
                let z = self.normal();
                let y = self.bernoulli(sigmoid(a * z + b));
                Revealed {
                    context: self.score_context(z),
                    rule: OutcomeRule::Fixed(y),
                }
            }
            GeneratorKind::SignFlipAdversary => {
                let z = self.normal();
                Revealed {
                    context: self.score_context(z),
                    rule: OutcomeRule::SignFlip,
                }
            }
            GeneratorKind::Drifting { period } => {
                let z = self.normal();
                let phase = std::f64::consts::TAU * (t as f64) / (period as f64);
                let (a, b) = GeneratorKind::DEFAULT_LINK;
                let y = self.bernoulli(sigmoid(a * phase.cos() * z + b));
                Revealed {
                    context: self.score_context(z),
                    rule: OutcomeRule::Fixed(y),
                }
            }
            GeneratorKind::ExpertPanel { k } => {
                let z = self.normal();
                let truth = sigmoid(2.5 * z);
                let experts = (0..k)
                    .map(|e| match e {
                        0 => truth,
                        1 => 0.5,
                        e if e % 2 == 0 => sigmoid(2.5 * z / e as f64),
                        e => sigmoid(2.5 * z + 0.5 * e as f64),
                    })
                    .collect();
                let y = self.bernoulli(truth);
                Revealed {
                    context: Context::Experts(experts),
                    rule: OutcomeRule::Fixed(y),
                }
            }
        }
    }

    /// Covariates `(z, 1)`, or the naive score `σ(z)` in forecast-stream mode.
    fn score_context(&self, z: f64) -> Context {
        match self.mode {
            Mode::ForecastStream => Context::Forecast(sigmoid(z)),
            _ => Context::Covariates(vec![z, 1.0]),
        }
    }
}
