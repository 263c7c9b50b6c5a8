use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecasters::StepRule;
use crate::recalibrator::UpdateMode;

/// What Nature reveals before each raw forecast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Covariates `x_t`, forecast by online logistic regression.
    Covariate,
    /// Raw forecasts `p_t` supplied directly.
    ForecastStream,
    /// `K` expert forecasts, aggregated by exponential weights.
    MultiExpert,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "covariate" => Ok(Mode::Covariate),
            "forecast-stream" => Ok(Mode::ForecastStream),
            "multi-expert" => Ok(Mode::MultiExpert),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

/// Synthetic Nature processes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorKind {
    IidBernoulli { q: f64 },
    MiscalibratedLink { a: f64, b: f64 },
    SignFlipAdversary,
    Drifting { period: u64 },
    ExpertPanel { k: usize },
}

impl GeneratorKind {
    pub const DEFAULT_LINK: (f64, f64) = (3.0, -0.5);
    pub const DEFAULT_DRIFT_PERIOD: u64 = 20_000;
    pub const DEFAULT_PANEL: usize = 4;

    /// Whether outcomes depend on the forecaster's play (and so cannot be pre-generated).
    pub fn is_adaptive(&self) -> bool {
        matches!(self, GeneratorKind::SignFlipAdversary)
    }

    fn check(&self) -> Result<()> {
        match *self {
            GeneratorKind::IidBernoulli { q } if !(0.0..=1.0).contains(&q) => {
                Err(Error::Config(format!("iid-bernoulli rate {q} outside [0, 1]")))
            }
            GeneratorKind::MiscalibratedLink { a, b } if !(a.is_finite() && b.is_finite()) => {
                Err(Error::Config("link coefficients must be finite".into()))
            }
            GeneratorKind::Drifting { period: 0 } => Err(Error::Config("drift period must be positive".into())),
            GeneratorKind::ExpertPanel { k } if k < 2 => {
                Err(Error::Config("expert panel needs at least 2 experts".into()))
            }
            _ => Ok(()),
        }
    }
}

impl FromStr for GeneratorKind {
    type Err = Error;

    /// `iid-bernoulli:0.3`, `miscalibrated-link[:a,b]`, `sign-flip-adversary`,
    /// `drifting[:period]`, `expert-panel[:k]`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let bad = |what: &str| Error::Config(format!("bad {what} parameter in generator `{s}`"));
        let kind = match (name, arg) {
            ("iid-bernoulli", Some(a)) => GeneratorKind::IidBernoulli {
                q: a.parse().map_err(|_| bad("rate"))?,
            },
            ("iid-bernoulli", None) => return Err(Error::Config("iid-bernoulli needs a rate, e.g. iid-bernoulli:0.3".into())),
            ("miscalibrated-link", None) => {
                let (a, b) = Self::DEFAULT_LINK;
                GeneratorKind::MiscalibratedLink { a, b }
            }
            ("miscalibrated-link", Some(arg)) => {
                let (a, b) = arg.split_once(',').ok_or_else(|| bad("coefficient"))?;
                GeneratorKind::MiscalibratedLink {
                    a: a.trim().parse().map_err(|_| bad("coefficient"))?,
                    b: b.trim().parse().map_err(|_| bad("coefficient"))?,
                }
            }
            ("sign-flip-adversary", None) => GeneratorKind::SignFlipAdversary,
            ("drifting", None) => GeneratorKind::Drifting {
                period: Self::DEFAULT_DRIFT_PERIOD,
            },
            ("drifting", Some(a)) => GeneratorKind::Drifting {
                period: a.parse().map_err(|_| bad("period"))?,
            },
            ("expert-panel", None) => GeneratorKind::ExpertPanel { k: Self::DEFAULT_PANEL },
            ("expert-panel", Some(a)) => GeneratorKind::ExpertPanel {
                k: a.parse().map_err(|_| bad("expert count"))?,
            },
            _ => return Err(Error::Config(format!("unknown generator `{s}`"))),
        };
        kind.check()?;
        Ok(kind)
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorKind::IidBernoulli { q } => write!(f, "iid-bernoulli:{q}"),
            GeneratorKind::MiscalibratedLink { a, b } => write!(f, "miscalibrated-link:{a},{b}"),
            GeneratorKind::SignFlipAdversary => write!(f, "sign-flip-adversary"),
            GeneratorKind::Drifting { period } => write!(f, "drifting:{period}"),
            GeneratorKind::ExpertPanel { k } => write!(f, "expert-panel:{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    Generator(GeneratorKind),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub source: DataSource,
    /// Grid resolution, also the bucket count.
    pub n: usize,
    /// Rounds to run; `None` runs a file source to its end.
    pub horizon: Option<u64>,
    pub seed: u64,
    pub forecaster: StepRule,
    pub update_mode: UpdateMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn generated(mode: Mode, kind: GeneratorKind, n: usize, horizon: u64, seed: u64) -> Self {
        Self {
            mode,
            source: DataSource::Generator(kind),
            n,
            horizon: Some(horizon),
            seed,
            forecaster: StepRule::default(),
            update_mode: UpdateMode::Expected,
            report_path: None,
        }
    }

    pub fn from_file(mode: Mode, path: impl Into<PathBuf>, n: usize, seed: u64) -> Self {
        Self {
            mode,
            source: DataSource::File(path.into()),
            n,
            horizon: None,
            seed,
            forecaster: StepRule::default(),
            update_mode: UpdateMode::Expected,
            report_path: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if self.horizon == Some(0) {
            return Err(Error::Config("T must be at least 1".into()));
        }
        match self.forecaster {
            StepRule::Fixed { eta } if !(eta.is_finite() && eta > 0.0) => {
                return Err(Error::Config("learning rate must be positive".into()))
            }
            StepRule::Adaptive { eta, delta } if !(eta.is_finite() && eta > 0.0 && delta.is_finite() && delta > 0.0) => {
                return Err(Error::Config("adaptive rate needs positive eta and delta".into()))
            }
            _ => {}
        }
        match &self.source {
            DataSource::Generator(kind) => {
                kind.check()?;
                if self.horizon.is_none() {
                    return Err(Error::Config("generated runs need a horizon T".into()));
                }
                let panel = matches!(kind, GeneratorKind::ExpertPanel { .. });
                if panel != (self.mode == Mode::MultiExpert) {
                    return Err(Error::Config(format!(
                        "generator `{kind}` is not available in {:?} mode",
                        self.mode
                    )));
                }
            }
            DataSource::File(_) => {}
        }
        Ok(())
    }
}
