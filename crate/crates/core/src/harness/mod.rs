//! Experiment runner: Nature → raw forecaster → recalibrator → outcome → updates.

mod config;
mod nature;
mod report;
mod stream;

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::{DataSource, ExperimentConfig, GeneratorKind, Mode};
pub use nature::{Context, Nature, OutcomeRule, Revealed};
pub use report::{emit_report, reliability_csv_path, ExpertSummary, InstanceSummary, Report, REPORT_SCHEMA_VERSION};
pub use stream::{generate_stream, ingest_stream, write_round, Round, StreamReader};

use crate::error::{Error, Result};
use crate::forecasters::{ExpertAggregator, LogisticForecaster};
use crate::recalibrator::Recalibrator;
use crate::rng::derive_seed;
use crate::transcript::TranscriptRecord;

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

const NATURE_STREAM: u64 = 0x4e41_5455_5245;
const RECAL_STREAM: u64 = 0x5245_4341_4c49;

/// Seed of the Nature stream for a master seed.
pub fn nature_seed(seed: u64) -> u64 {
    derive_seed(seed, NATURE_STREAM)
}

/// Master seed of the recalibrator's samplers for a master seed.
pub fn recalibrator_seed(seed: u64) -> u64 {
    derive_seed(seed, RECAL_STREAM)
}

/// A run in progress. Serializable between rounds, so a run can be split
/// at any round and resumed bit-exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Experiment {
    config: ExperimentConfig,
    round: u64,
    recalibrator: Recalibrator<f64>,
    forecaster: Option<LogisticForecaster<f64>>,
    aggregator: Option<ExpertAggregator<f64>>,
    nature: Option<Nature>,
    #[serde(skip)]
    transcript: Option<Vec<TranscriptRecord>>,
}

#[derive(Serialize)]
struct CheckpointOut<'a> {
    schema_version: u32,
    experiment: &'a Experiment,
}

#[derive(Deserialize)]
struct CheckpointIn {
    schema_version: u32,
    experiment: Experiment,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let recalibrator = Recalibrator::new(config.n, recalibrator_seed(config.seed), config.update_mode)?;
        let nature = match &config.source {
            DataSource::Generator(kind) => Some(Nature::new(*kind, config.mode, nature_seed(config.seed))?),
            DataSource::File(_) => None,
        };
        Ok(Self {
            config,
            round: 0,
            recalibrator,
            forecaster: None,
            aggregator: None,
            nature,
            transcript: None,
        })
    }

    /// Keeps an in-memory transcript of every subsequent round.
    pub fn record_transcript(&mut self) {
        self.transcript.get_or_insert_with(Vec::new);
    }

    pub fn transcript(&self) -> Option<&[TranscriptRecord]> {
        self.transcript.as_deref()
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    /// Rounds completed.
    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn recalibrator(&self) -> &Recalibrator<f64> {
        &self.recalibrator
    }

    pub fn forecaster(&self) -> Option<&LogisticForecaster<f64>> {
        self.forecaster.as_ref()
    }

    pub fn aggregator(&self) -> Option<&ExpertAggregator<f64>> {
        self.aggregator.as_ref()
    }

    /// Runs rounds until `stop` rounds are complete, or to the configured horizon
    /// (end of file when no horizon is set) if `stop` is `None`.
    pub fn advance(&mut self, stop: Option<u64>) -> Result<()> {
        let limit = match (stop, self.config.horizon) {
            (Some(s), Some(h)) => Some(s.min(h)),
            (s, h) => s.or(h),
        };
        if let Some(mut nature) = self.nature.take() {
            let limit = limit.expect("validated: generated runs have a horizon");
            let result = (|| {
                while self.round < limit {
                    let t = self.round + 1;
                    let Revealed { context, rule } = nature.reveal(t);
                    self.play(t, context, rule)?;
                }
                Ok(())
            })();
            self.nature = Some(nature);
            return result;
        }

        let DataSource::File(path) = self.config.source.clone() else {
            unreachable!("generator sources always carry a Nature")
        };
        let mut rows = ingest_stream(&path, self.config.mode)?;
        for _ in 0..self.round {
            match rows.next() {
                Some(r) => {
                    r?;
                }
                None => return Err(Error::Config("stream is shorter than the checkpointed round".into())),
            }
        }
        while limit.is_none_or(|l| self.round < l) {
            let t = self.round + 1;
            match rows.next() {
                Some(row) => {
                    let row = row.map_err(|e| e.at_round(t))?;
                    self.play(t, row.context, OutcomeRule::Fixed(row.y))?;
                }
                None if limit.is_some() => {
                    return Err(Error::Config(format!(
                        "stream ended after {} rounds, horizon is {}",
                        self.round,
                        limit.unwrap()
                    )))
                }
                None => break,
            }
        }
        if self.round == 0 {
            return Err(Error::Config("stream has no rounds; T must be at least 1".into()));
        }
        Ok(())
    }

    fn play(&mut self, t: u64, context: Context, rule: OutcomeRule) -> Result<()> {
        self.play_inner(t, &context, rule).map_err(|e| e.at_round(t))?;
        self.round = t;
        Ok(())
    }

    fn play_inner(&mut self, t: u64, context: &Context, rule: OutcomeRule) -> Result<()> {
        let p_raw = match (context, self.config.mode) {
            (Context::Covariates(x), Mode::Covariate) => {
                let rule = self.config.forecaster;
                self.forecaster
                    .get_or_insert_with(|| LogisticForecaster::new(x.len(), rule))
                    .predict(x)?
            }
            (Context::Forecast(p), Mode::ForecastStream) => *p,
            (Context::Experts(p), Mode::MultiExpert) => {
                if self.aggregator.is_none() {
                    self.aggregator = Some(ExpertAggregator::new(p.len())?);
                }
                self.aggregator.as_ref().unwrap().aggregate(p)?
            }
            (c, mode) => {
                return Err(Error::domain(format!("round context {c:?} does not fit {mode:?} mode")));
            }
        };

        self.recalibrator.step(p_raw)?;
        let pending = self.recalibrator.pending().expect("step leaves a pending round");
        let y = rule.resolve(pending.distribution.mean(self.recalibrator.grid()));
        if let Some(log) = self.transcript.as_mut() {
            log.push(TranscriptRecord {
                t,
                distribution: pending.distribution.probabilities().to_vec(),
                sampled: pending.sampled,
                y,
                bucket: Some(pending.bucket),
                raw: Some(p_raw),
            });
        }
        self.recalibrator.observe(y)?;

        match context {
            Context::Covariates(x) => self.forecaster.as_mut().unwrap().learn(x, y)?,
            Context::Experts(p) => self.aggregator.as_mut().unwrap().update(p, y)?,
            Context::Forecast(_) => {}
        }
        Ok(())
    }

    pub fn checkpoint(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&CheckpointOut {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            experiment: self,
        })?)
    }

    pub fn restore(text: &str) -> Result<Self> {
        let c: CheckpointIn = serde_json::from_str(text)?;
        if c.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(Error::Snapshot(format!(
                "unsupported checkpoint schema version {}",
                c.schema_version
            )));
        }
        let e = c.experiment;
        e.config.validate()?;
        e.recalibrator.validate()?;
        if e.recalibrator.steps() != e.round {
            return Err(Error::Snapshot("recalibrator step count disagrees with the round index".into()));
        }
        Ok(e)
    }

    pub fn report(&self, wall_clock_seconds: f64) -> Result<Report> {
        Report::build(self, wall_clock_seconds)
    }
}

/// Runs a configuration to completion and returns its report.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Report> {
    let started = Instant::now();
    let mut exp = Experiment::new(config.clone())?;
    exp.advance(None)?;
    exp.report(started.elapsed().as_secs_f64())
}

/// Resumes a checkpoint written by [`Experiment::checkpoint`] and runs it to completion.
pub fn replay(checkpoint: &Path) -> Result<Report> {
    let started = Instant::now();
    let mut exp = Experiment::restore(&std::fs::read_to_string(checkpoint)?)?;
    exp.advance(None)?;
    exp.report(started.elapsed().as_secs_f64())
}

/// Runs independent configurations on separate threads.
pub fn run_sweep(configs: &[ExperimentConfig]) -> Vec<Result<Report>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = configs.iter().map(|c| s.spawn(move || run_experiment(c))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("experiment thread panicked"))
            .collect()
    })
}
