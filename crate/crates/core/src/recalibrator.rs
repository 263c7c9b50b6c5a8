//! Bucketed recalibration: one independent calibration subroutine per
//! interval of raw-forecast space.
//!
//! Raw forecasts are routed to the bucket `[j/n, (j+1)/n)` containing them
//! (the last bucket is closed at 1). The bucket's subroutine, created on first
//! use, produces the randomized forecast that is emitted; the outcome is then
//! fed back to that subroutine only.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::calibrator::{sample_forecast, CalibratorState, ForecastDistribution};
use crate::error::{check_outcome, Error, Result};
use crate::grid::ProbabilityGrid;
use crate::metrics::CalibrationLedger;
use crate::rng::{derive_seed, StreamRng};
use crate::scalar::Scalar;

pub const SNAPSHOT_SCHEMA_VERSION: u32 = 1;

/// How subroutine statistics absorb a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateMode {
    /// Update with the full forecast distribution.
    #[default]
    Expected,
    /// Update with a point mass at the sampled grid index.
    Sampled,
}

impl std::str::FromStr for UpdateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "expected" => Ok(Self::Expected),
            "sampled" => Ok(Self::Sampled),
            other => Err(Error::Config(format!("unknown update mode `{other}`"))),
        }
    }
}

/// Seed of bucket `j`'s sampler, independent of bucket creation order.
pub fn bucket_seed(master_seed: u64, bucket: usize) -> u64 {
    derive_seed(master_seed, bucket as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketInstance<S> {
    pub state: CalibratorState<S>,
    rng: StreamRng,
    /// Σ (y − p_t)² over rounds routed here.
    pub loss_emitted: S,
    /// Σ (y − j/n)² over rounds routed here: the loss of the bucket's nominal value.
    pub loss_anchor: S,
}

impl<S: Scalar> BucketInstance<S> {
    /// Rounds routed to this bucket (`T_j`).
    pub fn routed(&self) -> u64 {
        self.state.steps()
    }
}

/// A routed round awaiting its outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingStep<S> {
    pub bucket: usize,
    pub distribution: ForecastDistribution<S>,
    pub sampled: usize,
    pub emitted: S,
    pub raw: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recalibrator<S> {
    grid: ProbabilityGrid,
    mode: UpdateMode,
    master_seed: u64,
    instances: BTreeMap<usize, BucketInstance<S>>,
    /// Ledger weighted by the full forecast distributions.
    expected: CalibrationLedger<S>,
    /// Ledger of the realised (sampled) forecasts.
    realized: CalibrationLedger<S>,
    /// Ledger of the raw forecasts, each snapped to its nearest grid point.
    raw: CalibrationLedger<S>,
    #[serde(skip)]
    pending: Option<PendingStep<S>>,
}

#[derive(Serialize)]
struct SnapshotOut<'a, S> {
    schema_version: u32,
    recalibrator: &'a Recalibrator<S>,
}

#[derive(Deserialize)]
#[serde(bound = "S: Scalar")]
struct SnapshotIn<S> {
    schema_version: u32,
    recalibrator: Recalibrator<S>,
}

impl<S: Scalar> Recalibrator<S> {
    pub fn new(n: usize, master_seed: u64, mode: UpdateMode) -> Result<Self> {
        let grid = ProbabilityGrid::new(n)?;
        Ok(Self {
            grid,
            mode,
            master_seed,
            instances: BTreeMap::new(),
            expected: CalibrationLedger::new(grid),
            realized: CalibrationLedger::new(grid),
            raw: CalibrationLedger::new(grid),
            pending: None,
        })
    }

    pub fn grid(&self) -> &ProbabilityGrid {
        &self.grid
    }

    pub fn mode(&self) -> UpdateMode {
        self.mode
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn pending(&self) -> Option<&PendingStep<S>> {
        self.pending.as_ref()
    }

    pub fn instances(&self) -> &BTreeMap<usize, BucketInstance<S>> {
        &self.instances
    }

    pub fn instance(&self, bucket: usize) -> Option<&CalibratorState<S>> {
        self.instances.get(&bucket).map(|b| &b.state)
    }

    pub fn expected_ledger(&self) -> &CalibrationLedger<S> {
        &self.expected
    }

    pub fn realized_ledger(&self) -> &CalibrationLedger<S> {
        &self.realized
    }

    pub fn raw_ledger(&self) -> &CalibrationLedger<S> {
        &self.raw
    }

    /// Rounds observed so far.
    pub fn steps(&self) -> u64 {
        self.expected.steps()
    }

    /// Rounds routed to each of the `n` buckets.
    pub fn routing_counts(&self) -> Vec<u64> {
        let mut counts = vec![0; self.grid.n()];
        for (&j, inst) in &self.instances {
            counts[j] = inst.routed();
        }
        counts
    }

    /// Routes `p_raw` to its bucket and returns that bucket's sampled forecast.
    pub fn step(&mut self, p_raw: S) -> Result<S> {
        if self.pending.is_some() {
            return Err(Error::ProtocolOrder("step called while a previous step awaits its outcome".into()));
        }
        let bucket = self.grid.bucket_index(p_raw)?;
        let grid = self.grid;
        let master = self.master_seed;
        let inst = self.instances.entry(bucket).or_insert_with(|| BucketInstance {
            state: CalibratorState::new(grid),
            rng: StreamRng::new(bucket_seed(master, bucket)),
            loss_emitted: S::zero(),
            loss_anchor: S::zero(),
        });
        let distribution = inst.state.forecast_distribution()?;
        let sampled = sample_forecast(&distribution, &mut inst.rng);
        let emitted = grid.point::<S>(sampled);
        self.pending = Some(PendingStep {
            bucket,
            distribution,
            sampled,
            emitted,
            raw: p_raw,
        });
        Ok(emitted)
    }

    /// Feeds the outcome of the pending round to its bucket and the ledgers.
    pub fn observe(&mut self, y: u8) -> Result<()> {
        check_outcome(y)?;
        let Some(p) = self.pending.take() else {
            return Err(Error::ProtocolOrder("observe called without a pending step".into()));
        };
        let inst = self
            .instances
            .get_mut(&p.bucket)
            .expect("pending bucket was instantiated by step");
        match self.mode {
            UpdateMode::Expected => inst.state.update(&p.distribution, p.sampled, y)?,
            UpdateMode::Sampled => {
                let mass = ForecastDistribution::point_mass(self.grid.len(), p.sampled);
                inst.state.update(&mass, p.sampled, y)?
            }
        }
        let ys = S::from_count(y as u64);
        let anchor = self.grid.point::<S>(p.bucket);
        inst.loss_emitted += (ys - p.emitted) * (ys - p.emitted);
        inst.loss_anchor += (ys - anchor) * (ys - anchor);

        self.expected.record(&p.distribution, y, p.emitted, p.raw)?;
        self.realized.record_point(p.sampled, y, p.emitted, p.raw)?;
        self.raw.record_point(self.grid.nearest(p.raw), y, p.emitted, p.raw)?;
        Ok(())
    }

    /// Measured `Σ_j (T_j/T)·R_j`, where `R_j` is bucket `j`'s average excess
    /// loss over constantly forecasting its nominal value `j/n`.
    pub fn anchor_regret_slack(&self) -> Result<S> {
        let t = self.steps();
        if t == 0 {
            return Err(Error::Empty);
        }
        let total: S = self.instances.values().map(|b| b.loss_emitted - b.loss_anchor).sum();
        Ok(total / S::from_count(t))
    }

    /// Largest internal regret over instantiated buckets.
    pub fn max_internal_regret(&self) -> Result<S> {
        let mut best = None;
        for inst in self.instances.values().filter(|b| b.routed() > 0) {
            let r = inst.state.internal_regret()?;
            best = Some(best.map_or(r, |b: S| b.max(r)));
        }
        best.ok_or(Error::Empty)
    }

    /// Versioned JSON serialization of the complete state.
    pub fn snapshot(&self) -> Result<String> {
        if self.pending.is_some() {
            return Err(Error::ProtocolOrder("cannot snapshot while a step awaits its outcome".into()));
        }
        Ok(serde_json::to_string_pretty(&SnapshotOut {
            schema_version: SNAPSHOT_SCHEMA_VERSION,
            recalibrator: self,
        })?)
    }

    pub fn restore(text: &str) -> Result<Self> {
        let snap: SnapshotIn<S> = serde_json::from_str(text)?;
        if snap.schema_version != SNAPSHOT_SCHEMA_VERSION {
            return Err(Error::Snapshot(format!(
                "unsupported schema version {} (expected {SNAPSHOT_SCHEMA_VERSION})",
                snap.schema_version
            )));
        }
        let rec = snap.recalibrator;
        rec.validate()?;
        Ok(rec)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        for (&j, inst) in &self.instances {
            if j >= self.grid.n() {
                return Err(Error::Snapshot(format!("bucket {j} outside resolution {}", self.grid.n())));
            }
            if inst.state.grid() != &self.grid {
                return Err(Error::Snapshot(format!("bucket {j} has a mismatched grid")));
            }
        }
        let routed: u64 = self.instances.values().map(|b| b.routed()).sum();
        for ledger in [&self.expected, &self.realized, &self.raw] {
            if ledger.grid() != &self.grid || ledger.steps() != routed {
                return Err(Error::Snapshot("ledger does not match routed step count".into()));
            }
        }
        Ok(())
    }
}
