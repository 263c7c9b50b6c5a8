//! Incremental calibration statistics.
//!
//! A [`CalibrationLedger`] holds, per grid point, the accumulated forecast
//! weight and outcome-weighted mass, plus the squared-loss totals of the
//! emitted and raw forecasts. Fed with full distributions it yields the
//! expected-mode quantities; fed with point masses it yields the realised ones.

use serde::{Deserialize, Serialize};

use crate::calibrator::ForecastDistribution;
use crate::error::{check_outcome, Error, Result};
use crate::grid::ProbabilityGrid;
use crate::recalibrator::Recalibrator;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationLedger<S> {
    grid: ProbabilityGrid,
    weight: Vec<S>,
    outcome_weight: Vec<S>,
    steps: u64,
    loss_emitted: S,
    loss_raw: S,
}

/// One row of a reliability diagram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityRow {
    pub grid_value: f64,
    pub rho: f64,
    pub weight_share: f64,
    /// Accumulated weight (a play count in realised mode).
    pub count: f64,
}

impl<S: Scalar> CalibrationLedger<S> {
    pub fn new(grid: ProbabilityGrid) -> Self {
        Self {
            grid,
            weight: vec![S::zero(); grid.len()],
            outcome_weight: vec![S::zero(); grid.len()],
            steps: 0,
            loss_emitted: S::zero(),
            loss_raw: S::zero(),
        }
    }

    /// Builds a ledger from per-point sums; loss totals start at zero.
    pub fn from_sums(grid: ProbabilityGrid, weight: Vec<S>, outcome_weight: Vec<S>, steps: u64) -> Result<Self> {
        if weight.len() != grid.len() || outcome_weight.len() != grid.len() {
            return Err(Error::domain("ledger arrays do not match the grid"));
        }
        Ok(Self {
            grid,
            weight,
            outcome_weight,
            steps,
            loss_emitted: S::zero(),
            loss_raw: S::zero(),
        })
    }

    pub fn grid(&self) -> &ProbabilityGrid {
        &self.grid
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn weight(&self) -> &[S] {
        &self.weight
    }

    pub fn outcome_weight(&self) -> &[S] {
        &self.outcome_weight
    }

    pub fn loss_emitted(&self) -> S {
        self.loss_emitted
    }

    pub fn loss_raw(&self) -> S {
        self.loss_raw
    }

    /// Records one round with forecast weights `dist`.
    pub fn record(&mut self, dist: &ForecastDistribution<S>, y: u8, emitted: S, raw: S) -> Result<()> {
        check_outcome(y)?;
        if dist.len() != self.grid.len() {
            return Err(Error::domain("distribution does not match the ledger grid"));
        }
        let ys = S::from_count(y as u64);
        for (i, &w) in dist.probabilities().iter().enumerate() {
            self.weight[i] += w;
            self.outcome_weight[i] += ys * w;
        }
        self.add_losses(ys, emitted, raw);
        Ok(())
    }

    /// Records one round whose forecast was exactly grid point `index`.
    pub fn record_point(&mut self, index: usize, y: u8, emitted: S, raw: S) -> Result<()> {
        check_outcome(y)?;
        if index >= self.grid.len() {
            return Err(Error::domain(format!("grid index {index} out of range")));
        }
        let ys = S::from_count(y as u64);
        self.weight[index] += S::one();
        self.outcome_weight[index] += ys;
        self.add_losses(ys, emitted, raw);
        Ok(())
    }

    fn add_losses(&mut self, y: S, emitted: S, raw: S) {
        self.loss_emitted += (y - emitted) * (y - emitted);
        self.loss_raw += (y - raw) * (y - raw);
        self.steps += 1;
    }

    /// Conditional outcome frequency at grid point `i`; `None` for an empty bin.
    pub fn rho(&self, i: usize) -> Option<S> {
        let w = *self.weight.get(i)?;
        (w > S::zero()).then(|| self.outcome_weight[i] / w)
    }

    /// `C_T = Σ_i (ρ(i) − i/n)² · weight[i]/T`, empty bins contributing zero.
    pub fn calibration_error(&self) -> Result<S> {
        if self.steps == 0 {
            return Err(Error::Empty);
        }
        let t = S::from_count(self.steps);
        Ok((0..self.grid.len())
            .filter_map(|i| {
                let d = self.rho(i)? - self.grid.point::<S>(i);
                Some(d * d * self.weight[i] / t)
            })
            .sum())
    }

    /// Average squared-loss excess of the emitted forecasts over the raw ones.
    pub fn l2_regret(&self) -> Result<S> {
        if self.steps == 0 {
            return Err(Error::Empty);
        }
        Ok((self.loss_emitted - self.loss_raw) / S::from_count(self.steps))
    }

    pub fn mean_loss_emitted(&self) -> Result<S> {
        if self.steps == 0 {
            return Err(Error::Empty);
        }
        Ok(self.loss_emitted / S::from_count(self.steps))
    }

    pub fn mean_loss_raw(&self) -> Result<S> {
        if self.steps == 0 {
            return Err(Error::Empty);
        }
        Ok(self.loss_raw / S::from_count(self.steps))
    }

    /// Occupied grid points in ascending order with their frequency and weight share.
    pub fn reliability_bins(&self) -> Vec<ReliabilityRow> {
        let total: S = self.weight.iter().copied().sum();
        (0..self.grid.len())
            .filter_map(|i| {
                let rho = self.rho(i)?;
                Some(ReliabilityRow {
                    grid_value: self.grid.point::<S>(i).as_f64(),
                    rho: rho.as_f64(),
                    weight_share: (self.weight[i] / total).as_f64(),
                    count: self.weight[i].as_f64(),
                })
            })
            .collect()
    }
}

/// One bucket's contribution to the calibration term at one grid target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRow {
    pub bucket: usize,
    pub target: usize,
    /// The bucket's own term `(ρ⁽ⁱ⁾(j) − j/n)² · W⁽ⁱ⁾_j / T_i`.
    pub bucket_term: f64,
    /// Rounds routed to the bucket (`T_i`).
    pub routed: u64,
    /// Aggregate term `(ρ(j) − j/n)² · W_j / T` at this target.
    pub aggregate: f64,
}

/// Both sides of the convexity bound at one grid target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetBound {
    pub target: usize,
    pub aggregate: f64,
    /// `Σ_i (T_i/T) · bucket_term_i`.
    pub weighted_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub rows: Vec<DecompositionRow>,
    pub targets: Vec<TargetBound>,
}

impl Decomposition {
    /// Largest `aggregate − weighted_sum`; nonpositive up to rounding.
    pub fn max_violation(&self) -> f64 {
        self.targets
            .iter()
            .map(|b| b.aggregate - b.weighted_sum)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Splits the calibration error of `rec` into per-bucket, per-target terms.
///
/// Aggregates are formed from the bucket subroutines' own statistics, so the
/// bound holds in either update mode.
pub fn per_bucket_decomposition<S: Scalar>(rec: &Recalibrator<S>) -> Result<Decomposition> {
    let total = rec.steps();
    if total == 0 {
        return Err(Error::Empty);
    }
    let grid = *rec.grid();
    let t = S::from_count(total);
    let m = grid.len();
    let mut agg_w = vec![S::zero(); m];
    let mut agg_o = vec![S::zero(); m];
    let mut weighted = vec![S::zero(); m];
    let mut per_bucket = Vec::new();

    for (&bucket, inst) in rec.instances() {
        let state = &inst.state;
        let ti = state.steps();
        if ti == 0 {
            continue;
        }
        let ti_s = S::from_count(ti);
        for target in 0..m {
            let w = state.weighted_count()[target];
            if w <= S::zero() {
                continue;
            }
            let o = state.weighted_outcome()[target];
            agg_w[target] += w;
            agg_o[target] += o;
            let d = o / w - grid.point::<S>(target);
            let term = d * d * w / ti_s;
            weighted[target] += ti_s / t * term;
            per_bucket.push((bucket, target, term, ti));
        }
    }

    let aggregate: Vec<S> = (0..m)
        .map(|j| {
            if agg_w[j] > S::zero() {
                let d = agg_o[j] / agg_w[j] - grid.point::<S>(j);
                d * d * agg_w[j] / t
            } else {
                S::zero()
            }
        })
        .collect();

    let rows = per_bucket
        .into_iter()
        .map(|(bucket, target, term, routed)| DecompositionRow {
            bucket,
            target,
            bucket_term: term.as_f64(),
            routed,
            aggregate: aggregate[target].as_f64(),
        })
        .collect();
    let targets = (0..m)
        .filter(|&j| agg_w[j] > S::zero())
        .map(|j| TargetBound {
            target: j,
            aggregate: aggregate[j].as_f64(),
            weighted_sum: weighted[j].as_f64(),
        })
        .collect();
    Ok(Decomposition { rows, targets })
}
