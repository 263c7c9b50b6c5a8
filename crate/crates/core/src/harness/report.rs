use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::Experiment;
use crate::error::{Error, Result};
use crate::metrics::{per_bucket_decomposition, Decomposition, ReliabilityRow};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub bucket: usize,
    pub routed: u64,
    pub internal_regret: f64,
    pub swap_regret: f64,
    pub point_mass_gap: f64,
    /// Average excess loss over constantly forecasting the bucket's nominal value.
    pub anchor_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertSummary {
    pub weights: Vec<f64>,
    pub expert_mean_losses: Vec<f64>,
    pub aggregate_mean_loss: f64,
    /// Aggregate's average excess loss over each expert.
    pub regrets: Vec<f64>,
    pub external_regret: f64,
    pub best_expert_mean_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub rounds: u64,
    pub calibration_error_expected: f64,
    pub calibration_error_sampled: f64,
    /// Calibration error of the raw forecasts snapped to the grid.
    pub calibration_error_raw: f64,
    pub l2_regret: f64,
    pub mean_loss_emitted: f64,
    pub mean_loss_raw: f64,
    pub anchor_regret_slack: f64,
    pub max_internal_regret: f64,
    pub routing_counts: Vec<u64>,
    pub instances: Vec<InstanceSummary>,
    pub decomposition: Decomposition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experts: Option<ExpertSummary>,
    pub reliability: Vec<ReliabilityRow>,
    pub reliability_sampled: Vec<ReliabilityRow>,
    pub wall_clock_seconds: f64,
}

impl Report {
    pub(super) fn build(exp: &Experiment, wall_clock_seconds: f64) -> Result<Self> {
        let rec = exp.recalibrator();
        let instances = rec
            .instances()
            .iter()
            .filter(|(_, b)| b.routed() > 0)
            .map(|(&bucket, b)| {
                Ok(InstanceSummary {
                    bucket,
                    routed: b.routed(),
                    internal_regret: b.state.internal_regret()?,
                    swap_regret: b.state.swap_regret()?,
                    point_mass_gap: b.state.expected_point_mass_gap()?,
                    anchor_regret: (b.loss_emitted - b.loss_anchor) / b.routed() as f64,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let experts = match exp.aggregator() {
            Some(agg) => {
                let losses = (0..agg.experts())
                    .map(|k| agg.expert_mean_loss(k))
                    .collect::<Result<Vec<_>>>()?;
                Some(ExpertSummary {
                    weights: agg.weights(),
                    best_expert_mean_loss: losses.iter().copied().fold(f64::INFINITY, f64::min),
                    expert_mean_losses: losses,
                    aggregate_mean_loss: agg.mean_loss()?,
                    regrets: agg.regrets()?,
                    external_regret: agg.external_regret()?,
                })
            }
            None => None,
        };

        let report = Report {
            schema_version: REPORT_SCHEMA_VERSION,
            config: exp.config().clone(),
            rounds: exp.round(),
            calibration_error_expected: rec.expected_ledger().calibration_error()?,
            calibration_error_sampled: rec.realized_ledger().calibration_error()?,
            calibration_error_raw: rec.raw_ledger().calibration_error()?,
            l2_regret: rec.expected_ledger().l2_regret()?,
            mean_loss_emitted: rec.expected_ledger().mean_loss_emitted()?,
            mean_loss_raw: rec.expected_ledger().mean_loss_raw()?,
            anchor_regret_slack: rec.anchor_regret_slack()?,
            max_internal_regret: rec.max_internal_regret()?,
            routing_counts: rec.routing_counts(),
            instances,
            decomposition: per_bucket_decomposition(rec)?,
            experts,
            reliability: rec.expected_ledger().reliability_bins(),
            reliability_sampled: rec.realized_ledger().reliability_bins(),
            wall_clock_seconds,
        };
        report.check_finite()?;
        Ok(report)
    }

    fn check_finite(&self) -> Result<()> {
        let mut values = vec![
            self.calibration_error_expected,
            self.calibration_error_sampled,
            self.calibration_error_raw,
            self.l2_regret,
            self.mean_loss_emitted,
            self.mean_loss_raw,
            self.anchor_regret_slack,
            self.max_internal_regret,
            self.wall_clock_seconds,
        ];
        for i in &self.instances {
            values.extend([i.internal_regret, i.swap_regret, i.point_mass_gap, i.anchor_regret]);
        }
        for r in &self.decomposition.rows {
            values.extend([r.bucket_term, r.aggregate]);
        }
        for r in self.reliability.iter().chain(&self.reliability_sampled) {
            values.extend([r.grid_value, r.rho, r.weight_share, r.count]);
        }
        if let Some(e) = &self.experts {
            values.extend(e.weights.iter().chain(&e.expert_mean_losses).chain(&e.regrets));
            values.extend([e.aggregate_mean_loss, e.external_regret, e.best_expert_mean_loss]);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("report contains a non-finite value"));
        }
        Ok(())
    }

    /// The report with its wall-clock field zeroed, for run-to-run comparison.
    pub fn without_wall_clock(&self) -> Self {
        Self {
            wall_clock_seconds: 0.0,
            ..self.clone()
        }
    }
}

/// `report.json` → `report.reliability.csv`.
pub fn reliability_csv_path(report_path: &Path) -> PathBuf {
    report_path.with_extension("reliability.csv")
}

/// Writes the JSON report and its companion reliability CSV
/// (`grid_value,rho,weight_share,count`).
pub fn emit_report(report: &Report, path: &Path) -> Result<()> {
    report.check_finite()?;
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, report)?;
    out.write_all(b"\n")?;
    out.flush()?;

    let mut csv = csv::Writer::from_path(reliability_csv_path(path))?;
    for row in &report.reliability {
        csv.serialize(row)?;
    }
    csv.flush()?;
    Ok(())
}
