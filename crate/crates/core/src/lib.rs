//! Online recalibration of probability forecasts.
//!
//! A [`Recalibrator`](recalibrator::Recalibrator) sits behind any online
//! probability forecaster. It routes each raw forecast to the bucket of
//! `[0, 1]` containing it and lets an independent regret-matching calibration
//! subroutine for that bucket choose the emitted forecast from the grid
//! `{i/n}`. The emitted forecasts are calibrated, and their squared loss is
//! at most about `1/n` above the raw forecasts'.
//!
//! Core types are generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix the precision.

pub mod calibrator;
pub mod error;
pub mod forecasters;
pub mod grid;
pub mod harness;
pub mod metrics;
pub mod recalibrator;
pub mod rng;
pub mod scalar;
mod stationary;
pub mod transcript;

pub use error::{Error, Result};
pub use grid::{bucket_index, ProbabilityGrid};
pub use recalibrator::UpdateMode;
pub use scalar::Scalar;

pub type CalibratorStateF64 = calibrator::CalibratorState<f64>;
pub type CalibratorStateF32 = calibrator::CalibratorState<f32>;
pub type ForecastDistributionF64 = calibrator::ForecastDistribution<f64>;
pub type ForecastDistributionF32 = calibrator::ForecastDistribution<f32>;
pub type CalibrationLedgerF64 = metrics::CalibrationLedger<f64>;
pub type CalibrationLedgerF32 = metrics::CalibrationLedger<f32>;
pub type RecalibratorF64 = recalibrator::Recalibrator<f64>;
pub type RecalibratorF32 = recalibrator::Recalibrator<f32>;
pub type LogisticForecasterF64 = forecasters::LogisticForecaster<f64>;
pub type LogisticForecasterF32 = forecasters::LogisticForecaster<f32>;
pub type ExpertAggregatorF64 = forecasters::ExpertAggregator<f64>;
pub type ExpertAggregatorF32 = forecasters::ExpertAggregator<f32>;
