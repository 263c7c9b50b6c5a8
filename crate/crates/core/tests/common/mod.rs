//! Batch oracles shared by the integration tests.
//!
//! Everything here recomputes a quantity from a logged transcript with plain
//! loops, without going through the incremental code paths under test.

#![allow(dead_code, clippy::needless_range_loop)]

use online_recal::harness::{Experiment, ExperimentConfig, GeneratorKind, Mode};
use online_recal::transcript::TranscriptRecord;

pub fn point(n: usize, i: usize) -> f64 {
    i as f64 / n as f64
}

/// Nearest grid index, ties toward the lower index.
pub fn nearest(n: usize, x: f64) -> usize {
    let lo = ((x * n as f64).floor() as usize).min(n);
    let hi = (lo + 1).min(n);
    if (x - point(n, hi)).abs() < (x - point(n, lo)).abs() {
        hi
    } else {
        lo
    }
}

/// Runs a config to its horizon with a transcript attached.
pub fn run_logged(config: ExperimentConfig) -> Experiment {
    let mut exp = Experiment::new(config).unwrap();
    exp.record_transcript();
    exp.advance(None).unwrap();
    exp
}

pub fn generated(kind: &str, n: usize, horizon: u64, seed: u64) -> ExperimentConfig {
    let kind: GeneratorKind = kind.parse().unwrap();
    let mode = if matches!(kind, GeneratorKind::ExpertPanel { .. }) {
        Mode::MultiExpert
    } else {
        Mode::Covariate
    };
    ExperimentConfig::generated(mode, kind, n, horizon, seed)
}

/// Per-grid-point weight and outcome-weight sums.
#[derive(Debug, Clone)]
pub struct Sums {
    pub weight: Vec<f64>,
    pub outcome: Vec<f64>,
    pub steps: u64,
}

impl Sums {
    pub fn new(n: usize) -> Self {
        Self {
            weight: vec![0.0; n + 1],
            outcome: vec![0.0; n + 1],
            steps: 0,
        }
    }

    pub fn add(&mut self, w: &[f64], y: u8) {
        for (i, &wi) in w.iter().enumerate() {
            self.weight[i] += wi;
            self.outcome[i] += wi * y as f64;
        }
        self.steps += 1;
    }

    /// `Σ_i W_i (O_i/W_i − i/n)² / T`.
    pub fn calibration_error(&self) -> f64 {
        let n = self.weight.len() - 1;
        let mut c = 0.0;
        for i in 0..=n {
            if self.weight[i] > 0.0 {
                let d = self.outcome[i] / self.weight[i] - point(n, i);
                c += self.weight[i] * d * d;
            }
        }
        c / self.steps as f64
    }
}

pub fn indicator(n: usize, i: usize) -> Vec<f64> {
    let mut w = vec![0.0; n + 1];
    w[i] = 1.0;
    w
}

/// Expected, realized and raw-snapped sums over a transcript.
pub fn ledgers(n: usize, log: &[TranscriptRecord]) -> (Sums, Sums, Sums) {
    let (mut e, mut r, mut raw) = (Sums::new(n), Sums::new(n), Sums::new(n));
    for rec in log {
        e.add(&rec.distribution, rec.y);
        r.add(&indicator(n, rec.sampled), rec.y);
        raw.add(&indicator(n, nearest(n, rec.raw.unwrap())), rec.y);
    }
    (e, r, raw)
}

/// Average squared-loss excess of the sampled grid point over the raw forecast.
pub fn l2_regret(n: usize, log: &[TranscriptRecord]) -> f64 {
    let mut total = 0.0;
    for rec in log {
        let y = rec.y as f64;
        let emitted = point(n, rec.sampled);
        let raw = rec.raw.unwrap();
        total += (y - emitted).powi(2) - (y - raw).powi(2);
    }
    total / log.len() as f64
}

/// `R[i][j] = Σ_t w_t[i]·((y_t − i/n)² − (y_t − j/n)²)` from (played, y) pairs.
pub fn regret_matrix(n: usize, plays: &[(Vec<f64>, u8)]) -> Vec<Vec<f64>> {
    let mut r = vec![vec![0.0; n + 1]; n + 1];
    for (w, y) in plays {
        let y = *y as f64;
        for i in 0..=n {
            for j in 0..=n {
                if i != j && w[i] != 0.0 {
                    r[i][j] += w[i] * ((y - point(n, i)).powi(2) - (y - point(n, j)).powi(2));
                }
            }
        }
    }
    r
}

/// `‖w − wQ‖₁` for the positive-part regret chain, built from scratch.
pub fn chain_residual(r: &[Vec<f64>], w: &[f64]) -> f64 {
    let m = r.len();
    let row_sums: Vec<f64> = (0..m)
        .map(|i| (0..m).filter(|&j| j != i).map(|j| r[i][j].max(0.0)).sum())
        .collect();
    let mu = row_sums.iter().copied().fold(0.0, f64::max);
    assert!(mu > 0.0, "cold-start matrix has no chain");
    let mut next = vec![0.0; m];
    for i in 0..m {
        for j in 0..m {
            let q = if i == j {
                1.0 - row_sums[i] / mu
            } else {
                r[i][j].max(0.0) / mu
            };
            next[j] += w[i] * q;
        }
    }
    w.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = xs.len();
    if k % 2 == 1 {
        xs[k / 2]
    } else {
        (xs[k / 2 - 1] + xs[k / 2]) / 2.0
    }
}
