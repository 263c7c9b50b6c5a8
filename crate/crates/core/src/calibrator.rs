//! Online calibration subroutine over a finite probability grid.
//!
//! Each instance keeps the cumulative swap-regret matrix
//! `R[i][j] = Σ_t w_{t,i}·((y_t − i/n)² − (y_t − j/n)²)` and forecasts with the
//! stationary distribution of the Markov chain whose transition rates are the
//! positive parts of `R`. Vanishing swap regret makes the forecasts calibrated
//! and, since row sums of `R` are external regrets, also minimises external
//! regret against every fixed grid point.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{check_outcome, Error, Result};
use crate::grid::ProbabilityGrid;
use crate::scalar::Scalar;
use crate::stationary::uniform_start_limit;

/// Iteration cap for the stationary-distribution solver.
pub const MAX_POWER_ITERATIONS: usize = 10_000;

/// A randomized forecast: a probability vector over the grid points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ForecastDistribution<S> {
    probabilities: Vec<S>,
}

impl<S: Scalar> ForecastDistribution<S> {
    /// Validates non-negativity and unit mass (within `1e-12`, or a few ulps for `f32`).
    pub fn new(probabilities: Vec<S>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::domain("distribution has no entries"));
        }
        if probabilities.iter().any(|p| !(*p >= S::zero() && *p <= S::one())) {
            return Err(Error::domain("distribution entries must lie in [0, 1]"));
        }
        let total: S = probabilities.iter().copied().sum();
        let tol = S::lit(1e-12).max(S::epsilon() * S::lit(16.0));
        if (total - S::one()).abs() > tol {
            return Err(Error::domain(format!("distribution sums to {total}, not 1")));
        }
        Ok(Self { probabilities })
    }

    pub fn point_mass(len: usize, index: usize) -> Self {
        let mut probabilities = vec![S::zero(); len];
        probabilities[index] = S::one();
        Self { probabilities }
    }

    pub fn uniform(len: usize) -> Self {
        let p = S::one() / S::from_count(len as u64);
        Self {
            probabilities: vec![p; len],
        }
    }

    #[inline]
    pub fn probabilities(&self) -> &[S] {
        &self.probabilities
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// Mean forecast value `Σ_i w_i·i/n`.
    pub fn mean(&self, grid: &ProbabilityGrid) -> S {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(i, &w)| w * grid.point::<S>(i))
            .sum()
    }

    /// Index of the single point carrying all mass, if any.
    pub fn as_point_mass(&self) -> Option<usize> {
        let mut nonzero = self.probabilities.iter().enumerate().filter(|(_, p)| **p > S::zero());
        match (nonzero.next(), nonzero.next()) {
            (Some((i, _)), None) => Some(i),
            _ => None,
        }
    }
}

/// Draws a grid index with probability `dist[i]`.
pub fn sample_forecast<S: Scalar, R: RngCore + ?Sized>(dist: &ForecastDistribution<S>, rng: &mut R) -> usize {
    let u = S::lit(unit(rng));
    let mut cumulative = S::zero();
    let mut last_positive = 0;
    for (i, &p) in dist.probabilities().iter().enumerate() {
        if p > S::zero() {
            last_positive = i;
            cumulative += p;
            if u < cumulative {
                return i;
            }
        }
    }
    // rounding left the cumulative sum a hair below u
    last_positive
}

fn unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    // 53 random mantissa bits, uniform on [0, 1)
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// State of one calibration subroutine instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratorState<S> {
    grid: ProbabilityGrid,
    /// Row-major `(n+1)×(n+1)` cumulative regret matrix.
    regret: Vec<S>,
    weighted_count: Vec<S>,
    weighted_outcome: Vec<S>,
    sampled_count: Vec<u64>,
    outcome_total: u64,
    steps: u64,
}

impl<S: Scalar> CalibratorState<S> {
    pub fn new(grid: ProbabilityGrid) -> Self {
        let m = grid.len();
        Self {
            grid,
            regret: vec![S::zero(); m * m],
            weighted_count: vec![S::zero(); m],
            weighted_outcome: vec![S::zero(); m],
            sampled_count: vec![0; m],
            outcome_total: 0,
            steps: 0,
        }
    }

    #[inline]
    pub fn grid(&self) -> &ProbabilityGrid {
        &self.grid
    }

    #[inline]
    pub fn steps(&self) -> u64 {
        self.steps
    }

    #[inline]
    pub fn regret(&self, i: usize, j: usize) -> S {
        self.regret[i * self.grid.len() + j]
    }

    pub fn weighted_count(&self) -> &[S] {
        &self.weighted_count
    }

    pub fn weighted_outcome(&self) -> &[S] {
        &self.weighted_outcome
    }

    pub fn sampled_count(&self) -> &[u64] {
        &self.sampled_count
    }

    /// Grid point nearest the running mean outcome (the midpoint before any data).
    fn cold_start_index(&self) -> usize {
        if self.steps == 0 {
            return self.grid.nearest(S::lit(0.5));
        }
        let mean = S::from_count(self.outcome_total) / S::from_count(self.steps);
        self.grid.nearest(mean)
    }

    /// Current randomized forecast.
    ///
    /// Builds the chain `Q[i][j] = R⁺[i][j]/μ` (i ≠ j), `Q[i][i] = 1 − Σ_{j≠i} Q[i][j]`
    /// with `μ` the largest positive row sum, and returns the limit of power
    /// iteration from the uniform vector. The limit is computed in closed form
    /// and then checked against `‖w − wQ‖₁ ≤ tol`; if the check fails, lazy
    /// power iteration continues from it up to [`MAX_POWER_ITERATIONS`].
    /// A matrix with no positive entry yields the cold-start point mass.
    pub fn forecast_distribution(&self) -> Result<ForecastDistribution<S>> {
        let m = self.grid.len();
        let Some(chain) = RegretChain::new(&self.regret, m) else {
            return Ok(ForecastDistribution::point_mass(m, self.cold_start_index()));
        };
        let tol = S::fixed_point_tolerance();
        let mut w = uniform_start_limit(&chain.rates, m);
        let mut next = vec![S::zero(); m];
        let mut residual = S::infinity();
        for _ in 0..=MAX_POWER_ITERATIONS {
            chain.apply(&w, &mut next);
            residual = w.iter().zip(&next).map(|(a, b)| (*a - *b).abs()).sum();
            if residual <= tol {
                return Ok(ForecastDistribution { probabilities: w });
            }
            // lazy step ½(w + wQ) keeps the iteration aperiodic
            for (a, b) in w.iter_mut().zip(&next) {
                *a = (*a + *b) * S::lit(0.5);
            }
            normalize(&mut w);
        }
        Err(Error::FixedPoint {
            iterations: MAX_POWER_ITERATIONS,
            residual: residual.as_f64(),
        })
    }

    /// `‖w − wQ‖₁` for the regret chain of this state; zero for a cold-start matrix.
    pub fn fixed_point_residual(&self, dist: &ForecastDistribution<S>) -> S {
        let m = self.grid.len();
        match RegretChain::new(&self.regret, m) {
            None => S::zero(),
            Some(chain) => {
                let mut next = vec![S::zero(); m];
                chain.apply(dist.probabilities(), &mut next);
                dist.probabilities().iter().zip(&next).map(|(a, b)| (*a - *b).abs()).sum()
            }
        }
    }

    /// Applies one expected update with the played distribution and records the sampled index.
    pub fn update(&mut self, played: &ForecastDistribution<S>, sampled: usize, y: u8) -> Result<()> {
        check_outcome(y)?;
        let m = self.grid.len();
        if played.len() != m {
            return Err(Error::domain(format!(
                "distribution has {} entries, grid has {m}",
                played.len()
            )));
        }
        if sampled >= m {
            return Err(Error::domain(format!("sampled index {sampled} out of range")));
        }
        let ys = S::from_count(y as u64);
        let losses: Vec<S> = (0..m)
            .map(|k| {
                let d = ys - self.grid.point::<S>(k);
                d * d
            })
            .collect();
        for (i, &wi) in played.probabilities().iter().enumerate() {
            if wi == S::zero() {
                continue;
            }
            let row = &mut self.regret[i * m..(i + 1) * m];
            for (j, r) in row.iter_mut().enumerate() {
                if j != i {
                    *r += wi * (losses[i] - losses[j]);
                }
            }
            self.weighted_count[i] += wi;
            self.weighted_outcome[i] += ys * wi;
        }
        self.sampled_count[sampled] += 1;
        self.outcome_total += y as u64;
        self.steps += 1;
        Ok(())
    }

    /// `max_{i≠j} R[i][j] / t` over rows `i` that have been played; may be negative.
    pub fn internal_regret(&self) -> Result<S> {
        if self.steps == 0 {
            return Err(Error::Empty);
        }
        let m = self.grid.len();
        let mut best = S::neg_infinity();
        for i in (0..m).filter(|&i| self.weighted_count[i] > S::zero()) {
            for j in 0..m {
                if i != j {
                    best = best.max(self.regret(i, j));
                }
            }
        }
        Ok(best / S::from_count(self.steps))
    }

    /// Swap regret `Σ_i max_j R[i][j] / t` (the best swap function in hindsight); never negative.
    pub fn swap_regret(&self) -> Result<S> {
        if self.steps == 0 {
            return Err(Error::Empty);
        }
        let m = self.grid.len();
        let total: S = (0..m)
            .map(|i| (0..m).map(|j| self.regret(i, j)).fold(S::zero(), S::max))
            .sum();
        Ok(total / S::from_count(self.steps))
    }

    /// Expected external regret against always forecasting grid point `j`:
    /// `Σ_i R[i][j] / t`.
    pub fn external_regret(&self, j: usize) -> Result<S> {
        if self.steps == 0 {
            return Err(Error::Empty);
        }
        if j >= self.grid.len() {
            return Err(Error::domain(format!("grid index {j} out of range")));
        }
        let total: S = (0..self.grid.len()).map(|i| self.regret(i, j)).sum();
        Ok(total / S::from_count(self.steps))
    }

    /// `max_i |sampled_count[i] − weighted_count[i]| / t`.
    pub fn expected_point_mass_gap(&self) -> Result<S> {
        if self.steps == 0 {
            return Err(Error::Empty);
        }
        let t = S::from_count(self.steps);
        Ok(self
            .sampled_count
            .iter()
            .zip(&self.weighted_count)
            .map(|(&k, &w)| (S::from_count(k) - w).abs())
            .fold(S::zero(), S::max)
            / t)
    }
}

fn normalize<S: Scalar>(w: &mut [S]) {
    let total: S = w.iter().copied().sum();
    if total > S::zero() {
        for x in w.iter_mut() {
            *x /= total;
        }
    }
}

/// Positive-part regret chain, scaled so its largest row sum is one.
struct RegretChain<S> {
    m: usize,
    rates: Vec<S>,
    stay: Vec<S>,
}

impl<S: Scalar> RegretChain<S> {
    fn new(regret: &[S], m: usize) -> Option<Self> {
        let mut rates = vec![S::zero(); m * m];
        let mut row_sums = vec![S::zero(); m];
        for i in 0..m {
            for j in 0..m {
                let r = regret[i * m + j];
                if i != j && r > S::zero() {
                    rates[i * m + j] = r;
                    row_sums[i] += r;
                }
            }
        }
        let mu = row_sums.iter().copied().fold(S::zero(), S::max);
        if mu <= S::zero() {
            return None;
        }
        for r in rates.iter_mut() {
            *r /= mu;
        }
        let stay = row_sums.iter().map(|&s| S::one() - s / mu).collect();
        Some(Self { m, rates, stay })
    }

    /// `out = w Q`.
    fn apply(&self, w: &[S], out: &mut [S]) {
        for (o, (&wj, &s)) in out.iter_mut().zip(w.iter().zip(&self.stay)) {
            *o = wj * s;
        }
        for (i, &wi) in w.iter().enumerate() {
            if wi == S::zero() {
                continue;
            }
            let row = &self.rates[i * self.m..(i + 1) * self.m];
            for (o, &q) in out.iter_mut().zip(row) {
                *o += wi * q;
            }
        }
    }
}
