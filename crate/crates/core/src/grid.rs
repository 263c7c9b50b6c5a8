//! The finite set of forecast values `{i/n : i = 0..=n}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Uniform grid of `n + 1` probabilities with spacing `1/n`.
///
/// Point values are computed as `i/n` on demand and never cached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbabilityGrid {
    n: usize,
}

impl ProbabilityGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("grid resolution n must be at least 1".into()));
        }
        Ok(Self { n })
    }

    /// Builds a grid and checks that its spacing `1/n` is strictly below `epsilon`.
    pub fn with_accuracy(n: usize, epsilon: f64) -> Result<Self> {
        let grid = Self::new(n)?;
        if 1.0 / n as f64 >= epsilon {
            return Err(Error::Config(format!(
                "resolution 1/{n} is not below the accuracy target {epsilon}"
            )));
        }
        Ok(grid)
    }

    /// Resolution count; the grid has `n + 1` points.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n + 1
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn point<S: Scalar>(&self, i: usize) -> S {
        debug_assert!(i <= self.n);
        S::from_count(i as u64) / S::from_count(self.n as u64)
    }

    /// Index of the grid point nearest to `x`, ties toward the lower index.
    pub fn nearest<S: Scalar>(&self, x: S) -> usize {
        let scaled = x.max(S::zero()).min(S::one()) * S::from_count(self.n as u64);
        let lo = scaled.floor();
        let mut i = lo.to_usize().unwrap_or(0).min(self.n);
        if scaled - lo > S::lit(0.5) {
            i = (i + 1).min(self.n);
        }
        i
    }

    /// Bucket `[j/n, (j+1)/n)` containing `p`; the last bucket `[(n-1)/n, 1]` is closed.
    pub fn bucket_index<S: Scalar>(&self, p: S) -> Result<usize> {
        if !(p >= S::zero() && p <= S::one()) {
            return Err(Error::domain(format!("raw forecast {p} is outside [0, 1]")));
        }
        let j = (p * S::from_count(self.n as u64)).floor().to_usize().unwrap_or(0);
        Ok(j.min(self.n - 1))
    }
}

/// Bucket index for a raw forecast at resolution `n`.
pub fn bucket_index<S: Scalar>(p_raw: S, n: usize) -> Result<usize> {
    ProbabilityGrid::new(n)?.bucket_index(p_raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_spacing() {
        let g = ProbabilityGrid::new(10).unwrap();
        assert_eq!(g.point::<f64>(0), 0.0);
        assert_eq!(g.point::<f64>(10), 1.0);
        for i in 0..10 {
            let gap = g.point::<f64>(i + 1) - g.point::<f64>(i);
            assert!((gap - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_resolution_rejected() {
        assert!(ProbabilityGrid::new(0).is_err());
    }

    #[test]
    fn accuracy_target_checked() {
        assert!(ProbabilityGrid::with_accuracy(10, 0.1).is_err());
        assert!(ProbabilityGrid::with_accuracy(11, 0.1).is_ok());
    }

    #[test]
    fn bucket_examples() {
        assert_eq!(bucket_index(0.0f64, 10).unwrap(), 0);
        assert_eq!(bucket_index(1.0f64, 10).unwrap(), 9);
        assert_eq!(bucket_index(0.35f64, 10).unwrap(), 3);
        assert_eq!(bucket_index(0.35f32, 10).unwrap(), 3);
    }

    #[test]
    fn bucket_out_of_range() {
        assert!(matches!(bucket_index(1.5f64, 10), Err(Error::Domain(_))));
        assert!(matches!(bucket_index(-0.01f64, 10), Err(Error::Domain(_))));
        assert!(matches!(bucket_index(f64::NAN, 10), Err(Error::Domain(_))));
    }

    #[test]
    fn nearest_ties_low() {
        let g = ProbabilityGrid::new(1).unwrap();
        assert_eq!(g.nearest(0.5f64), 0);
        let g = ProbabilityGrid::new(10).unwrap();
        assert_eq!(g.nearest(0.5f64), 5);
        assert_eq!(g.nearest(0.26f64), 3);
        assert_eq!(g.nearest(1.0f64), 10);
    }
}
