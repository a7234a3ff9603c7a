//! Validated, ascending-sorted loss observations.

use crate::error::{Error, Result};

/// An ascending-sorted sample of positive, finite loss observations,
/// with order-statistic accessors.
///
/// Sorting is stable, so ties keep their input order. Order statistics follow
/// the "i-th smallest" convention: `x_{1:n} <= ... <= x_{n:n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedSample {
    values: Vec<f64>,
}

impl OrderedSample {
    /// Validate and sort a raw sample. All values must be finite and > 0,
    /// and the sample must be non-empty.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("sample must be non-empty".into()));
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "sample value at index {i} is not finite"
                )));
            }
            if v <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "sample value at index {i} is not positive: {v}"
                )));
            }
        }
        values.sort_by(|a, b| a.partial_cmp(b).expect("finite values compare"));
        Ok(Self { values })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// Sorted values, ascending.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().expect("non-empty")
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.n() as f64
    }

    /// The i-th smallest observation, 1-based: `order_stat(1) == min`,
    /// `order_stat(n) == max`.
    pub fn order_stat(&self, i: usize) -> f64 {
        assert!(
            i >= 1 && i <= self.n(),
            "order statistic index out of range"
        );
        self.values[i - 1]
    }

    /// Empirical quantile at level `q` in [0,1]: the `ceil(q*n)`-th smallest
    /// observation (clamped to [1, n]).
    pub fn empirical_quantile(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidInput(format!(
                "quantile level must lie in [0,1], got {q}"
            )));
        }
        let n = self.n();
        let k = ((q * n as f64).ceil() as usize).clamp(1, n);
        Ok(self.values[k - 1])
    }

    /// Observations strictly above `u`, as a slice of the sorted values.
    pub fn exceedances(&self, u: f64) -> &[f64] {
        let idx = self.values.partition_point(|&v| v <= u);
        &self.values[idx..]
    }

    /// Number of observations strictly above `u`.
    pub fn n_exceed(&self, u: f64) -> usize {
        self.exceedances(u).len()
    }

    /// Observations less than or equal to `u`.
    pub fn body(&self, u: f64) -> &[f64] {
        let idx = self.values.partition_point(|&v| v <= u);
        &self.values[..idx]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorts_and_validates() {
        let s = OrderedSample::new(vec![3.0, 1.0, 2.0]).unwrap();
        assert_eq!(s.values(), &[1.0, 2.0, 3.0]);
        assert_eq!(s.order_stat(1), 1.0);
        assert_eq!(s.order_stat(3), 3.0);
        assert_eq!(s.n(), 3);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(OrderedSample::new(vec![]).is_err());
        assert!(OrderedSample::new(vec![1.0, 0.0]).is_err());
        assert!(OrderedSample::new(vec![1.0, -2.0]).is_err());
        assert!(OrderedSample::new(vec![1.0, f64::NAN]).is_err());
        assert!(OrderedSample::new(vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn sorting_is_idempotent() {
        let s1 = OrderedSample::new(vec![5.0, 2.0, 9.0, 2.0]).unwrap();
        let s2 = OrderedSample::new(s1.values().to_vec()).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn exceedances_are_strict() {
        let s = OrderedSample::new(vec![1.0, 2.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.exceedances(2.0), &[3.0]);
        assert_eq!(s.n_exceed(2.0), 1);
        assert_eq!(s.body(2.0), &[1.0, 2.0, 2.0]);
        assert_eq!(s.n_exceed(0.5), 4);
    }

    #[test]
    fn empirical_quantile_convention() {
        let s = OrderedSample::new((1..=10).map(|i| i as f64).collect()).unwrap();
        assert_eq!(s.empirical_quantile(0.8).unwrap(), 8.0);
        assert_eq!(s.empirical_quantile(0.0).unwrap(), 1.0);
        assert_eq!(s.empirical_quantile(1.0).unwrap(), 10.0);
        assert!(s.empirical_quantile(1.2).is_err());
    }
}
