//! Generic plot series and confidence intervals shared across modules.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// A two-sided interval at a stated confidence level.
///
/// `open_lo` / `open_hi` flag endpoints that could not be located inside the
/// searched range (the interval is open on that side).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    /// Confidence level, e.g. 0.95.
    pub level: f64,
    #[serde(default)]
    pub open_lo: bool,
    #[serde(default)]
    pub open_hi: bool,
}

impl Interval {
    pub fn new(lo: f64, hi: f64, level: f64) -> Self {
        Self {
            lo,
            hi,
            level,
            open_lo: false,
            open_hi: false,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// An (x, y) series with optional confidence bands, the common currency of
/// every figure-like output.
///
/// Metadata is an ordered map so that serialized output is deterministic.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lo: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hi: Option<Vec<f64>>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl PlotSeries {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        debug_assert_eq!(x.len(), y.len());
        Self {
            x,
            y,
            lo: None,
            hi: None,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_bands(x: Vec<f64>, y: Vec<f64>, lo: Vec<f64>, hi: Vec<f64>) -> Self {
        debug_assert!(x.len() == y.len() && y.len() == lo.len() && lo.len() == hi.len());
        Self {
            x,
            y,
            lo: Some(lo),
            hi: Some(hi),
            metadata: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.insert(key.to_string(), value.to_string());
    }
}
