use serde::{Deserialize, Serialize};

/// One verified property: the largest residual seen over all samples and the
/// tolerance it was judged against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub applicable: bool,
    pub pass: bool,
}

impl PropertyCheck {
    pub fn new(name: impl Into<String>, max_residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            max_residual,
            tolerance,
            applicable: true,
            pass: max_residual <= tolerance,
        }
    }

    /// A check that passes only when `flag` holds; the residual records the
    /// number of counterexamples.
    pub fn boolean(name: impl Into<String>, counterexamples: usize) -> Self {
        Self {
            name: name.into(),
            max_residual: counterexamples as f64,
            tolerance: 0.0,
            applicable: true,
            pass: counterexamples == 0,
        }
    }

    pub fn not_applicable(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            max_residual: 0.0,
            tolerance: 0.0,
            applicable: false,
            pass: true,
        }
    }
}

/// Running maximum that treats NaN as failure.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct MaxTracker(f64);

impl MaxTracker {
    pub fn push(&mut self, v: f64) {
        if v.is_nan() {
            self.0 = f64::INFINITY;
        } else if v > self.0 {
            self.0 = v;
        }
    }

    pub fn get(&self) -> f64 {
        self.0
    }
}
