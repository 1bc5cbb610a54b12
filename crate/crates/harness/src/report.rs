//! Machine-readable experiment reports.

use markcfg_core::sampling::Estimate;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::experiments::Experiment;

pub const REPORT_FORMAT: u32 = 1;

/// One verified identity: an estimate against its target and the bound that decides it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub estimate: f64,
    pub target: f64,
    /// Standard error, for Monte Carlo checks.
    pub std_error: Option<f64>,
    /// Requested quadrature tolerance, for quadrature checks.
    pub quadrature_tol: Option<f64>,
    /// Largest admissible |estimate − target|.
    pub bound: f64,
    pub pass: bool,
}

impl CheckRecord {
    /// Passes when |estimate − target| ≤ max(k·SE, floor).
    pub fn monte_carlo(name: impl Into<String>, est: Estimate, target: f64, tol: &Tolerances) -> Self {
        let bound = (tol.se_multiplier * est.std_error).max(tol.floor);
        CheckRecord {
            name: name.into(),
            estimate: est.mean,
            target,
            std_error: Some(est.std_error),
            quadrature_tol: None,
            bound,
            pass: (est.mean - target).abs() <= bound,
        }
    }

    pub fn quadrature(name: impl Into<String>, value: f64, target: f64, bound: f64, requested: f64) -> Self {
        CheckRecord {
            name: name.into(),
            estimate: value,
            target,
            std_error: None,
            quadrature_tol: Some(requested),
            bound,
            pass: (value - target).abs() <= bound,
        }
    }

    /// Largest relative deviation over a set of pointwise comparisons, against 0.
    pub fn relative(name: impl Into<String>, worst: f64, bound: f64) -> Self {
        CheckRecord {
            name: name.into(),
            estimate: worst,
            target: 0.0,
            std_error: None,
            quadrature_tol: None,
            bound,
            pass: worst <= bound,
        }
    }

    /// Exact comparison; the bound is zero and the values must agree bitwise.
    pub fn exact(name: impl Into<String>, value: f64, target: f64) -> Self {
        CheckRecord {
            name: name.into(),
            estimate: value,
            target,
            std_error: None,
            quadrature_tol: None,
            bound: 0.0,
            pass: value.to_bits() == target.to_bits(),
        }
    }

    /// Passes when the statistic stays at or below the bound.
    pub fn upper(name: impl Into<String>, statistic: f64, expected: f64, bound: f64) -> Self {
        CheckRecord {
            name: name.into(),
            estimate: statistic,
            target: expected,
            std_error: None,
            quadrature_tol: None,
            bound,
            pass: statistic <= bound,
        }
    }

    /// Passes when the statistic reaches the bound.
    pub fn lower(name: impl Into<String>, statistic: f64, bound: f64) -> Self {
        CheckRecord {
            name: name.into(),
            estimate: statistic,
            target: bound,
            std_error: None,
            quadrature_tol: None,
            bound,
            pass: statistic >= bound,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub preset: Option<String>,
    pub model: String,
    pub dim: usize,
    pub total_mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format: u32,
    pub version: String,
    pub experiment: Experiment,
    /// The identity under test, in the notation of the library docs.
    pub identity: String,
    pub scenario: ScenarioSummary,
    pub seed: u64,
    pub n_samples: u64,
    pub records: Vec<CheckRecord>,
    pub pass: bool,
    pub wall_clock_seconds: f64,
}

impl Report {
    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.records.iter().filter(|r| !r.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// The JSON payload without the wall-clock field, which is the only
    /// part that differs between runs of the same config and seed.
    pub fn payload_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("reports serialize");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("wall_clock_seconds");
        }
        serde_json::to_string_pretty(&v).expect("reports serialize")
    }
}
