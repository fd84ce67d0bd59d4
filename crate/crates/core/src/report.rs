//! Machine-readable run reports.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

/// Work counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cost {
    pub walk_steps: u64,
    pub push_work: u64,
    pub n_s: u64,
}

/// Outcome of one estimator call. Field order is the serialized order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub estimate: f64,
    /// Error the guarantee promises (absolute, or relative for relative modes).
    pub error_target: f64,
    pub method: String,
    pub params: BTreeMap<String, f64>,
    pub cost: Cost,
    pub seed: u64,
    pub elapsed_ms: f64,
    pub details: BTreeMap<String, f64>,
    pub notes: BTreeMap<String, String>,
}

impl Report {
    pub fn new(method: &str, seed: u64) -> Self {
        Report { method: method.to_string(), seed, ..Default::default() }
    }

    pub fn param(&mut self, key: &str, value: f64) -> &mut Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn detail(&mut self, key: &str, value: f64) -> &mut Self {
        self.details.insert(key.to_string(), value);
        self
    }

    pub fn note(&mut self, key: &str, value: impl Into<String>) -> &mut Self {
        self.notes.insert(key.to_string(), value.into());
        self
    }

    pub(crate) fn finish(&mut self, start: Instant) {
        self.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    }
}

/// An estimate with its report.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub report: Report,
}
