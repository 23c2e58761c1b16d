//! Test reports and their JSON serialization.

use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    AcceptH0,
    RejectH0,
}

impl Decision {
    /// Reject iff statistic strictly exceeds the threshold; ties accept H0.
    pub fn from_comparison(statistic: f64, threshold: f64) -> Self {
        if statistic > threshold {
            Decision::RejectH0
        } else {
            Decision::AcceptH0
        }
    }
}

/// Outcome of a single hypothesis test, with full provenance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TestReport {
    pub schema_version: u32,
    pub version: String,
    pub test: String,
    pub statistic: f64,
    pub threshold: f64,
    pub decision: Decision,
    pub alpha: f64,
    pub method: String,
    pub variant: String,
    pub kernel: String,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
}

impl TestReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        test: &str,
        statistic: f64,
        threshold: f64,
        alpha: f64,
        method: String,
        variant: &str,
        kernel: String,
        n: usize,
        m: usize,
        seed: u64,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            version: env!("CARGO_PKG_VERSION").to_string(),
            test: test.to_string(),
            statistic,
            threshold,
            decision: Decision::from_comparison(statistic, threshold),
            alpha,
            method,
            variant: variant.to_string(),
            kernel,
            n,
            m,
            seed,
        }
    }

    pub fn rejected(&self) -> bool {
        self.decision == Decision::RejectH0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tie_accepts_h0() {
        assert_eq!(Decision::from_comparison(0.5, 0.5), Decision::AcceptH0);
        assert_eq!(Decision::from_comparison(0.5001, 0.5), Decision::RejectH0);
    }

    #[test]
    fn decision_serializes_snake_case() {
        let s = serde_json::to_string(&Decision::AcceptH0).unwrap();
        assert_eq!(s, "\"accept_h0\"");
    }
}
