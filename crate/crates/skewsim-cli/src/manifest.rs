//! Run manifest: the archivable JSON record of one experiment.

use serde::{Deserialize, Serialize};
use skewsim::stats::EstimateWithError;

use crate::config::{DerivedParameters, ExperimentConfig};

/// Pre-registered thresholds: within 3 SE counts as consistent, beyond 5 SE
/// as separated, the band between as unresolved.
pub const CONSISTENCY_SE: f64 = 3.0;
pub const SEPARATION_SE: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionReport {
    pub name: String,
    pub verdict: Verdict,
    pub observed: f64,
    pub expected: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    /// `(observed - expected) / std_error` where a standard error exists.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
}

impl CriterionReport {
    /// The estimate should agree with `expected`.
    pub fn consistency(name: &str, est: &EstimateWithError, expected: f64) -> Self {
        let z = (est.value - expected) / est.std_error;
        let verdict = if !z.is_finite() || z.abs() > SEPARATION_SE {
            Verdict::Fail
        } else if z.abs() <= CONSISTENCY_SE {
            Verdict::Pass
        } else {
            Verdict::Inconclusive
        };
        CriterionReport {
            name: name.to_string(),
            verdict,
            observed: est.value,
            expected,
            std_error: Some(est.std_error),
            z: Some(z),
        }
    }

    /// The estimate should differ from `reference` in the direction of
    /// `expected_sign`.
    pub fn separation(name: &str, est: &EstimateWithError, reference: f64, expected_sign: f64) -> Self {
        let z = (est.value - reference) / est.std_error;
        let right_side = (est.value - reference) * expected_sign > 0.0;
        let verdict = if z.abs() > SEPARATION_SE && right_side {
            Verdict::Pass
        } else if z.abs() <= CONSISTENCY_SE || !right_side {
            Verdict::Fail
        } else {
            Verdict::Inconclusive
        };
        CriterionReport {
            name: name.to_string(),
            verdict,
            observed: est.value,
            expected: reference,
            std_error: Some(est.std_error),
            z: Some(z),
        }
    }

    /// A hard count or deterministic quantity: no standard error attached.
    pub fn exact(name: &str, observed: f64, expected: f64, pass: bool) -> Self {
        CriterionReport {
            name: name.to_string(),
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            observed,
            expected,
            std_error: None,
            z: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub experiment: String,
    pub config: ExperimentConfig,
    pub derived: DerivedParameters,
    pub workers: usize,
    pub wall_clock_seconds: f64,
    /// Data files written next to the manifest, by relative name.
    pub outputs: Vec<String>,
    pub criteria: Vec<CriterionReport>,
    pub overall: Verdict,
}

pub fn overall_verdict(criteria: &[CriterionReport]) -> Verdict {
    if criteria.iter().any(|c| c.verdict == Verdict::Fail) {
        Verdict::Fail
    } else if criteria.iter().any(|c| c.verdict == Verdict::Inconclusive) {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    }
}
