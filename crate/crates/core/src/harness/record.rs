use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::{CocoError, Result};

/// One inequality `lhs ≤ rhs` evaluated on a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`.
    pub margin: f64,
    /// Floating-point allowance added to `rhs` when deciding the verdict.
    #[serde(default)]
    pub slack: f64,
    pub passed: bool,
}

impl BoundCheck {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self::with_slack(name, lhs, rhs, 0.0)
    }

    /// Passes when `lhs ≤ rhs + slack`; the margin ignores the slack.
    pub fn with_slack(name: impl Into<String>, lhs: f64, rhs: f64, slack: f64) -> Self {
        let passed = lhs.is_finite() && rhs.is_finite() && lhs <= rhs + slack;
        Self {
            name: name.into(),
            lhs,
            rhs,
            margin: rhs - lhs,
            slack,
            passed,
        }
    }
}

/// The fixed action regret is measured against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparator {
    Expert(usize),
    Point(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRow {
    pub t: u64,
    pub cost: f64,
    pub violation: f64,
    pub q: f64,
    /// `None` while the step size is undefined.
    pub eta: Option<f64>,
    pub g_scale: f64,
    pub argmax_expert: Option<usize>,
    /// Expert distribution (when small) or the played point.
    pub action: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRow {
    pub expert: usize,
    /// `Σ_t p_t(i) / T`.
    pub expected: f64,
    /// Share of rounds in which the sampler drew `i`.
    pub sampled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub policy: String,
    pub seed: u64,
    pub horizon: u64,
    pub regret: f64,
    pub ccv: f64,
    pub cumulative_cost: f64,
    pub comparator_cost: f64,
    pub comparator: Comparator,
    pub lambda: Option<f64>,
    pub checks: Vec<BoundCheck>,
    pub all_passed: bool,
    pub config: RunConfig,
}

impl RunSummary {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CocoError::Config(e.to_string()))
    }

    /// Re-evaluates every stored check from its `lhs` and `rhs`.
    pub fn recheck(&self) -> Vec<BoundCheck> {
        self.checks
            .iter()
            .map(|c| BoundCheck::with_slack(c.name.clone(), c.lhs, c.rhs, c.slack))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub rows: Vec<RoundRow>,
    pub summary: RunSummary,
    /// Present for expert-setting policies.
    pub frequencies: Option<Vec<FrequencyRow>>,
    /// Mean probability of each expert over the last fifth of the rounds.
    pub tail_mass: Option<Vec<f64>>,
    /// Not written to any artifact, which keeps them byte-stable.
    pub wall_time: Duration,
}

impl RunRecord {
    pub fn all_passed(&self) -> bool {
        self.summary.all_passed
    }

    pub fn check(&self, name: &str) -> Option<&BoundCheck> {
        self.summary.checks.iter().find(|c| c.name == name)
    }
}
