use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::environments::{LipschitzInstanceSpec, SmoothInstanceSpec, SyntheticExpertSpec};
use crate::error::{invalid, CocoError, Result};
use crate::model::ProblemScale;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    ConstrainedExpert,
    CoverReduction,
    SmoothOgd,
    PureOgdOcs,
    StdHedgeBaseline,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::ConstrainedExpert,
        PolicyKind::CoverReduction,
        PolicyKind::SmoothOgd,
        PolicyKind::PureOgdOcs,
        PolicyKind::StdHedgeBaseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::ConstrainedExpert => "constrained-expert",
            PolicyKind::CoverReduction => "cover-reduction",
            PolicyKind::SmoothOgd => "smooth-ogd",
            PolicyKind::PureOgdOcs => "pure-ogd-ocs",
            PolicyKind::StdHedgeBaseline => "std-hedge-baseline",
        }
    }

    pub fn accepts(self, env: EnvironmentKind) -> bool {
        use EnvironmentKind::*;
        match self {
            PolicyKind::ConstrainedExpert | PolicyKind::StdHedgeBaseline => {
                matches!(env, SyntheticExpert | OcsExpert)
            }
            PolicyKind::CoverReduction => env == Lipschitz,
            PolicyKind::SmoothOgd | PolicyKind::PureOgdOcs => env == Smooth,
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = CocoError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| CocoError::Config(format!("unknown policy `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvironmentKind {
    /// Twenty-expert instance with one cheap feasible expert.
    SyntheticExpert,
    /// The same instance with all costs zeroed.
    OcsExpert,
    /// Smooth costs and constraints on a ball.
    Smooth,
    /// Lipschitz costs and constraints on the unit cube.
    Lipschitz,
}

fn default_seed() -> u64 {
    1
}

fn default_experts() -> usize {
    20
}

fn default_true() -> bool {
    true
}

fn default_c_budget() -> f64 {
    8.0
}

fn default_lipschitz() -> f64 {
    1.0
}

fn default_smoothness() -> f64 {
    2.0
}

fn default_radius() -> f64 {
    1.0
}

/// Flat experiment description, loadable from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub policy: PolicyKind,
    pub environment: EnvironmentKind,
    pub horizon: u64,
    pub beta: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Seed of the one-expert-per-round sampler; derived from `seed` when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler_seed: Option<u64>,
    #[serde(default = "default_experts")]
    pub n_experts: usize,
    /// Total violation allowed to the comparator in the smooth setting.
    #[serde(default)]
    pub budget: f64,
    /// Constant `c` in `λ = min(1/(c B_T), T^{-(1-β)})`.
    #[serde(default = "default_c_budget")]
    pub c_budget: f64,
    /// Cover resolution; `1/T` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Ambient dimension of convex environments: 2 for the smooth ball and
    /// 1 for the Lipschitz cube when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default = "default_lipschitz")]
    pub lipschitz: f64,
    #[serde(default = "default_smoothness")]
    pub smoothness: f64,
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// Comparator point for convex environments; a default point is used
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feasible_point: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
    /// Fixed learning rate of the baseline; `√(8 ln N / T)` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_eta: Option<f64>,
    #[serde(default = "default_true")]
    pub assert_bounds: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// File stem of emitted artifacts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl RunConfig {
    pub fn new(policy: PolicyKind, environment: EnvironmentKind, horizon: u64, beta: f64) -> Self {
        Self {
            policy,
            environment,
            horizon,
            beta,
            seed: default_seed(),
            sampler_seed: None,
            n_experts: default_experts(),
            budget: 0.0,
            c_budget: default_c_budget(),
            delta: None,
            dimension: None,
            lipschitz: default_lipschitz(),
            smoothness: default_smoothness(),
            radius: default_radius(),
            feasible_point: None,
            start: None,
            baseline_eta: None,
            assert_bounds: true,
            output: None,
            name: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CocoError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: Self = text.parse()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CocoError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if !self.policy.accepts(self.environment) {
            return Err(CocoError::Config(format!(
                "policy {} cannot run on environment {:?}",
                self.policy, self.environment
            )));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(invalid(format!(
                "beta must lie in [0, 1], got {}",
                self.beta
            )));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d.is_finite()) {
                return Err(invalid("delta must be positive"));
            }
        }
        if self.horizon > 0 {
            self.scale().validate()?;
        }
        match self.environment {
            EnvironmentKind::SyntheticExpert | EnvironmentKind::OcsExpert => {
                self.expert_spec().validate()
            }
            EnvironmentKind::Smooth => self.smooth_spec().validate(),
            EnvironmentKind::Lipschitz => self.lipschitz_spec().validate(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension.unwrap_or(match self.environment {
            EnvironmentKind::Smooth => 2,
            _ => 1,
        })
    }

    pub fn sampler_seed(&self) -> u64 {
        self.sampler_seed
            .unwrap_or(self.seed ^ 0x5eed_5a3b_1e5e_ed00)
    }

    pub fn cover_delta(&self) -> f64 {
        self.delta
            .unwrap_or_else(|| 1.0 / self.horizon.max(1) as f64)
    }

    pub fn file_stem(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| format!("{}_b{}_s{}", self.policy, self.beta, self.seed))
    }

    pub fn expert_spec(&self) -> SyntheticExpertSpec {
        SyntheticExpertSpec {
            n: self.n_experts,
            horizon: self.horizon,
            seed: self.seed,
            zero_cost: self.environment == EnvironmentKind::OcsExpert,
        }
    }

    pub fn smooth_spec(&self) -> SmoothInstanceSpec {
        let mut spec = SmoothInstanceSpec::new(self.horizon, self.seed).with_budget(self.budget);
        spec.radius = self.radius;
        spec.center = vec![0.0; self.dimension().max(1)];
        spec.smoothness = self.smoothness;
        let d = spec.center.len();
        spec.feasible_point = self.feasible_point.clone().unwrap_or_else(|| {
            let mut p = vec![0.0; d];
            p[0] = 0.5 * self.radius;
            p
        });
        spec.start = self.start.clone().unwrap_or_else(|| {
            let mut p = vec![0.0; d];
            p[0] = -self.radius;
            p
        });
        spec
    }

    pub fn lipschitz_spec(&self) -> LipschitzInstanceSpec {
        let point = self
            .feasible_point
            .clone()
            .unwrap_or_else(|| vec![0.5; self.dimension()]);
        LipschitzInstanceSpec {
            dimension: self.dimension(),
            feasible_point: point,
            lipschitz: self.lipschitz,
            horizon: self.horizon,
            seed: self.seed,
        }
    }

    /// Problem dimensions implied by the config.
    pub fn scale(&self) -> ProblemScale {
        let (dimension, diameter) = match self.environment {
            EnvironmentKind::SyntheticExpert | EnvironmentKind::OcsExpert => {
                (self.n_experts, 2f64.sqrt())
            }
            EnvironmentKind::Smooth => (self.dimension().max(1), 2.0 * self.radius),
            EnvironmentKind::Lipschitz => (self.dimension(), (self.dimension() as f64).sqrt()),
        };
        ProblemScale {
            horizon: self.horizon,
            beta: self.beta,
            n_experts: self.n_experts,
            dimension,
            diameter,
            lipschitz: self.lipschitz,
            smoothness: self.smoothness,
            budget: self.budget,
        }
    }
}

impl FromStr for RunConfig {
    type Err = CocoError;

    fn from_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| CocoError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
