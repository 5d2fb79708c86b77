//! Shared scalar machinery: the exponential Lyapunov potential on the
//! cumulative constraint violation, the λ schedules used by each policy,
//! the CCV recursion and the affine normalization of raw costs and
//! violations into `[0, 1]`.
//!
//! The potential is `Φ(x) = exp(λx)` with derivative `Φ'(x) = λ·exp(λx)`.
//! Every policy in this crate multiplies the round's violation by
//! `Φ'(Q(t))`, where `Q(t)` is the violation accumulated so far, so the
//! derivative is carried in log space and exponentiated only when used.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, CocoError, Result};

/// Constant `c` in the expert-setting rate `λ = T^{-(1-β)} / (2c ln N)`.
pub const EXPERT_RATE_CONST: f64 = 10.0;

/// Rounding slack accepted on per-round violations before they are clamped
/// back into `[0, 1]`. Inner products of `[0, 1]` vectors with a probability
/// vector can overshoot 1 by a few ulps.
pub const VIOLATION_SLACK: f64 = 1e-9;

/// Exponential Lyapunov potential `Φ(x) = exp(λx)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovConfig {
    lambda: f64,
}

impl LyapunovConfig {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `log Φ'(q) = log λ + λq`.
    pub fn log_derivative(&self, q: f64) -> f64 {
        self.lambda.ln() + self.lambda * q
    }

    /// `Φ'(q) = λ·exp(λq)`, or `ccv-overflow` when it is not representable.
    pub fn derivative(&self, q: f64) -> Result<f64> {
        lyapunov_derivative(self, q)
    }

    /// `Φ(q) = exp(λq)`.
    pub fn value(&self, q: f64) -> Result<f64> {
        let v = (self.lambda * q).exp();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(CocoError::CcvOverflow {
                log_value: self.lambda * q,
            })
        }
    }
}

/// `Φ'(q) = λ·exp(λq)` evaluated from its logarithm.
pub fn lyapunov_derivative(cfg: &LyapunovConfig, q: f64) -> Result<f64> {
    if !(q >= 0.0) {
        return Err(invalid(format!("ccv must be nonnegative, got {q}")));
    }
    let log_value = cfg.log_derivative(q);
    let v = log_value.exp();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CocoError::CcvOverflow { log_value })
    }
}

fn horizon_factor(horizon: u64, beta: f64) -> Result<f64> {
    if horizon == 0 {
        return Err(invalid("horizon must be positive"));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(invalid(format!("beta must lie in [0, 1], got {beta}")));
    }
    Ok((horizon as f64).powf(-(1.0 - beta)))
}

/// `λ = T^{-(1-β)} / (20 ln N)` for the constrained expert policy.
pub fn lambda_expert(horizon: u64, beta: f64, n_experts: usize) -> Result<f64> {
    if n_experts < 2 {
        return Err(invalid(format!(
            "need at least two experts, got {n_experts}"
        )));
    }
    let h = horizon_factor(horizon, beta)?;
    Ok(h / (2.0 * EXPERT_RATE_CONST * (n_experts as f64).ln()))
}

/// `λ = T^{-(1-β)} / (8 D² M)` for the smooth surrogate-OGD policy.
pub fn lambda_smooth(horizon: u64, beta: f64, diameter: f64, smoothness: f64) -> Result<f64> {
    if !(diameter > 0.0) || !(smoothness > 0.0) {
        return Err(invalid("diameter and smoothness must be positive"));
    }
    let h = horizon_factor(horizon, beta)?;
    Ok(h / (8.0 * diameter * diameter * smoothness))
}

/// `λ = min(1 / (c·B_T), T^{-(1-β)})`; a zero budget drops the first term.
pub fn lambda_budget(horizon: u64, beta: f64, budget: f64, c_budget: f64) -> Result<f64> {
    if !(c_budget > 0.0) {
        return Err(invalid("budget constant must be positive"));
    }
    if !(budget >= 0.0) {
        return Err(invalid("budget must be nonnegative"));
    }
    let h = horizon_factor(horizon, beta)?;
    if budget == 0.0 {
        Ok(h)
    } else {
        Ok(h.min(1.0 / (c_budget * budget)))
    }
}

/// Running cumulative constraint violation `Q(t)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CcvTracker {
    q: f64,
    round: usize,
}

impl CcvTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn round(&self) -> usize {
        self.round
    }

    /// `Q(t) = Q(t-1) + v`. Violations must already be normalized.
    pub fn update(&mut self, violation: f64) -> Result<()> {
        *self = ccv_update(*self, violation)?;
        Ok(())
    }

    pub fn phi_prime(&self, cfg: &LyapunovConfig) -> Result<f64> {
        lyapunov_derivative(cfg, self.q)
    }
}

/// Pure form of [`CcvTracker::update`].
pub fn ccv_update(tracker: CcvTracker, violation: f64) -> Result<CcvTracker> {
    let v = clamp_unit(violation).ok_or(CocoError::UnnormalizedViolation { value: violation })?;
    Ok(CcvTracker {
        q: tracker.q + v,
        round: tracker.round + 1,
    })
}

/// Clamp values within [`VIOLATION_SLACK`] of `[0, 1]`; reject the rest.
pub(crate) fn clamp_unit(v: f64) -> Option<f64> {
    if (-VIOLATION_SLACK..=1.0 + VIOLATION_SLACK).contains(&v) {
        Some(v.clamp(0.0, 1.0))
    } else {
        None
    }
}

/// Problem dimensions shared by the experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemScale {
    pub horizon: u64,
    pub beta: f64,
    pub n_experts: usize,
    pub dimension: usize,
    pub diameter: f64,
    pub lipschitz: f64,
    pub smoothness: f64,
    pub budget: f64,
}

impl ProblemScale {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(invalid("horizon must be positive"));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(invalid("beta must lie in [0, 1]"));
        }
        if self.n_experts < 2 {
            return Err(invalid("need at least two experts"));
        }
        if self.dimension == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if !(self.diameter > 0.0 && self.lipschitz > 0.0 && self.smoothness > 0.0) {
            return Err(invalid(
                "diameter, lipschitz and smoothness must be positive",
            ));
        }
        if !(self.budget >= 0.0 && self.budget <= self.horizon as f64) {
            return Err(invalid(format!(
                "budget must lie in [0, T], got {}",
                self.budget
            )));
        }
        Ok(())
    }
}

/// Affine map of costs in `[-K_f, K_f]` and violations in `[0, K_g]`
/// onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub k_f: f64,
    pub k_g: f64,
}

impl Normalizer {
    pub fn new(k_f: f64, k_g: f64) -> Result<Self> {
        if !(k_f > 0.0 && k_g > 0.0) {
            return Err(invalid("normalizer bounds must be positive"));
        }
        Ok(Self { k_f, k_g })
    }

    pub fn normalize(&self, f_raw: f64, g_raw: f64) -> Result<(f64, f64)> {
        normalize(f_raw, g_raw, self)
    }
}

pub fn normalize(f_raw: f64, g_raw: f64, norm: &Normalizer) -> Result<(f64, f64)> {
    if !(f_raw.abs() <= norm.k_f) {
        return Err(CocoError::BoundViolation {
            what: "|cost|",
            value: f_raw,
            bound: norm.k_f,
        });
    }
    if !(g_raw >= 0.0 && g_raw <= norm.k_g) {
        return Err(CocoError::BoundViolation {
            what: "violation",
            value: g_raw,
            bound: norm.k_g,
        });
    }
    let f = (f_raw / (2.0 * norm.k_f) + 0.5).clamp(0.0, 1.0);
    let g = (g_raw / norm.k_g).clamp(0.0, 1.0);
    Ok((f, g))
}
