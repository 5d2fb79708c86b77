//! Exponential weights over `N` experts.
//!
//! [`HedgeState`] implements the adaptive variant with the self-confident
//! learning rate
//!
//! ```text
//! η_t = (1/√G_{t-1}) · √( ln N / (L̃_{t-1} + γ G_{t-1}) )
//! ```
//!
//! where `L̃` is the learner's cumulative expected loss and `G_t` is a
//! caller-supplied, non-decreasing upper bound on `‖l_t‖_∞` whose per-round
//! growth is capped by `γ`. Losses may grow without a uniform bound, which
//! is what the constrained policies need once the Lyapunov multiplier
//! starts to climb.
//!
//! [`standard_hedge_distribution`] is the classical fixed-rate rule, kept as
//! a baseline.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, CocoError, Result};

/// Growth cap used when nothing else is specified.
pub const DEFAULT_GAMMA: f64 = 1.08;

/// Relative rounding slack on the `G_t / G_{t-1} ≤ γ` check. Streams that
/// build `G_t` as powers of `γ` land a few ulps above the cap.
const RATIO_SLACK: f64 = 1e-12;

/// Tolerance on `Σ p = 1`.
pub const PROB_SUM_TOL: f64 = 1e-9;

/// A probability vector over experts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertDistribution {
    probs: Vec<f64>,
}

impl ExpertDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(invalid("empty distribution"));
        }
        if probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(invalid("distribution has a negative or NaN entry"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(invalid(format!("distribution sums to {sum}")));
        }
        Ok(Self { probs })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Most likely expert; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    /// `⟨v, p⟩`.
    pub fn expect(&self, values: &[f64]) -> f64 {
        self.probs.iter().zip(values).map(|(p, v)| p * v).sum()
    }
}

/// Softmax of `-eta * losses`, shifted by the minimum loss so that large
/// cumulative losses never overflow. Equal losses get bit-identical weights.
fn neg_softmax(losses: &[f64], eta: f64) -> Vec<f64> {
    let min = losses.iter().copied().fold(f64::INFINITY, f64::min);
    let mut w: Vec<f64> = losses.iter().map(|l| (-eta * (l - min)).exp()).collect();
    let z: f64 = w.iter().sum();
    for x in &mut w {
        *x /= z;
    }
    w
}

/// Fixed-rate Hedge: `p(i) ∝ exp(-η L(i))`.
pub fn standard_hedge_distribution(cum_losses: &[f64], eta: f64) -> Result<ExpertDistribution> {
    if cum_losses.is_empty() {
        return Err(invalid("no experts"));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(invalid(format!("eta must be positive, got {eta}")));
    }
    Ok(ExpertDistribution {
        probs: neg_softmax(cum_losses, eta),
    })
}

/// `2γ√(L* G_T ln N) + 7γ² G_T ln N`.
pub fn adaptive_regret_bound(l_star: f64, g_final: f64, n_experts: usize, gamma: f64) -> f64 {
    let ln_n = (n_experts as f64).ln();
    2.0 * gamma * (l_star * g_final * ln_n).sqrt() + 7.0 * gamma * gamma * g_final * ln_n
}

/// State of the adaptive Hedge learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeState {
    n: usize,
    cum_losses: Vec<f64>,
    algo_loss: f64,
    scale: f64,
    gamma: f64,
    round: usize,
}

impl HedgeState {
    /// Standalone learner with `G_0 = 1` and `γ = 1.08`.
    pub fn new(n: usize) -> Result<Self> {
        Self::with_params(n, DEFAULT_GAMMA, 1.0)
    }

    pub fn with_params(n: usize, gamma: f64, initial_scale: f64) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("need at least two experts, got {n}")));
        }
        if !(gamma >= 1.0 && gamma.is_finite()) {
            return Err(invalid(format!("gamma must be >= 1, got {gamma}")));
        }
        if !(initial_scale > 0.0 && initial_scale.is_finite()) {
            return Err(invalid(format!(
                "initial scale must be positive, got {initial_scale}"
            )));
        }
        Ok(Self {
            n,
            cum_losses: vec![0.0; n],
            algo_loss: 0.0,
            scale: initial_scale,
            gamma,
            round: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cum_losses(&self) -> &[f64] {
        &self.cum_losses
    }

    pub fn algo_loss(&self) -> f64 {
        self.algo_loss
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn learning_rate(&self) -> f64 {
        let ln_n = (self.n as f64).ln();
        (ln_n / (self.algo_loss + self.gamma * self.scale)).sqrt() / self.scale.sqrt()
    }

    pub fn distribution(&self) -> ExpertDistribution {
        ExpertDistribution {
            probs: neg_softmax(&self.cum_losses, self.learning_rate()),
        }
    }

    /// Records the revealed loss vector. `scale_bound` is `G_t`, which must
    /// dominate `‖loss‖_∞`, must not decrease, and may grow by at most `γ`.
    pub fn observe(
        &mut self,
        loss: &[f64],
        played: &ExpertDistribution,
        scale_bound: f64,
    ) -> Result<()> {
        if loss.len() != self.n {
            return Err(CocoError::DimensionMismatch {
                expected: self.n,
                got: loss.len(),
            });
        }
        if played.len() != self.n {
            return Err(CocoError::DimensionMismatch {
                expected: self.n,
                got: played.len(),
            });
        }
        if !scale_bound.is_finite() {
            return Err(CocoError::NonFinite("scale bound"));
        }
        if scale_bound < self.scale {
            return Err(CocoError::ScaleRegression {
                old: self.scale,
                new: scale_bound,
            });
        }
        let ratio = scale_bound / self.scale;
        if ratio > self.gamma * (1.0 + RATIO_SLACK) {
            return Err(CocoError::GammaViolation {
                ratio,
                gamma: self.gamma,
            });
        }
        let mut max_loss = 0.0f64;
        for (index, &l) in loss.iter().enumerate() {
            if !(l >= 0.0) {
                return Err(CocoError::NegativeLoss { index, value: l });
            }
            max_loss = max_loss.max(l);
        }
        if max_loss > scale_bound {
            return Err(CocoError::LossExceedsScale {
                max_loss,
                scale: scale_bound,
            });
        }

        self.algo_loss += played.expect(loss);
        for (c, l) in self.cum_losses.iter_mut().zip(loss) {
            *c += l;
        }
        self.scale = scale_bound;
        self.round += 1;
        Ok(())
    }
}
