//! The constrained expert policy.
//!
//! Each round the learner plays a distribution `p_t` over `N` experts, then
//! sees a cost vector `f_t` and a violation vector `g_t`, both in `[0, 1]^N`.
//! The policy folds the violation into a surrogate loss
//!
//! ```text
//! f̂_t = f_t + Φ'(Q(t)) · g_t,     Q(t) = Q(t-1) + ⟨g_t, p_t⟩
//! ```
//!
//! and hands `f̂_t` to the adaptive Hedge learner with scale bound
//! `G_t = 1 + Φ'(Q(t))`. `Q(t)` is updated *before* the multiplier is
//! formed. With `λ = T^{-(1-β)}/(20 ln N)` the scale ratio `G_t/G_{t-1}`
//! never exceeds `e^λ ≤ 1.08`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, CocoError, Result};
use crate::hedge::{standard_hedge_distribution, ExpertDistribution, HedgeState, DEFAULT_GAMMA};
use crate::model::{lambda_expert, CcvTracker, LyapunovConfig};

/// Growth cap handed to the Hedge engine.
pub const GROWTH_CAP: f64 = DEFAULT_GAMMA;

/// One round of expert feedback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertRound {
    cost: Vec<f64>,
    violation: Vec<f64>,
}

impl ExpertRound {
    pub fn new(cost: Vec<f64>, violation: Vec<f64>) -> Result<Self> {
        if cost.len() != violation.len() {
            return Err(CocoError::DimensionMismatch {
                expected: cost.len(),
                got: violation.len(),
            });
        }
        check_unit("cost", &cost)?;
        check_unit("violation", &violation)?;
        Ok(Self { cost, violation })
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    pub fn violation(&self) -> &[f64] {
        &self.violation
    }

    pub fn len(&self) -> usize {
        self.cost.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cost.is_empty()
    }
}

fn check_unit(what: &'static str, v: &[f64]) -> Result<()> {
    for (index, &value) in v.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(CocoError::UnnormalizedRound { what, index, value });
        }
    }
    Ok(())
}

/// `f + φ'·g`, entrywise.
pub fn surrogate_cost(cost: &[f64], violation: &[f64], phi_prime: f64) -> Vec<f64> {
    cost.iter()
        .zip(violation)
        .map(|(f, g)| f + phi_prime * g)
        .collect()
}

/// What a policy reports back after absorbing a round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackInfo {
    /// `⟨f_t, p_t⟩`
    pub cost: f64,
    /// `⟨g_t, p_t⟩`
    pub violation: f64,
    /// `Φ'(Q(t))` after the update.
    pub phi_prime: f64,
    /// `G_t`.
    pub scale: f64,
    /// `G_t / G_{t-1}`.
    pub scale_ratio: f64,
}

/// Common surface of the expert-setting policies, used by the harness.
pub trait ExpertLearner {
    fn n(&self) -> usize;
    fn act(&self) -> ExpertDistribution;
    fn feedback(
        &mut self,
        round: &ExpertRound,
        played: &ExpertDistribution,
    ) -> Result<FeedbackInfo>;
    /// Learning rate that produced the most recent `act`.
    fn learning_rate(&self) -> f64;
    fn ccv(&self) -> &CcvTracker;
    fn lyapunov(&self) -> &LyapunovConfig;
    /// Current scale bound `G_t`.
    fn scale(&self) -> f64;
    /// Cumulative surrogate loss of each expert.
    fn surrogate_losses(&self) -> &[f64];
    /// Cumulative surrogate loss of the learner.
    fn surrogate_algo_loss(&self) -> f64;
}

/// Adaptive-Hedge policy on surrogate costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedExpertPolicy {
    hedge: HedgeState,
    ccv: CcvTracker,
    lyapunov: LyapunovConfig,
    horizon: u64,
    beta: f64,
}

impl ConstrainedExpertPolicy {
    pub fn new(n: usize, horizon: u64, beta: f64) -> Result<Self> {
        let lambda = lambda_expert(horizon, beta, n)?;
        Self::with_lambda(n, horizon, beta, lambda)
    }

    /// Same policy with an explicit `λ`. The `γ ≤ 1.08` guarantee only holds
    /// for `λ ≤ ln 1.08`.
    pub fn with_lambda(n: usize, horizon: u64, beta: f64, lambda: f64) -> Result<Self> {
        let lyapunov = LyapunovConfig::new(lambda)?;
        let ccv = CcvTracker::new();
        let g0 = 1.0 + ccv.phi_prime(&lyapunov)?;
        Ok(Self {
            hedge: HedgeState::with_params(n, GROWTH_CAP, g0)?,
            ccv,
            lyapunov,
            horizon,
            beta,
        })
    }

    pub fn hedge(&self) -> &HedgeState {
        &self.hedge
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl ExpertLearner for ConstrainedExpertPolicy {
    fn n(&self) -> usize {
        self.hedge.n()
    }

    fn act(&self) -> ExpertDistribution {
        self.hedge.distribution()
    }

    fn feedback(
        &mut self,
        round: &ExpertRound,
        played: &ExpertDistribution,
    ) -> Result<FeedbackInfo> {
        if round.len() != self.n() {
            return Err(CocoError::DimensionMismatch {
                expected: self.n(),
                got: round.len(),
            });
        }
        let cost = played.expect(round.cost());
        let violation = played.expect(round.violation());

        let mut ccv = self.ccv;
        ccv.update(violation)?;
        let phi_prime = ccv.phi_prime(&self.lyapunov)?;
        let scale = 1.0 + phi_prime;
        let surrogate = surrogate_cost(round.cost(), round.violation(), phi_prime);
        let prev_scale = self.hedge.scale();
        self.hedge.observe(&surrogate, played, scale)?;
        self.ccv = ccv;

        Ok(FeedbackInfo {
            cost,
            violation,
            phi_prime,
            scale,
            scale_ratio: scale / prev_scale,
        })
    }

    fn learning_rate(&self) -> f64 {
        self.hedge.learning_rate()
    }

    fn ccv(&self) -> &CcvTracker {
        &self.ccv
    }

    fn lyapunov(&self) -> &LyapunovConfig {
        &self.lyapunov
    }

    fn scale(&self) -> f64 {
        self.hedge.scale()
    }

    fn surrogate_losses(&self) -> &[f64] {
        self.hedge.cum_losses()
    }

    fn surrogate_algo_loss(&self) -> f64 {
        self.hedge.algo_loss()
    }
}

/// Comparison baseline: fixed-rate Hedge on the same surrogate costs and
/// the same `Φ`. No bound is asserted for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedRateBaseline {
    cum_surrogate: Vec<f64>,
    algo_surrogate: f64,
    ccv: CcvTracker,
    lyapunov: LyapunovConfig,
    eta: f64,
    scale: f64,
}

impl FixedRateBaseline {
    /// `eta = None` uses `√(8 ln N / T)`.
    pub fn new(n: usize, horizon: u64, beta: f64, eta: Option<f64>) -> Result<Self> {
        let lambda = lambda_expert(horizon, beta, n)?;
        let lyapunov = LyapunovConfig::new(lambda)?;
        let eta = eta.unwrap_or_else(|| (8.0 * (n as f64).ln() / horizon as f64).sqrt());
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(invalid(format!("baseline eta must be positive, got {eta}")));
        }
        Ok(Self {
            cum_surrogate: vec![0.0; n],
            algo_surrogate: 0.0,
            ccv: CcvTracker::new(),
            lyapunov,
            eta,
            scale: 1.0 + lambda,
        })
    }
}

impl ExpertLearner for FixedRateBaseline {
    fn n(&self) -> usize {
        self.cum_surrogate.len()
    }

    fn act(&self) -> ExpertDistribution {
        standard_hedge_distribution(&self.cum_surrogate, self.eta)
            .expect("eta validated at construction")
    }

    fn feedback(
        &mut self,
        round: &ExpertRound,
        played: &ExpertDistribution,
    ) -> Result<FeedbackInfo> {
        if round.len() != self.n() {
            return Err(CocoError::DimensionMismatch {
                expected: self.n(),
                got: round.len(),
            });
        }
        let cost = played.expect(round.cost());
        let violation = played.expect(round.violation());
        let mut ccv = self.ccv;
        ccv.update(violation)?;
        let phi_prime = ccv.phi_prime(&self.lyapunov)?;
        let surrogate = surrogate_cost(round.cost(), round.violation(), phi_prime);
        self.algo_surrogate += played.expect(&surrogate);
        for (c, s) in self.cum_surrogate.iter_mut().zip(&surrogate) {
            *c += s;
        }
        self.ccv = ccv;
        let prev = self.scale;
        self.scale = 1.0 + phi_prime;
        Ok(FeedbackInfo {
            cost,
            violation,
            phi_prime,
            scale: self.scale,
            scale_ratio: self.scale / prev,
        })
    }

    fn learning_rate(&self) -> f64 {
        self.eta
    }

    fn ccv(&self) -> &CcvTracker {
        &self.ccv
    }

    fn lyapunov(&self) -> &LyapunovConfig {
        &self.lyapunov
    }

    fn scale(&self) -> f64 {
        self.scale
    }

    fn surrogate_losses(&self) -> &[f64] {
        &self.cum_surrogate
    }

    fn surrogate_algo_loss(&self) -> f64 {
        self.algo_surrogate
    }
}

/// Draws a single expert per round from the played distribution. Only used
/// for selection-frequency reporting; the policies learn from expectations.
#[derive(Debug, Clone)]
pub struct ExpertSampler {
    rng: ChaCha8Rng,
}

impl ExpertSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn draw(&mut self, dist: &ExpertDistribution) -> usize {
        let u: f64 = self.rng.gen();
        let mut acc = 0.0;
        for (i, p) in dist.probs().iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // u landed in the rounding gap above the last partial sum
        dist.probs()
            .iter()
            .rposition(|&p| p > 0.0)
            .unwrap_or(dist.len() - 1)
    }
}
