//! Policies for general convex cost and constraint functions.
//!
//! * [`CoverPolicy`] discretizes the decision set with a δ-cover, runs the
//!   constrained expert policy over the cover points with violations
//!   shrunk by `Gδ`, and plays the matching convex combination.
//! * [`SmoothOgdPolicy`] runs projected online gradient descent with the
//!   step size `η_t = D / √(2 Σ_τ ‖∇_τ‖²)` on the surrogate
//!   `f_t + Φ'(Q(t)) g_t`, or on `g_t` alone for pure constraint
//!   satisfaction.

use log::warn;

use crate::error::{invalid, CocoError, Result};
use crate::expert_policy::{ConstrainedExpertPolicy, ExpertLearner, ExpertRound, FeedbackInfo};
use crate::geometry::{dist, Cover, DecisionSet};
use crate::hedge::ExpertDistribution;
use crate::model::{clamp_unit, CcvTracker, LyapunovConfig};

/// A convex function with an exact gradient.
pub trait ConvexOracle {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
}

/// Oracle built from a pair of closures.
pub struct FnOracle<V, G> {
    value: V,
    gradient: G,
}

impl<V, G> FnOracle<V, G>
where
    V: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    pub fn new(value: V, gradient: G) -> Self {
        Self { value, gradient }
    }
}

impl<V, G> ConvexOracle for FnOracle<V, G>
where
    V: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.gradient)(x)
    }
}

fn unit_value(what: &'static str, value: f64) -> Result<f64> {
    clamp_unit(value).ok_or(CocoError::UnnormalizedOracle { what, value })
}

/// Largest relative deviation between the oracle gradient and central
/// differences with step `h`.
pub fn gradient_error(oracle: &dyn ConvexOracle, x: &[f64], h: f64) -> f64 {
    let grad = oracle.gradient(x);
    let mut fd = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = oracle.value(&probe);
        probe[i] = x[i] - h;
        let down = oracle.value(&probe);
        probe[i] = x[i];
        fd.push((up - down) / (2.0 * h));
    }
    let scale = grad.iter().map(|g| g.abs()).fold(1e-8, f64::max);
    grad.iter()
        .zip(&fd)
        .map(|(a, b)| (a - b).abs() / scale)
        .fold(0.0, f64::max)
}

/// Checks `‖∇l(x) − ∇l(y)‖ ≤ M ‖x − y‖` on consecutive pairs of `points`,
/// logging a warning on the first failure.
pub fn check_smoothness(oracle: &dyn ConvexOracle, points: &[Vec<f64>], smoothness: f64) -> bool {
    for pair in points.windows(2) {
        let (x, y) = (&pair[0], &pair[1]);
        let gap = dist(&oracle.gradient(x), &oracle.gradient(y));
        let span = dist(x, y);
        if gap > smoothness * span * (1.0 + 1e-9) + 1e-12 {
            warn!(
                "declared smoothness {smoothness} violated: gradient gap {gap} over distance {span}"
            );
            return false;
        }
    }
    true
}

/// Expert costs `f_t(x^i)` and violations `(g_t(x^i) − Gδ)^+` over the cover.
pub fn cover_transform(
    cover: &Cover,
    f: &dyn ConvexOracle,
    g: &dyn ConvexOracle,
    lipschitz: f64,
    delta: f64,
) -> Result<ExpertRound> {
    let shrink = lipschitz * delta;
    let mut cost = Vec::with_capacity(cover.len());
    let mut violation = Vec::with_capacity(cover.len());
    for c in cover.centers() {
        cost.push(unit_value("cost", f.value(c))?);
        violation.push((unit_value("constraint", g.value(c))? - shrink).max(0.0));
    }
    ExpertRound::new(cost, violation)
}

/// Outcome of one cover-policy round.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverFeedback {
    pub info: FeedbackInfo,
    /// Inner expert round, kept for slack accounting.
    pub expert_round: ExpertRound,
}

/// Constrained expert policy over the points of a δ-cover.
#[derive(Debug, Clone)]
pub struct CoverPolicy {
    cover: Cover,
    inner: ConstrainedExpertPolicy,
    lipschitz: f64,
    delta: f64,
}

impl CoverPolicy {
    pub fn new(cover: Cover, horizon: u64, beta: f64, lipschitz: f64) -> Result<Self> {
        if !(lipschitz > 0.0) {
            return Err(invalid("lipschitz constant must be positive"));
        }
        if cover.len() < 2 {
            return Err(invalid("cover needs at least two points"));
        }
        let delta = cover.delta();
        let inner = ConstrainedExpertPolicy::new(cover.len(), horizon, beta)?;
        Ok(Self {
            cover,
            inner,
            lipschitz,
            delta,
        })
    }

    pub fn cover(&self) -> &Cover {
        &self.cover
    }

    pub fn inner(&self) -> &ConstrainedExpertPolicy {
        &self.inner
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Inner distribution and the point `Σ_i p(i) x^i` it induces.
    pub fn act(&self) -> (Vec<f64>, ExpertDistribution) {
        let p = self.inner.act();
        (self.cover.combine(p.probs()), p)
    }

    pub fn feedback(
        &mut self,
        f: &dyn ConvexOracle,
        g: &dyn ConvexOracle,
        played: &ExpertDistribution,
    ) -> Result<CoverFeedback> {
        let expert_round = cover_transform(&self.cover, f, g, self.lipschitz, self.delta)?;
        let info = self.inner.feedback(&expert_round, played)?;
        Ok(CoverFeedback { info, expert_round })
    }
}

/// `4D √(M L(u)) + 4D² M`.
pub fn smooth_regret_bound(comparator_loss: f64, diameter: f64, smoothness: f64) -> f64 {
    4.0 * diameter * (smoothness * comparator_loss).sqrt() + 4.0 * diameter * diameter * smoothness
}

/// One OGD round as seen by the harness.
#[derive(Debug, Clone, PartialEq)]
pub struct OgdStep {
    pub played: Vec<f64>,
    pub cost: f64,
    pub violation: f64,
    /// Multiplier on `∇g_t`; zero in pure OCS mode.
    pub phi_prime: f64,
    /// `None` while every gradient so far has been zero.
    pub eta: Option<f64>,
    pub grad_norm_sq: f64,
}

/// Adaptive-step projected OGD, optionally on the Lyapunov surrogate.
#[derive(Debug, Clone)]
pub struct SmoothOgdPolicy {
    set: DecisionSet,
    current: Vec<f64>,
    grad_sq_sum: f64,
    ccv: CcvTracker,
    lyapunov: Option<LyapunovConfig>,
}

impl SmoothOgdPolicy {
    /// Surrogate mode. `start` is projected onto the set.
    pub fn new(set: DecisionSet, start: &[f64], lyapunov: LyapunovConfig) -> Result<Self> {
        Self::build(set, start, Some(lyapunov))
    }

    /// Plain OGD on the constraint functions.
    pub fn pure_ocs(set: DecisionSet, start: &[f64]) -> Result<Self> {
        Self::build(set, start, None)
    }

    fn build(set: DecisionSet, start: &[f64], lyapunov: Option<LyapunovConfig>) -> Result<Self> {
        let current = set.project(start)?;
        Ok(Self {
            set,
            current,
            grad_sq_sum: 0.0,
            ccv: CcvTracker::new(),
            lyapunov,
        })
    }

    pub fn current(&self) -> &[f64] {
        &self.current
    }

    pub fn set(&self) -> &DecisionSet {
        &self.set
    }

    pub fn grad_sq_sum(&self) -> f64 {
        self.grad_sq_sum
    }

    pub fn ccv(&self) -> &CcvTracker {
        &self.ccv
    }

    pub fn lyapunov(&self) -> Option<&LyapunovConfig> {
        self.lyapunov.as_ref()
    }

    /// Plays `x_t`, charges `g_t(x_t)` to `Q`, then moves along
    /// `∇f_t(x_t) + Φ'(Q(t)) ∇g_t(x_t)`.
    pub fn step(&mut self, f: &dyn ConvexOracle, g: &dyn ConvexOracle) -> Result<OgdStep> {
        let lyapunov = self
            .lyapunov
            .ok_or_else(|| invalid("surrogate step on a pure OCS policy"))?;
        let x = self.current.clone();
        let cost = unit_value("cost", f.value(&x))?;
        let violation = unit_value("constraint", g.value(&x))?;
        let mut ccv = self.ccv;
        ccv.update(violation)?;
        let phi_prime = ccv.phi_prime(&lyapunov)?;
        let mut grad = f.gradient(&x);
        for (a, b) in grad.iter_mut().zip(g.gradient(&x)) {
            *a += phi_prime * b;
        }
        let (eta, grad_norm_sq) = self.descend(&grad)?;
        self.ccv = ccv;
        Ok(OgdStep {
            played: x,
            cost,
            violation,
            phi_prime,
            eta,
            grad_norm_sq,
        })
    }

    /// OGD on `g_t` alone; no Lyapunov multiplier.
    pub fn ocs_step(&mut self, g: &dyn ConvexOracle) -> Result<OgdStep> {
        let x = self.current.clone();
        let violation = unit_value("constraint", g.value(&x))?;
        let mut ccv = self.ccv;
        ccv.update(violation)?;
        let grad = g.gradient(&x);
        let (eta, grad_norm_sq) = self.descend(&grad)?;
        self.ccv = ccv;
        Ok(OgdStep {
            played: x,
            cost: 0.0,
            violation,
            phi_prime: 0.0,
            eta,
            grad_norm_sq,
        })
    }

    fn descend(&mut self, grad: &[f64]) -> Result<(Option<f64>, f64)> {
        if grad.len() != self.current.len() {
            return Err(CocoError::DimensionMismatch {
                expected: self.current.len(),
                got: grad.len(),
            });
        }
        let norm_sq: f64 = grad.iter().map(|v| v * v).sum();
        if !norm_sq.is_finite() {
            return Err(CocoError::NonFinite("gradient"));
        }
        let sum = self.grad_sq_sum + norm_sq;
        if sum <= 0.0 {
            return Ok((None, norm_sq));
        }
        let eta = self.set.diameter() / (2.0 * sum).sqrt();
        let moved: Vec<f64> = self
            .current
            .iter()
            .zip(grad)
            .map(|(x, g)| x - eta * g)
            .collect();
        self.current = self.set.project(&moved)?;
        self.grad_sq_sum = sum;
        Ok((Some(eta), norm_sq))
    }
}
