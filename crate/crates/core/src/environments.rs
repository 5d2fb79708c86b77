//! Seeded synthetic environments.
//!
//! Every generator is a pure function of `(seed, t)`: round `t` draws from
//! a ChaCha8 stream selected by `t`, and each expert reads from its own
//! offset within that stream. Rounds can be evaluated in any order.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::convex_policy::ConvexOracle;
use crate::error::{invalid, Result};
use crate::expert_policy::ExpertRound;
use crate::geometry::DecisionSet;

/// Index of the cheapest expert that never violates.
pub const FEASIBLE_BEST: usize = 11;
/// Index of the cheapest expert overall, which violates most of the time.
pub const UNCONSTRAINED_BEST: usize = 7;
/// Feasible experts with the same mean cost as the rest.
pub const DECOYS: [usize; 2] = [2, 5];

const FEASIBLE_BEST_COST: f64 = 0.21;
const UNCONSTRAINED_BEST_COST: f64 = 0.11;
const UNCONSTRAINED_BEST_VIOLATION: f64 = 0.91;
const DECOY_COST: f64 = 0.41;
const REST_COST: f64 = 0.41;
const REST_VIOLATION: f64 = 0.6;
const REST_AMPLITUDE: f64 = 0.15;
const REST_PERIOD: f64 = 500.0;
const REST_NOISE: f64 = 0.1;

/// Words reserved per expert inside a round's stream.
const EXPERT_WORDS: u128 = 64;

fn round_rng(seed: u64, t: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t);
    rng
}

fn bernoulli(rng: &mut ChaCha8Rng, p: f64) -> f64 {
    if rng.gen::<f64>() < p {
        1.0
    } else {
        0.0
    }
}

fn check_round(t: u64, horizon: u64) -> Result<()> {
    if t == 0 || t > horizon {
        return Err(invalid(format!("round {t} outside 1..={horizon}")));
    }
    Ok(())
}

fn default_n() -> usize {
    20
}

fn default_horizon() -> u64 {
    5000
}

/// The twenty-expert instance: one cheap feasible expert, one cheaper
/// infeasible one, two feasible decoys, and a noisy periodic rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticExpertSpec {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default)]
    pub seed: u64,
    /// Zero all costs, leaving a pure constraint-satisfaction instance.
    #[serde(default)]
    pub zero_cost: bool,
}

impl Default for SyntheticExpertSpec {
    fn default() -> Self {
        Self {
            n: default_n(),
            horizon: default_horizon(),
            seed: 0,
            zero_cost: false,
        }
    }
}

impl SyntheticExpertSpec {
    pub fn new(horizon: u64, seed: u64) -> Self {
        Self {
            horizon,
            seed,
            ..Self::default()
        }
    }

    pub fn ocs(horizon: u64, seed: u64) -> Self {
        Self {
            zero_cost: true,
            ..Self::new(horizon, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n <= FEASIBLE_BEST {
            return Err(invalid(format!(
                "synthetic instance needs at least {} experts",
                FEASIBLE_BEST + 1
            )));
        }
        Ok(())
    }

    /// Declared comparator.
    pub fn feasible_expert(&self) -> usize {
        FEASIBLE_BEST
    }

    /// Round `t` in `1..=horizon`.
    pub fn round(&self, t: u64) -> Result<ExpertRound> {
        self.validate()?;
        check_round(t, self.horizon)?;
        let mut rng = round_rng(self.seed, t);
        let mut cost = Vec::with_capacity(self.n);
        let mut violation = Vec::with_capacity(self.n);
        for i in 0..self.n {
            rng.set_word_pos(i as u128 * EXPERT_WORDS);
            let (f, g) = match i {
                FEASIBLE_BEST => (bernoulli(&mut rng, FEASIBLE_BEST_COST), 0.0),
                UNCONSTRAINED_BEST => {
                    let f = bernoulli(&mut rng, UNCONSTRAINED_BEST_COST);
                    (f, bernoulli(&mut rng, UNCONSTRAINED_BEST_VIOLATION))
                }
                i if DECOYS.contains(&i) => (bernoulli(&mut rng, DECOY_COST), 0.0),
                _ => {
                    let phase = 2.0 * PI * i as f64 / self.n as f64;
                    let wave = REST_AMPLITUDE * (2.0 * PI * t as f64 / REST_PERIOD + phase).sin();
                    let noise = REST_NOISE * (2.0 * rng.gen::<f64>() - 1.0);
                    let f = (REST_COST + wave + noise).clamp(0.0, 1.0);
                    (f, bernoulli(&mut rng, REST_VIOLATION))
                }
            };
            cost.push(if self.zero_cost { 0.0 } else { f });
            violation.push(g);
        }
        ExpertRound::new(cost, violation)
    }
}

/// Loss stream whose scale grows geometrically: `G_t = growth^⌊t/k⌋`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnboundedLossStream {
    pub n: usize,
    pub horizon: u64,
    pub growth: f64,
    /// Rounds per growth step `k`.
    pub period: u64,
    /// Expert whose loss is identically zero.
    pub zero_expert: Option<usize>,
    pub seed: u64,
}

impl UnboundedLossStream {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("stream needs at least one expert"));
        }
        if !(self.growth >= 1.0 && self.growth.is_finite()) {
            return Err(invalid(format!("growth must be >= 1, got {}", self.growth)));
        }
        if self.period == 0 {
            return Err(invalid("growth period must be positive"));
        }
        if matches!(self.zero_expert, Some(z) if z >= self.n) {
            return Err(invalid("zero expert out of range"));
        }
        Ok(())
    }

    pub fn scale(&self, t: u64) -> f64 {
        self.growth.powf((t / self.period) as f64)
    }

    /// Losses in `[0, G_t]` and `G_t` for round `t`. Expert `i` has mean
    /// `G_t (i + 1) / (2n)`, so lower indices are better on average.
    pub fn round(&self, t: u64) -> Result<(Vec<f64>, f64)> {
        self.validate()?;
        check_round(t, self.horizon)?;
        let scale = self.scale(t);
        let mut rng = round_rng(self.seed, t);
        let losses = (0..self.n)
            .map(|i| {
                if self.zero_expert == Some(i) {
                    return 0.0;
                }
                rng.set_word_pos(i as u128 * EXPERT_WORDS);
                let bias = (i + 1) as f64 / self.n as f64;
                scale * bias * rng.gen::<f64>()
            })
            .collect();
        Ok((losses, scale))
    }
}

/// `((1 + ⟨c, x − center⟩ / r) / 2)²`, in `[0, 1]` on the ball of radius
/// `r` when `‖c‖ ≤ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SquaredAffineCost {
    pub direction: Vec<f64>,
    pub center: Vec<f64>,
    pub radius: f64,
}

impl SquaredAffineCost {
    fn base(&self, x: &[f64]) -> f64 {
        let inner: f64 = self
            .direction
            .iter()
            .zip(x.iter().zip(&self.center))
            .map(|(c, (xi, ci))| c * (xi - ci))
            .sum();
        0.5 * (1.0 + inner / self.radius)
    }
}

impl ConvexOracle for SquaredAffineCost {
    fn value(&self, x: &[f64]) -> f64 {
        self.base(x).powi(2)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let s = self.base(x);
        self.direction.iter().map(|c| s * c / self.radius).collect()
    }
}

/// `offset + weight ‖x − point‖² / scale²`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticConstraint {
    pub point: Vec<f64>,
    pub weight: f64,
    pub scale: f64,
    pub offset: f64,
}

impl ConvexOracle for QuadraticConstraint {
    fn value(&self, x: &[f64]) -> f64 {
        let sq: f64 = x
            .iter()
            .zip(&self.point)
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        self.offset + self.weight * sq / (self.scale * self.scale)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let k = 2.0 * self.weight / (self.scale * self.scale);
        x.iter()
            .zip(&self.point)
            .map(|(a, b)| k * (a - b))
            .collect()
    }
}

/// `‖x − anchor‖ / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceCost {
    pub anchor: Vec<f64>,
    pub scale: f64,
}

impl ConvexOracle for DistanceCost {
    fn value(&self, x: &[f64]) -> f64 {
        crate::geometry::dist(x, &self.anchor) / self.scale
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let d = crate::geometry::dist(x, &self.anchor);
        if d == 0.0 {
            return vec![0.0; x.len()];
        }
        x.iter()
            .zip(&self.anchor)
            .map(|(a, b)| (a - b) / (d * self.scale))
            .collect()
    }
}

/// `weight · max(0, ⟨u, x − point⟩) / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct HingeConstraint {
    pub direction: Vec<f64>,
    pub point: Vec<f64>,
    pub weight: f64,
    pub scale: f64,
}

impl HingeConstraint {
    fn inner(&self, x: &[f64]) -> f64 {
        self.direction
            .iter()
            .zip(x.iter().zip(&self.point))
            .map(|(u, (xi, pi))| u * (xi - pi))
            .sum()
    }
}

impl ConvexOracle for HingeConstraint {
    fn value(&self, x: &[f64]) -> f64 {
        self.weight * self.inner(x).max(0.0) / self.scale
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        if self.inner(x) <= 0.0 {
            return vec![0.0; x.len()];
        }
        self.direction
            .iter()
            .map(|u| self.weight * u / self.scale)
            .collect()
    }
}

/// Vector with entries in `[-1, 1]`, shrunk into the unit ball.
fn unit_ball_vector(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let k = norm.max(1.0);
    v.into_iter().map(|x| x / k).collect()
}

/// Unit vector; falls back to the first axis on a degenerate draw.
fn unit_vector(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-12 {
        let mut e = vec![0.0; d];
        e[0] = 1.0;
        return e;
    }
    v.into_iter().map(|x| x / norm).collect()
}

fn default_radius() -> f64 {
    1.0
}

fn default_center() -> Vec<f64> {
    vec![0.0, 0.0]
}

fn default_feasible_point() -> Vec<f64> {
    vec![0.5, 0.0]
}

fn default_start() -> Vec<f64> {
    vec![-1.0, 0.0]
}

fn default_smoothness() -> f64 {
    2.0
}

/// Smooth instance on a Euclidean ball. Costs are squared affine functions
/// and constraints are weighted squared distances to `feasible_point`,
/// optionally lifted so that the comparator spends exactly `budget` total
/// violation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothInstanceSpec {
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_center")]
    pub center: Vec<f64>,
    #[serde(default = "default_feasible_point")]
    pub feasible_point: Vec<f64>,
    #[serde(default = "default_start")]
    pub start: Vec<f64>,
    /// Declared smoothness used by the policies and bound checks.
    #[serde(default = "default_smoothness")]
    pub smoothness: f64,
    #[serde(default)]
    pub budget: f64,
    pub horizon: u64,
    #[serde(default)]
    pub seed: u64,
}

impl SmoothInstanceSpec {
    pub fn new(horizon: u64, seed: u64) -> Self {
        Self {
            radius: default_radius(),
            center: default_center(),
            feasible_point: default_feasible_point(),
            start: default_start(),
            smoothness: default_smoothness(),
            budget: 0.0,
            horizon,
            seed,
        }
    }

    /// Same instance where the comparator violates by `budget` in total.
    pub fn with_budget(mut self, budget: f64) -> Self {
        self.budget = budget;
        self
    }

    pub fn set(&self) -> Result<DecisionSet> {
        DecisionSet::ball(self.center.clone(), self.radius)
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }

    pub fn validate(&self) -> Result<()> {
        let set = self.set()?;
        if self.feasible_point.len() != self.center.len() || self.start.len() != self.center.len() {
            return Err(invalid("points must match the ball dimension"));
        }
        if !set.contains(&self.feasible_point, 1e-12) {
            return Err(invalid("feasible point lies outside the ball"));
        }
        if !(self.smoothness > 0.0) {
            return Err(invalid("smoothness must be positive"));
        }
        if self.horizon > 0 && !(0.0..=self.horizon as f64).contains(&self.budget) {
            return Err(invalid("budget must lie in [0, T]"));
        }
        Ok(())
    }

    /// Per-round violation floor `B_T / T`.
    pub fn violation_floor(&self) -> f64 {
        if self.horizon == 0 {
            0.0
        } else {
            self.budget / self.horizon as f64
        }
    }

    /// Cost and constraint oracles for round `t`.
    pub fn round(&self, t: u64) -> Result<(SquaredAffineCost, QuadraticConstraint)> {
        self.validate()?;
        check_round(t, self.horizon)?;
        let mut rng = round_rng(self.seed, t);
        let direction = unit_ball_vector(&mut rng, self.center.len());
        let weight = 0.5 + 0.5 * rng.gen::<f64>();
        let floor = self.violation_floor();
        let f = SquaredAffineCost {
            direction,
            center: self.center.clone(),
            radius: self.radius,
        };
        let g = QuadraticConstraint {
            point: self.feasible_point.clone(),
            weight: (1.0 - floor) * weight,
            scale: self.diameter(),
            offset: floor,
        };
        Ok((f, g))
    }
}

fn default_dimension() -> usize {
    1
}

fn default_lipschitz() -> f64 {
    1.0
}

/// Lipschitz instance on `[0, 1]^d` for the cover reduction: distance
/// costs to a moving anchor and hinge constraints that vanish at
/// `feasible_point`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzInstanceSpec {
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    pub feasible_point: Vec<f64>,
    /// Common Lipschitz bound `G` of costs and constraints.
    #[serde(default = "default_lipschitz")]
    pub lipschitz: f64,
    pub horizon: u64,
    #[serde(default)]
    pub seed: u64,
}

impl LipschitzInstanceSpec {
    pub fn new(feasible_point: Vec<f64>, horizon: u64, seed: u64) -> Self {
        Self {
            dimension: feasible_point.len(),
            feasible_point,
            lipschitz: default_lipschitz(),
            horizon,
            seed,
        }
    }

    pub fn set(&self) -> Result<DecisionSet> {
        DecisionSet::cube(self.dimension, 0.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.feasible_point.len() != self.dimension {
            return Err(invalid("feasible point must match the dimension"));
        }
        if !self.set()?.contains(&self.feasible_point, 0.0) {
            return Err(invalid("feasible point lies outside the unit cube"));
        }
        Ok(())
    }

    pub fn round(&self, t: u64) -> Result<(DistanceCost, HingeConstraint)> {
        self.validate()?;
        check_round(t, self.horizon)?;
        let mut rng = round_rng(self.seed, t);
        let d = self.dimension;
        let scale = (d as f64).sqrt();
        let anchor: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
        let direction = unit_vector(&mut rng, d);
        let weight = rng.gen::<f64>();
        Ok((
            DistanceCost { anchor, scale },
            HingeConstraint {
                direction,
                point: self.feasible_point.clone(),
                weight,
                scale,
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex_policy::gradient_error;
    use approx::assert_relative_eq;
    use proptest::prelude::{any, prop_assert, proptest};

    #[test]
    fn feasible_experts_never_violate() {
        let spec = SyntheticExpertSpec::new(5000, 3);
        for t in 1..=5000 {
            let r = spec.round(t).unwrap();
            for i in [FEASIBLE_BEST, DECOYS[0], DECOYS[1]] {
                assert_eq!(r.violation()[i], 0.0);
            }
        }
    }

    #[test]
    fn empirical_means_match_design() {
        for seed in 0..10 {
            let spec = SyntheticExpertSpec::new(5000, seed);
            let mut best = 0.0;
            let mut rest = 0.0;
            let mut rest_count = 0.0;
            let mut ucv = 0.0;
            for t in 1..=5000 {
                let r = spec.round(t).unwrap();
                best += r.cost()[UNCONSTRAINED_BEST];
                ucv += r.violation()[UNCONSTRAINED_BEST];
                for i in 0..20 {
                    if i != FEASIBLE_BEST && i != UNCONSTRAINED_BEST && !DECOYS.contains(&i) {
                        rest += r.cost()[i];
                        rest_count += 1.0;
                    }
                }
            }
            assert!((best / 5000.0 - 0.11).abs() < 0.02);
            assert!((rest / rest_count - 0.41).abs() < 0.02);
            assert!((ucv / 5000.0 - 0.91).abs() < 0.02);
        }
    }

    #[test]
    fn ocs_round_has_zero_costs() {
        let spec = SyntheticExpertSpec::ocs(100, 1);
        let full = SyntheticExpertSpec::new(100, 1);
        for t in 1..=100 {
            let r = spec.round(t).unwrap();
            assert!(r.cost().iter().all(|&c| c == 0.0));
            assert_eq!(r.violation(), full.round(t).unwrap().violation());
        }
    }

    #[test]
    fn rounds_are_pure_in_seed_and_round() {
        let spec = SyntheticExpertSpec::new(50, 8);
        let forward: Vec<_> = (1..=50).map(|t| spec.round(t).unwrap()).collect();
        for t in (1..=50).rev() {
            assert_eq!(spec.round(t).unwrap(), forward[t as usize - 1]);
        }
        let other = SyntheticExpertSpec::new(50, 9);
        assert_ne!(other.round(1).unwrap(), forward[0]);
    }

    #[test]
    fn out_of_range_round_is_rejected() {
        let spec = SyntheticExpertSpec::new(10, 0);
        assert!(spec.round(0).is_err());
        assert!(spec.round(11).is_err());
        let small = SyntheticExpertSpec { n: 5, ..spec };
        assert!(small.round(1).is_err());
    }

    #[test]
    fn unbounded_stream_examples() {
        let s = UnboundedLossStream {
            n: 4,
            horizon: 100,
            growth: 1.08,
            period: 1,
            zero_expert: Some(2),
            seed: 5,
        };
        assert_relative_eq!(s.scale(10), 2.158_924_997_272_788_6, max_relative = 1e-14);
        let mut prev = 1.0;
        for t in 1..=100 {
            let (l, g) = s.round(t).unwrap();
            assert_eq!(l[2], 0.0);
            assert!(l.iter().all(|&v| (0.0..=g).contains(&v)));
            assert!(g >= prev && g / prev <= 1.08 * (1.0 + 1e-12));
            prev = g;
        }
        let flat = UnboundedLossStream { growth: 1.0, ..s };
        for t in 1..=100 {
            let (l, g) = flat.round(t).unwrap();
            assert_eq!(g, 1.0);
            assert!(l.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn smooth_round_properties() {
        let spec = SmoothInstanceSpec::new(100, 2);
        let set = spec.set().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for t in 1..=100 {
            let (f, g) = spec.round(t).unwrap();
            assert_eq!(g.value(&spec.feasible_point), 0.0);
            assert!(g.gradient(&spec.feasible_point).iter().all(|&v| v == 0.0));
            // farthest point of the ball from x*
            assert!(g.value(&[-1.0, 0.0]) <= 1.0);
            for _ in 0..10 {
                let x = set.project(&unit_ball_vector(&mut rng, 2)).unwrap();
                assert!(gradient_error(&f, &x, 1e-5) < 1e-4);
                assert!(gradient_error(&g, &x, 1e-5) < 1e-4);
                assert!((0.0..=1.0).contains(&f.value(&x)));
                assert!((0.0..=1.0).contains(&g.value(&x)));
            }
        }
    }

    #[test]
    fn budget_comparator_spends_exactly_the_budget() {
        let spec = SmoothInstanceSpec::new(1000, 4).with_budget(10.0);
        let total: f64 = (1..=1000)
            .map(|t| spec.round(t).unwrap().1.value(&spec.feasible_point))
            .sum();
        assert_relative_eq!(total, 10.0, max_relative = 1e-12);
    }

    #[test]
    fn lipschitz_round_properties() {
        let spec = LipschitzInstanceSpec::new(vec![0.3, 0.6], 50, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for t in 1..=50 {
            let (f, g) = spec.round(t).unwrap();
            assert_eq!(g.value(&spec.feasible_point), 0.0);
            for _ in 0..20 {
                let x = [rng.gen::<f64>(), rng.gen::<f64>()];
                let y = [rng.gen::<f64>(), rng.gen::<f64>()];
                let span = crate::geometry::dist(&x, &y);
                assert!((f.value(&x) - f.value(&y)).abs() <= span + 1e-12);
                assert!((g.value(&x) - g.value(&y)).abs() <= span + 1e-12);
                assert!((0.0..=1.0).contains(&f.value(&x)));
                assert!((0.0..=1.0).contains(&g.value(&x)));
            }
        }
    }

    proptest! {
        #[test]
        fn synthetic_values_stay_in_unit_interval(seed in any::<u64>(), t in 1u64..=5000) {
            let r = SyntheticExpertSpec::new(5000, seed).round(t).unwrap();
            prop_assert!(r.cost().iter().chain(r.violation()).all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
