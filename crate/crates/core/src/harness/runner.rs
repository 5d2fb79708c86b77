use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{PolicyKind, RunConfig};
use super::protocol::RoundProtocol;
use super::record::{BoundCheck, Comparator, FrequencyRow, RoundRow, RunRecord, RunSummary};
use crate::convex_policy::{smooth_regret_bound, ConvexOracle, CoverPolicy, SmoothOgdPolicy};
use crate::environments::UnboundedLossStream;
use crate::error::{invalid, CocoError, Result};
use crate::expert_policy::{
    ConstrainedExpertPolicy, ExpertLearner, ExpertSampler, FixedRateBaseline, GROWTH_CAP,
};
use crate::geometry::build_cover;
use crate::hedge::{adaptive_regret_bound, HedgeState, DEFAULT_GAMMA};
use crate::model::{lambda_budget, lambda_smooth, LyapunovConfig, EXPERT_RATE_CONST};

/// Largest `N` whose distributions are written out per round.
pub const MAX_LOGGED_EXPERTS: usize = 32;

/// Relative allowance on identities that hold exactly in real arithmetic.
const IDENTITY_SLACK: f64 = 1e-9;

fn at_round<T>(t: u64, r: Result<T>) -> Result<T> {
    r.map_err(|e| CocoError::RoundFailure {
        round: t as usize,
        source: Box::new(e),
    })
}

/// Among experts with zero total violation, the one with the smallest total
/// cost; ties go to the lowest index.
pub fn best_feasible_comparator(cost_totals: &[f64], violation_totals: &[f64]) -> Result<usize> {
    if cost_totals.len() != violation_totals.len() {
        return Err(CocoError::DimensionMismatch {
            expected: cost_totals.len(),
            got: violation_totals.len(),
        });
    }
    let mut best: Option<usize> = None;
    for (i, (&c, &g)) in cost_totals.iter().zip(violation_totals).enumerate() {
        if g == 0.0 && best.is_none_or(|b| c < cost_totals[b]) {
            best = Some(i);
        }
    }
    best.ok_or(CocoError::InfeasibleInstance)
}

/// Per-expert sums collected over an expert-setting run.
struct ExpertTally {
    cost: Vec<f64>,
    violation: Vec<f64>,
    expected: Vec<f64>,
    sampled: Vec<u64>,
    tail: Vec<f64>,
    tail_rounds: u64,
    max_ratio: f64,
}

impl ExpertTally {
    fn new(n: usize) -> Self {
        Self {
            cost: vec![0.0; n],
            violation: vec![0.0; n],
            expected: vec![0.0; n],
            sampled: vec![0; n],
            tail: vec![0.0; n],
            tail_rounds: 0,
            max_ratio: 0.0,
        }
    }

    fn absorb(&mut self, cost: &[f64], violation: &[f64], probs: &[f64], drawn: usize, tail: bool) {
        for i in 0..self.cost.len() {
            self.cost[i] += cost[i];
            self.violation[i] += violation[i];
            self.expected[i] += probs[i];
            if tail {
                self.tail[i] += probs[i];
            }
        }
        self.sampled[drawn] += 1;
        if tail {
            self.tail_rounds += 1;
        }
    }

    fn frequencies(&self, horizon: u64) -> Vec<FrequencyRow> {
        let t = horizon as f64;
        (0..self.cost.len())
            .map(|i| FrequencyRow {
                expert: i,
                expected: self.expected[i] / t,
                sampled: self.sampled[i] as f64 / t,
            })
            .collect()
    }

    fn tail_mass(&self) -> Vec<f64> {
        let k = self.tail_rounds.max(1) as f64;
        self.tail.iter().map(|v| v / k).collect()
    }
}

/// Checks shared by every policy built on the constrained expert learner.
fn expert_checks(
    learner: &dyn ExpertLearner,
    tally: &ExpertTally,
    algo_cost: f64,
    comparator: Option<usize>,
    horizon: u64,
) -> Result<Vec<BoundCheck>> {
    let n = learner.n();
    let q = learner.ccv().q();
    let lyap = learner.lyapunov();
    let phi_prime = lyap.derivative(q)?;
    let phi_gain = lyap.value(q)? - 1.0;
    let sur = learner.surrogate_losses();
    let sur_algo = learner.surrogate_algo_loss();

    let mut checks = vec![BoundCheck::new("gamma-ratio", tally.max_ratio, GROWTH_CAP)];

    let l_star = sur.iter().cloned().fold(f64::INFINITY, f64::min);
    checks.push(BoundCheck::new(
        "adaptive-hedge",
        sur_algo - l_star,
        adaptive_regret_bound(l_star, learner.scale(), n, DEFAULT_GAMMA),
    ));

    let mut worst = f64::NEG_INFINITY;
    let mut magnitude: f64 = 1.0;
    for ((cost, violation), s) in tally.cost.iter().zip(&tally.violation).zip(sur) {
        let lhs = phi_gain + algo_cost - cost;
        let rhs = sur_algo - s + phi_prime * violation;
        worst = worst.max(lhs - rhs);
        magnitude = magnitude.max(lhs.abs()).max(rhs.abs());
    }
    checks.push(BoundCheck::with_slack(
        "decomposition",
        worst,
        0.0,
        IDENTITY_SLACK * magnitude,
    ));

    if let Some(i) = comparator {
        let ln_n = (n as f64).ln();
        let g = 1.0 + phi_prime;
        let c = EXPERT_RATE_CONST;
        checks.push(BoundCheck::new(
            "surrogate-small-loss",
            sur_algo - sur[i],
            c * (horizon as f64 * g * ln_n).sqrt() + c * g * ln_n,
        ));
    }
    Ok(checks)
}

struct Outcome {
    rows: Vec<RoundRow>,
    cumulative_cost: f64,
    comparator_cost: f64,
    comparator: Comparator,
    ccv: f64,
    lambda: Option<f64>,
    checks: Vec<BoundCheck>,
    frequencies: Option<Vec<FrequencyRow>>,
    tail_mass: Option<Vec<f64>>,
}

fn tail_start(horizon: u64) -> u64 {
    horizon - horizon / 5
}

fn run_expert<L: ExpertLearner>(cfg: &RunConfig, mut learner: L, assert: bool) -> Result<Outcome> {
    let spec = cfg.expert_spec();
    let n = learner.n();
    let mut proto = RoundProtocol::new();
    let mut sampler = ExpertSampler::new(cfg.sampler_seed());
    let mut tally = ExpertTally::new(n);
    let mut rows = Vec::with_capacity(cfg.horizon as usize);
    let (mut cum_cost, mut ccv) = (0.0, 0.0);
    let tail_from = tail_start(cfg.horizon);

    for t in 1..=cfg.horizon {
        let p = learner.act();
        let eta = learner.learning_rate();
        at_round(t, proto.commit(t))?;
        let round = at_round(t, proto.reveal(t, |t| spec.round(t)))?;
        let info = at_round(t, learner.feedback(&round, &p))?;
        let drawn = sampler.draw(&p);
        tally.absorb(
            round.cost(),
            round.violation(),
            p.probs(),
            drawn,
            t > tail_from,
        );
        tally.max_ratio = tally.max_ratio.max(info.scale_ratio);
        cum_cost += info.cost;
        ccv += info.violation;
        rows.push(RoundRow {
            t,
            cost: info.cost,
            violation: info.violation,
            q: learner.ccv().q(),
            eta: Some(eta),
            g_scale: info.scale,
            argmax_expert: Some(p.argmax()),
            action: if n <= MAX_LOGGED_EXPERTS {
                p.probs().to_vec()
            } else {
                Vec::new()
            },
        });
    }

    let comparator = best_feasible_comparator(&tally.cost, &tally.violation)?;
    let checks = if assert {
        expert_checks(&learner, &tally, cum_cost, Some(comparator), cfg.horizon)?
    } else {
        Vec::new()
    };
    Ok(Outcome {
        rows,
        cumulative_cost: cum_cost,
        comparator_cost: tally.cost[comparator],
        comparator: Comparator::Expert(comparator),
        ccv,
        lambda: Some(learner.lyapunov().lambda()),
        checks,
        frequencies: Some(tally.frequencies(cfg.horizon)),
        tail_mass: Some(tally.tail_mass()),
    })
}

fn run_cover(cfg: &RunConfig) -> Result<Outcome> {
    let spec = cfg.lipschitz_spec();
    let set = spec.set()?;
    let delta = cfg.cover_delta();
    let cover = build_cover(&set, delta)?;
    let mut policy = CoverPolicy::new(cover, cfg.horizon, cfg.beta, spec.lipschitz)?;
    let n = policy.cover().len();
    let x_star = spec.feasible_point.clone();

    let mut proto = RoundProtocol::new();
    let mut sampler = ExpertSampler::new(cfg.sampler_seed());
    let mut tally = ExpertTally::new(n);
    let mut rows = Vec::with_capacity(cfg.horizon as usize);
    let (mut cum_cost, mut ccv, mut comp_cost) = (0.0, 0.0, 0.0);
    let (mut inner_cost, mut inner_ccv) = (0.0, 0.0);
    let tail_from = tail_start(cfg.horizon);

    for t in 1..=cfg.horizon {
        let (x, p) = policy.act();
        let eta = policy.inner().learning_rate();
        at_round(t, proto.commit(t))?;
        let (f, g) = at_round(t, proto.reveal(t, |t| spec.round(t)))?;
        let fb = at_round(t, policy.feedback(&f, &g, &p))?;
        let cost = f.value(&x);
        let violation = g.value(&x);
        cum_cost += cost;
        ccv += violation;
        comp_cost += f.value(&x_star);
        inner_cost += fb.info.cost;
        inner_ccv += fb.info.violation;
        let drawn = sampler.draw(&p);
        let r = &fb.expert_round;
        tally.absorb(r.cost(), r.violation(), p.probs(), drawn, t > tail_from);
        tally.max_ratio = tally.max_ratio.max(fb.info.scale_ratio);
        rows.push(RoundRow {
            t,
            cost,
            violation,
            q: ccv,
            eta: Some(eta),
            g_scale: fb.info.scale,
            argmax_expert: Some(p.argmax()),
            action: x,
        });
    }

    let mut checks = Vec::new();
    if cfg.assert_bounds {
        let inner_best = best_feasible_comparator(&tally.cost, &tally.violation).ok();
        checks = expert_checks(policy.inner(), &tally, inner_cost, inner_best, cfg.horizon)?;
        let slack = spec.lipschitz * delta * cfg.horizon as f64;
        let eps = IDENTITY_SLACK * (1.0 + cum_cost.max(ccv));
        checks.push(BoundCheck::with_slack(
            "cover-cost-slack",
            cum_cost - inner_cost,
            slack,
            eps,
        ));
        checks.push(BoundCheck::with_slack(
            "cover-ccv-slack",
            ccv - inner_ccv,
            slack,
            eps,
        ));
    }
    Ok(Outcome {
        rows,
        cumulative_cost: cum_cost,
        comparator_cost: comp_cost,
        comparator: Comparator::Point(x_star),
        ccv,
        lambda: Some(policy.inner().lyapunov().lambda()),
        checks,
        frequencies: Some(tally.frequencies(cfg.horizon)),
        tail_mass: Some(tally.tail_mass()),
    })
}

/// `λ` used by the surrogate OGD policy: the budget schedule when a budget
/// is set, the smooth schedule otherwise.
pub fn smooth_lambda(cfg: &RunConfig) -> Result<f64> {
    let spec = cfg.smooth_spec();
    if cfg.budget > 0.0 {
        lambda_budget(cfg.horizon, cfg.beta, cfg.budget, cfg.c_budget)
    } else {
        lambda_smooth(cfg.horizon, cfg.beta, spec.diameter(), spec.smoothness)
    }
}

fn run_smooth(cfg: &RunConfig, surrogate: bool) -> Result<Outcome> {
    let spec = cfg.smooth_spec();
    let set = spec.set()?;
    let diameter = spec.diameter();
    let smoothness = spec.smoothness;
    let x_star = spec.feasible_point.clone();
    let lyapunov = if surrogate {
        Some(LyapunovConfig::new(smooth_lambda(cfg)?)?)
    } else {
        None
    };
    let mut policy = match lyapunov {
        Some(l) => SmoothOgdPolicy::new(set, &spec.start, l)?,
        None => SmoothOgdPolicy::pure_ocs(set, &spec.start)?,
    };

    let mut proto = RoundProtocol::new();
    let mut rows = Vec::with_capacity(cfg.horizon as usize);
    let (mut cum_cost, mut ccv, mut comp_cost) = (0.0, 0.0, 0.0);
    let (mut sur_algo, mut sur_comp) = (0.0, 0.0);

    for t in 1..=cfg.horizon {
        at_round(t, proto.commit(t))?;
        let (f, g) = at_round(t, proto.reveal(t, |t| spec.round(t)))?;
        let step = if surrogate {
            at_round(t, policy.step(&f, &g))?
        } else {
            at_round(t, policy.ocs_step(&g))?
        };
        let comp_f = if surrogate { f.value(&x_star) } else { 0.0 };
        cum_cost += step.cost;
        ccv += step.violation;
        comp_cost += comp_f;
        if surrogate {
            sur_algo += step.cost + step.phi_prime * step.violation;
            sur_comp += comp_f + step.phi_prime * g.value(&x_star);
        }
        rows.push(RoundRow {
            t,
            cost: step.cost,
            violation: step.violation,
            q: policy.ccv().q(),
            eta: step.eta,
            g_scale: 1.0 + step.phi_prime,
            argmax_expert: None,
            action: step.played,
        });
    }

    let mut checks = Vec::new();
    if cfg.assert_bounds {
        match lyapunov {
            Some(l) => {
                let phi = policy.ccv().phi_prime(&l)?;
                let bound = smooth_regret_bound(
                    cfg.horizon as f64 + phi * spec.budget,
                    diameter,
                    smoothness * (1.0 + phi),
                );
                checks.push(BoundCheck::new(
                    "surrogate-regret",
                    sur_algo - sur_comp,
                    bound,
                ));
            }
            None if spec.budget == 0.0 => {
                let cap = 4.0 * diameter * diameter * smoothness;
                checks.push(BoundCheck::new("ocs-constant-ccv", ccv, cap));
            }
            None => {}
        }
    }
    Ok(Outcome {
        rows,
        cumulative_cost: cum_cost,
        comparator_cost: comp_cost,
        comparator: Comparator::Point(x_star),
        ccv,
        lambda: lyapunov.map(|l| l.lambda()),
        checks,
        frequencies: None,
        tail_mass: None,
    })
}

fn empty_outcome(cfg: &RunConfig) -> Outcome {
    let comparator = match cfg.policy {
        PolicyKind::ConstrainedExpert | PolicyKind::StdHedgeBaseline => {
            Comparator::Expert(cfg.expert_spec().feasible_expert())
        }
        PolicyKind::CoverReduction => Comparator::Point(cfg.lipschitz_spec().feasible_point),
        PolicyKind::SmoothOgd | PolicyKind::PureOgdOcs => {
            Comparator::Point(cfg.smooth_spec().feasible_point)
        }
    };
    Outcome {
        rows: Vec::new(),
        cumulative_cost: 0.0,
        comparator_cost: 0.0,
        comparator,
        ccv: 0.0,
        lambda: None,
        checks: Vec::new(),
        frequencies: None,
        tail_mass: None,
    }
}

/// Runs one experiment end to end.
pub fn run(cfg: &RunConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let start = Instant::now();
    let n = cfg.n_experts;
    let out = if cfg.horizon == 0 {
        empty_outcome(cfg)
    } else {
        match cfg.policy {
            PolicyKind::ConstrainedExpert => run_expert(
                cfg,
                ConstrainedExpertPolicy::new(n, cfg.horizon, cfg.beta)?,
                cfg.assert_bounds,
            )?,
            PolicyKind::StdHedgeBaseline => run_expert(
                cfg,
                FixedRateBaseline::new(n, cfg.horizon, cfg.beta, cfg.baseline_eta)?,
                false,
            )?,
            PolicyKind::CoverReduction => run_cover(cfg)?,
            PolicyKind::SmoothOgd => run_smooth(cfg, true)?,
            PolicyKind::PureOgdOcs => run_smooth(cfg, false)?,
        }
    };
    let all_passed = out.checks.iter().all(|c| c.passed);
    Ok(RunRecord {
        rows: out.rows,
        summary: RunSummary {
            policy: cfg.policy.name().to_string(),
            seed: cfg.seed,
            horizon: cfg.horizon,
            regret: out.cumulative_cost - out.comparator_cost,
            ccv: out.ccv,
            cumulative_cost: out.cumulative_cost,
            comparator_cost: out.comparator_cost,
            comparator: out.comparator,
            lambda: out.lambda,
            checks: out.checks,
            all_passed,
            config: cfg.clone(),
        },
        frequencies: out.frequencies,
        tail_mass: out.tail_mass,
        wall_time: start.elapsed(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub beta: f64,
    pub regret: f64,
    pub ccv: f64,
    pub all_passed: bool,
}

/// One run per `β` on the base config's seed, executed in parallel.
pub fn sweep(base: &RunConfig, betas: &[f64]) -> Result<Vec<SweepRow>> {
    if betas.is_empty() {
        return Err(invalid("sweep needs at least one beta"));
    }
    betas
        .par_iter()
        .map(|&beta| {
            let rec = run(&base.clone().with_beta(beta))?;
            Ok(SweepRow {
                beta,
                regret: rec.summary.regret,
                ccv: rec.summary.ccv,
                all_passed: rec.all_passed(),
            })
        })
        .collect()
}

/// Runs adaptive Hedge on an unbounded stream and checks its regret bound
/// against the best expert in hindsight.
pub fn hedge_stream_check(stream: &UnboundedLossStream) -> Result<BoundCheck> {
    stream.validate()?;
    let mut hedge = HedgeState::with_params(stream.n, DEFAULT_GAMMA, 1.0)?;
    for t in 1..=stream.horizon {
        let p = hedge.distribution();
        let (losses, scale) = stream.round(t)?;
        at_round(t, hedge.observe(&losses, &p, scale))?;
    }
    let l_star = hedge
        .cum_losses()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    Ok(BoundCheck::new(
        "adaptive-hedge",
        hedge.algo_loss() - l_star,
        adaptive_regret_bound(l_star, hedge.scale(), stream.n, DEFAULT_GAMMA),
    ))
}
