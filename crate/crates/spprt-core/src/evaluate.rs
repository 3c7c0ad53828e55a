//! Operating characteristics of frozen plans, three independent ways.
//!
//! * [`evaluate_exact`]: forward dynamic program over the integer state
//!   (successes, failures), exact up to f64 rounding. The reference.
//! * [`evaluate_grid`]: backward recursion of acceptance probability and
//!   expected-cost families on the plan's own envelope grids, interpolating
//!   like the design did. Agreement with the exact evaluator bounds the
//!   design's interpolation error; disagreement flags a grid too coarse.
//! * [`simulate`]: seeded Monte Carlo, reproducible bit for bit for a fixed
//!   (seed, trials) pair regardless of batching, with standard errors.
//!
//! All three share the plan's membership, rule, and decision functions, so
//! they can only differ by numerics, never by boundary semantics.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::design::{accepts_h1, CostModel, Plan};
use crate::envelope::LogGrid;
use crate::error::{Error, Result};
use crate::model::{group_distribution, GroupOutcomeDistribution};
use crate::util::{mix_seed, NeumaierSum};

/// Operating characteristics of a plan at one success probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// Probability the test ends accepting H0.
    pub p_accept_h0: f64,
    /// Expected total observation cost under the supplied cost model.
    pub exp_cost: f64,
    /// Expected number of groups taken (stages used).
    pub exp_groups: f64,
    /// Expected number of observations consumed.
    pub exp_obs: f64,
}

/// Exact-evaluation diagnostics alongside the point estimates.
#[derive(Debug, Clone, Copy)]
pub struct ExactDetail {
    pub evaluation: Evaluation,
    /// Stopping mass within rounding distance of the decision threshold;
    /// bounds how far the error rates could move if ties broke the other way.
    pub threshold_mass: f64,
    /// Probability mass dropped by pruning (zero unless an epsilon was set).
    pub pruned_mass: f64,
    /// Largest per-stage defect of stopped + live + pruned mass from 1.
    pub max_mass_defect: f64,
}

/// Monte Carlo standard errors matching the [`Evaluation`] fields.
#[derive(Debug, Clone, Copy)]
pub struct StdErrors {
    pub p_accept_h0: f64,
    pub exp_cost: f64,
    pub exp_groups: f64,
    pub exp_obs: f64,
}

fn validate_theta(theta: f64) -> Result<()> {
    if !theta.is_finite() || theta <= 0.0 || theta >= 1.0 {
        return Err(Error::invalid(format!(
            "evaluation theta must lie strictly between 0 and 1, got {theta}"
        )));
    }
    Ok(())
}

/// Menu costs validated and prefetched (plus the first group's size, which
/// is always on the menu).
fn menu_costs(plan: &Plan, cost: &CostModel) -> Result<BTreeMap<u32, f64>> {
    cost.validate_positive(plan.config().group_sizes())?;
    plan.config()
        .group_sizes()
        .iter()
        .map(|&m| Ok((m, cost.cost(m)?)))
        .collect()
}

// ---------------------------------------------------------------------------
// exact forward dynamic program

struct SideAcc {
    p_h0: NeumaierSum,
    cost: NeumaierSum,
    groups: NeumaierSum,
    obs: NeumaierSum,
    stopped: NeumaierSum,
    pruned: NeumaierSum,
    threshold: NeumaierSum,
    max_defect: f64,
}

impl SideAcc {
    fn new() -> Self {
        Self {
            p_h0: NeumaierSum::new(),
            cost: NeumaierSum::new(),
            groups: NeumaierSum::new(),
            obs: NeumaierSum::new(),
            stopped: NeumaierSum::new(),
            pruned: NeumaierSum::new(),
            threshold: NeumaierSum::new(),
            max_defect: 0.0,
        }
    }

    fn detail(&self) -> ExactDetail {
        ExactDetail {
            evaluation: Evaluation {
                p_accept_h0: self.p_h0.value(),
                exp_cost: self.cost.value(),
                exp_groups: self.groups.value(),
                exp_obs: self.obs.value(),
            },
            threshold_mass: self.threshold.value(),
            pruned_mass: self.pruned.value(),
            max_mass_defect: self.max_defect,
        }
    }
}

/// Exact evaluation at two parameter values in one sweep. The reachable
/// state set and every sampling-rule call are shared between the two, which
/// matters because the rule's argmin dominates the runtime; only the
/// transition weights differ.
pub(crate) fn evaluate_exact_pair(
    plan: &Plan,
    thetas: [f64; 2],
    cost: &CostModel,
    prune_eps: f64,
) -> Result<[ExactDetail; 2]> {
    for t in thetas {
        validate_theta(t)?;
    }
    if !(0.0..1.0).contains(&prune_eps) {
        return Err(Error::invalid(format!(
            "pruning epsilon must lie in [0, 1), got {prune_eps}"
        )));
    }
    let costs = menu_costs(plan, cost)?;
    let hyp = *plan.config().hypotheses();
    let params = *plan.config().params();
    let ln_z_star = params.ln_z_star();
    let k_eff = plan.k_eff();
    let m1 = plan.m1();

    // every prescribable size is on the menu, so prefetch all of them
    let mut dists: [BTreeMap<u32, GroupOutcomeDistribution>; 2] =
        [BTreeMap::new(), BTreeMap::new()];
    for side in 0..2 {
        for &m in plan.config().group_sizes() {
            dists[side].insert(m, group_distribution(&hyp, m, thetas[side])?);
        }
    }

    let mut acc = [SideAcc::new(), SideAcc::new()];

    // mandatory first group
    let c1 = costs[&m1];
    let mut frontier: BTreeMap<(u64, u64), [f64; 2]> = BTreeMap::new();
    {
        let d0 = &dists[0][&m1];
        let d1 = &dists[1][&m1];
        for side in 0..2 {
            acc[side].cost.add(c1);
            acc[side].groups.add(1.0);
            acc[side].obs.add(f64::from(m1));
        }
        for s in 0..=m1 {
            let key = (u64::from(s), u64::from(m1 - s));
            let w = [d0.probs()[s as usize], d1.probs()[s as usize]];
            let e = frontier.entry(key).or_insert([0.0, 0.0]);
            e[0] += w[0];
            e[1] += w[1];
        }
    }

    for stage in 1..=k_eff {
        let allowance = k_eff - stage;
        let mut next: BTreeMap<(u64, u64), [f64; 2]> = BTreeMap::new();
        for (&(s, f), &p) in &frontier {
            if prune_eps > 0.0 && p[0].max(p[1]) < prune_eps {
                acc[0].pruned.add(p[0]);
                acc[1].pruned.add(p[1]);
                continue;
            }
            let u = hyp.log_lr(s, f);
            let m = if allowance == 0 {
                0
            } else {
                plan.rule_log(allowance, u)
            };
            if m == 0 {
                let h1 = accepts_h1(&params, u.exp());
                // rounding envelope around the threshold grows with the
                // number of accumulated log terms
                let near = (u - ln_z_star).abs() <= (s + f + 1) as f64 * 1e-13;
                for side in 0..2 {
                    if !h1 {
                        acc[side].p_h0.add(p[side]);
                    }
                    acc[side].stopped.add(p[side]);
                    if near {
                        acc[side].threshold.add(p[side]);
                    }
                }
            } else {
                let cm = costs[&m];
                let d0 = &dists[0][&m];
                let d1 = &dists[1][&m];
                for side in 0..2 {
                    acc[side].cost.add(p[side] * cm);
                    acc[side].groups.add(p[side]);
                    acc[side].obs.add(p[side] * f64::from(m));
                }
                let (p0s, p1s) = (d0.probs(), d1.probs());
                for t in 0..=m as usize {
                    let key = (s + t as u64, f + u64::from(m) - t as u64);
                    let e = next.entry(key).or_insert([0.0, 0.0]);
                    e[0] += p[0] * p0s[t];
                    e[1] += p[1] * p1s[t];
                }
            }
        }
        // stage-wise mass conservation
        for side in 0..2 {
            let mut live = NeumaierSum::new();
            for p in next.values() {
                live.add(p[side]);
            }
            let total = acc[side].stopped.value() + acc[side].pruned.value() + live.value();
            let defect = (1.0 - total).abs();
            if defect > acc[side].max_defect {
                acc[side].max_defect = defect;
            }
        }
        frontier = next;
    }
    debug_assert!(frontier.is_empty(), "allowance 0 stops every state");

    Ok([acc[0].detail(), acc[1].detail()])
}

/// Exact operating characteristics by forward dynamic programming over the
/// integer (successes, failures) state.
pub fn evaluate_exact(plan: &Plan, theta: f64, cost: &CostModel) -> Result<Evaluation> {
    Ok(evaluate_exact_detailed(plan, theta, cost, 0.0)?.evaluation)
}

/// Exact evaluation with conservation diagnostics and optional pruning of
/// states whose mass fell below `prune_eps` (0 disables pruning).
pub fn evaluate_exact_detailed(
    plan: &Plan,
    theta: f64,
    cost: &CostModel,
    prune_eps: f64,
) -> Result<ExactDetail> {
    let [d, _] = evaluate_exact_pair(plan, [theta, theta], cost, prune_eps)?;
    Ok(d)
}

// ---------------------------------------------------------------------------
// grid backward recursion

/// Interior columns of the grid evaluator are sampled this many times finer
/// than the design grid. The interpolated functions jump wherever a child
/// outcome crosses a stopping boundary, so refinement narrows the window in
/// which a jump can hide between nodes; it cannot remove the jumps, which is
/// why coarse group menus still degrade this evaluator (see module docs).
const COLUMN_REFINEMENT: f64 = 8.0;

/// Acceptance probability and expected-cost recursions represented like the
/// design envelopes: closed forms outside each level's continuation interval
/// (decide now, no further cost) and linear-in-z interpolation of sampled
/// columns inside, on a refined copy of the level's grid.
///
/// Agreement with [`evaluate_exact`] measures the faithfulness of that
/// piecewise-linear surrogate. The true acceptance and cost functions of a
/// Bernoulli plan are step functions of the likelihood ratio, constant
/// between jumps, so interpolation is exact unless a queried point falls in
/// a cell straddling a jump. Generic hypotheses keep the outcome lattice
/// away from the jumps and this evaluator tracks the exact one closely;
/// symmetric hypotheses with small groups align reachable points exactly on
/// decision jumps, where interpolation returns a mid-jump average no matter
/// how fine the grid. The exact evaluator is the reference in that regime.
pub fn evaluate_grid(plan: &Plan, theta: f64, cost: &CostModel) -> Result<Evaluation> {
    validate_theta(theta)?;
    let costs = menu_costs(plan, cost)?;
    let hyp = *plan.config().hypotheses();
    let params = *plan.config().params();
    let k_eff = plan.k_eff();
    let m1 = plan.m1();

    let mut dists: BTreeMap<u32, GroupOutcomeDistribution> = BTreeMap::new();
    for &m in plan.config().group_sizes() {
        dists.insert(m, group_distribution(&hyp, m, theta)?);
    }

    // value columns per allowance level: acceptance probability d and the
    // accumulated-cost family l for cost, group count, and observation count
    struct Cols {
        grid: LogGrid,
        d: Vec<f64>,
        l_cost: Vec<f64>,
        l_groups: Vec<f64>,
        l_obs: Vec<f64>,
    }
    let mut cols: Vec<Cols> = Vec::new();

    // d_j and l_j at an arbitrary log position: closed forms outside the
    // level's interval (decide now / no further cost), interpolation inside
    let d_at = |cols: &[Cols], plan: &Plan, j: u32, u: f64| -> f64 {
        if j == 0 || !plan.in_continuation_log(j, u) {
            if accepts_h1(&params, u.exp()) {
                0.0
            } else {
                1.0
            }
        } else {
            let col = &cols[(j - 1) as usize];
            col.grid.lerp(u, &col.d)
        }
    };
    let l_at = |cols: &[Cols], plan: &Plan, j: u32, u: f64, which: usize| -> f64 {
        if j == 0 || !plan.in_continuation_log(j, u) {
            0.0
        } else {
            let col = &cols[(j - 1) as usize];
            let values = match which {
                0 => &col.l_cost,
                1 => &col.l_groups,
                _ => &col.l_obs,
            };
            col.grid.lerp(u, values)
        }
    };

    let h_col = plan.config().grid_step() / COLUMN_REFINEMENT;
    for j in 1..k_eff {
        let (a, b) = plan
            .envelope(j)?
            .interval()
            .expect("designed levels carry continuation intervals");
        let grid = LogGrid::new(a, b, h_col)?;
        let n = grid.nodes().len();
        let mut col = Cols {
            grid,
            d: Vec::with_capacity(n),
            l_cost: Vec::with_capacity(n),
            l_groups: Vec::with_capacity(n),
            l_obs: Vec::with_capacity(n),
        };
        for i in 0..n {
            let u = col.grid.ln_nodes()[i];
            let m = plan.rule_log(j, u);
            debug_assert!(m >= 1, "nodes lie inside the closed interval");
            let dist = &dists[&m];
            let log_lr = dist.log_lr_factors();
            let probs = dist.probs();
            let (mut d, mut lc, mut lg, mut lo) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
            for t in 0..probs.len() {
                let p = probs[t];
                let v = u + log_lr[t];
                d += p * d_at(&cols, plan, j - 1, v);
                lc += p * l_at(&cols, plan, j - 1, v, 0);
                lg += p * l_at(&cols, plan, j - 1, v, 1);
                lo += p * l_at(&cols, plan, j - 1, v, 2);
            }
            col.d.push(d);
            col.l_cost.push(costs[&m] + lc);
            col.l_groups.push(1.0 + lg);
            col.l_obs.push(f64::from(m) + lo);
        }
        cols.push(col);
    }

    // assemble across the mandatory first group
    let top = k_eff - 1;
    let dist1 = group_distribution(&hyp, m1, theta)?;
    let probs = dist1.probs();
    let (mut d, mut lc, mut lg, mut lo) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for s in 0..=m1 {
        let p = probs[s as usize];
        let u = hyp.log_lr(u64::from(s), u64::from(m1 - s));
        d += p * d_at(&cols, plan, top, u);
        lc += p * l_at(&cols, plan, top, u, 0);
        lg += p * l_at(&cols, plan, top, u, 1);
        lo += p * l_at(&cols, plan, top, u, 2);
    }
    Ok(Evaluation {
        p_accept_h0: d,
        exp_cost: costs[&m1] + lc,
        exp_groups: 1.0 + lg,
        exp_obs: f64::from(m1) + lo,
    })
}

// ---------------------------------------------------------------------------
// Monte Carlo

/// Simulates the plan `trials` times. Each trial seeds its own ChaCha8 stream
/// from (seed, trial index), so results are byte-identical for a fixed
/// (seed, trials) pair no matter how trials are batched or scheduled.
pub fn simulate(
    plan: &Plan,
    theta: f64,
    cost: &CostModel,
    trials: u64,
    seed: u64,
) -> Result<(Evaluation, StdErrors)> {
    validate_theta(theta)?;
    if trials < 2 {
        return Err(Error::invalid(
            "simulation needs at least 2 trials for standard errors",
        ));
    }
    let costs = menu_costs(plan, cost)?;
    let hyp = *plan.config().hypotheses();
    let params = *plan.config().params();
    let k_eff = plan.k_eff();
    let m1 = plan.m1();

    let mut dists: BTreeMap<u32, GroupOutcomeDistribution> = BTreeMap::new();
    for &m in plan.config().group_sizes() {
        dists.insert(m, group_distribution(&hyp, m, theta)?);
    }

    let mut sums = [0.0f64; 4];
    let mut sumsq = [0.0f64; 4];
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, trial));
        let mut s: u64 = 0;
        let mut f: u64 = 0;
        let mut groups: u32 = 1;
        let mut obs = f64::from(m1);
        let mut cost_acc = costs[&m1];
        let t = dists[&m1].sample(rng.gen::<f64>());
        s += u64::from(t);
        f += u64::from(m1 - t);
        loop {
            let allowance = k_eff - groups;
            if allowance == 0 {
                break;
            }
            let u = hyp.log_lr(s, f);
            let m = plan.rule_log(allowance, u);
            if m == 0 {
                break;
            }
            cost_acc += costs[&m];
            obs += f64::from(m);
            groups += 1;
            let t = dists[&m].sample(rng.gen::<f64>());
            s += u64::from(t);
            f += u64::from(m - t);
        }
        let h0 = if accepts_h1(&params, hyp.log_lr(s, f).exp()) {
            0.0
        } else {
            1.0
        };
        for (i, x) in [h0, cost_acc, f64::from(groups), obs].into_iter().enumerate() {
            sums[i] += x;
            sumsq[i] += x * x;
        }
    }

    let n = trials as f64;
    let mut mean = [0.0f64; 4];
    let mut se = [0.0f64; 4];
    for i in 0..4 {
        mean[i] = sums[i] / n;
        let var = ((sumsq[i] - n * mean[i] * mean[i]) / (n - 1.0)).max(0.0);
        se[i] = (var / n).sqrt();
    }
    Ok((
        Evaluation {
            p_accept_h0: mean[0],
            exp_cost: mean[1],
            exp_groups: mean[2],
            exp_obs: mean[3],
        },
        StdErrors {
            p_accept_h0: se[0],
            exp_cost: se[1],
            exp_groups: se[2],
            exp_obs: se[3],
        },
    ))
}

// ---------------------------------------------------------------------------
// curves and profiles

/// P(accept H0) as a function of theta, by exact evaluation. Points are
/// independent: an invalid theta yields an error for that point only.
pub fn oc_curve(plan: &Plan, thetas: &[f64]) -> Vec<(f64, Result<f64>)> {
    let count_cost = CostModel::affine(1.0, 0.0);
    let mut out: Vec<(f64, Option<Result<f64>>)> =
        thetas.iter().map(|&t| (t, None)).collect();
    let valid: Vec<usize> = (0..thetas.len())
        .filter(|&i| validate_theta(thetas[i]).is_ok())
        .collect();
    for (i, &t) in thetas.iter().enumerate() {
        if let Err(e) = validate_theta(t) {
            out[i].1 = Some(Err(e));
        }
    }
    // exact evaluation handles two thetas per sweep; pair the valid points
    for pair in valid.chunks(2) {
        let (ia, ib) = (pair[0], *pair.last().expect("non-empty chunk"));
        match evaluate_exact_pair(plan, [thetas[ia], thetas[ib]], &count_cost, 0.0) {
            Ok([da, db]) => {
                out[ia].1 = Some(Ok(da.evaluation.p_accept_h0));
                if ib != ia {
                    out[ib].1 = Some(Ok(db.evaluation.p_accept_h0));
                }
            }
            Err(e) => {
                // evaluation errors are not per-point; surface on the first
                out[ia].1 = Some(Err(e));
                if ib != ia {
                    out[ib].1 = Some(Err(Error::invalid(
                        "evaluation failed for the paired point",
                    )));
                }
            }
        }
    }
    out.into_iter()
        .map(|(t, r)| (t, r.expect("every point resolved")))
        .collect()
}

/// Which evaluator backs a [`TestProfile`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalMethod {
    Exact,
    Grid,
    Mc { seed: u64, trials: u64 },
}

/// Monte Carlo standard errors for the headline profile quantities.
#[derive(Debug, Clone, Copy)]
pub struct ProfileStdErr {
    pub alpha: f64,
    pub beta: f64,
    pub asc0: f64,
    pub asc1: f64,
}

/// Operating profile of a plan under a cost model: error rates, expected
/// sampling costs under both hypotheses and their gamma-mixture, expected
/// group and observation counts, and an optional OC curve.
#[derive(Debug, Clone)]
pub struct TestProfile {
    pub alpha: f64,
    pub beta: f64,
    pub asc0: f64,
    pub asc1: f64,
    pub asc_gamma: f64,
    pub exp_groups0: f64,
    pub exp_groups1: f64,
    pub exp_obs0: f64,
    pub exp_obs1: f64,
    pub oc: Vec<(f64, f64)>,
    pub method: EvalMethod,
    pub stderr: Option<ProfileStdErr>,
}

/// Evaluates the plan under both hypotheses with the chosen method, plus an
/// exact OC curve at `oc_thetas` (empty slice for none).
pub fn profile(
    plan: &Plan,
    cost: &CostModel,
    method: EvalMethod,
    oc_thetas: &[f64],
) -> Result<TestProfile> {
    let hyp = plan.config().hypotheses();
    let (theta0, theta1) = (hyp.theta0(), hyp.theta1());
    let (e0, e1, stderr) = match method {
        EvalMethod::Exact => {
            let [d0, d1] = evaluate_exact_pair(plan, [theta0, theta1], cost, 0.0)?;
            (d0.evaluation, d1.evaluation, None)
        }
        EvalMethod::Grid => (
            evaluate_grid(plan, theta0, cost)?,
            evaluate_grid(plan, theta1, cost)?,
            None,
        ),
        EvalMethod::Mc { seed, trials } => {
            let (e0, se0) = simulate(plan, theta0, cost, trials, seed)?;
            let (e1, se1) = simulate(plan, theta1, cost, trials, seed.wrapping_add(1))?;
            (
                e0,
                e1,
                Some(ProfileStdErr {
                    alpha: se0.p_accept_h0,
                    beta: se1.p_accept_h0,
                    asc0: se0.exp_cost,
                    asc1: se1.exp_cost,
                }),
            )
        }
    };
    let mut oc = Vec::with_capacity(oc_thetas.len());
    for (t, r) in oc_curve(plan, oc_thetas) {
        oc.push((t, r?));
    }
    let gamma = plan.config().gamma();
    Ok(TestProfile {
        alpha: 1.0 - e0.p_accept_h0,
        beta: e1.p_accept_h0,
        asc0: e0.exp_cost,
        asc1: e1.exp_cost,
        asc_gamma: (1.0 - gamma) * e0.exp_cost + gamma * e1.exp_cost,
        exp_groups0: e0.exp_groups,
        exp_groups1: e1.exp_groups,
        exp_obs0: e0.exp_obs,
        exp_obs1: e1.exp_obs,
        oc,
        method,
        stderr,
    })
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{niod, CostModel, DesignConfig};
    use crate::envelope::StopRiskParams;
    use crate::model::Hypotheses;
    use approx::assert_relative_eq;

    fn hyp(t0: f64, t1: f64) -> Hypotheses {
        Hypotheses::new(t0, t1).unwrap()
    }

    fn params(l0: f64, l1: f64) -> StopRiskParams {
        StopRiskParams::new(l0, l1).unwrap()
    }

    /// One mandatory observation, then stop: the simplest nontrivial plan.
    fn one_stage_plan() -> Plan {
        let cfg = DesignConfig::new(
            hyp(0.2, 0.8),
            vec![1],
            CostModel::affine(0.05, 0.0),
            0.0,
            params(1.0, 1.0),
            1,
            0.1,
        )
        .unwrap();
        niod(&cfg).unwrap()
    }

    /// A plan whose interior is actually reachable: close hypotheses, small
    /// per-observation steps, several allowance levels.
    fn reachable_plan() -> Plan {
        let cfg = DesignConfig::new(
            hyp(0.45, 0.55),
            vec![1, 2, 4],
            CostModel::affine(0.004, 0.004),
            0.5,
            params(1.0, 1.0),
            4,
            0.05,
        )
        .unwrap();
        niod(&cfg).unwrap()
    }

    #[test]
    fn one_stage_exact_rates() {
        let plan = one_stage_plan();
        let cost = CostModel::affine(0.05, 0.0);
        let e0 = evaluate_exact(&plan, 0.2, &cost).unwrap();
        let e1 = evaluate_exact(&plan, 0.8, &cost).unwrap();
        // success (z = 4) accepts H1, failure (z = 0.25) accepts H0
        assert_relative_eq!(e0.p_accept_h0, 0.8, max_relative = 1e-14);
        assert_relative_eq!(e1.p_accept_h0, 0.2, max_relative = 1e-14);
        assert_eq!(e0.exp_groups, 1.0);
        assert_eq!(e0.exp_obs, 1.0);
        assert_relative_eq!(e0.exp_cost, 0.05, max_relative = 1e-14);
    }

    #[test]
    fn one_stage_profile_alpha_beta() {
        let plan = one_stage_plan();
        let cost = CostModel::affine(0.05, 0.0);
        let p = profile(&plan, &cost, EvalMethod::Exact, &[]).unwrap();
        assert_relative_eq!(p.alpha, 0.2, max_relative = 1e-12);
        assert_relative_eq!(p.beta, 0.2, max_relative = 1e-12);
        assert_relative_eq!(p.asc_gamma, p.asc0, max_relative = 1e-14); // gamma = 0
    }

    #[test]
    fn exact_mass_is_conserved() {
        let plan = reachable_plan();
        let cost = CostModel::affine(0.004, 0.004);
        for theta in [0.45, 0.55, 0.5, 0.3] {
            let d = evaluate_exact_detailed(&plan, theta, &cost, 0.0).unwrap();
            assert!(d.max_mass_defect <= 1e-10, "defect {}", d.max_mass_defect);
            assert_eq!(d.pruned_mass, 0.0);
            assert!(d.evaluation.p_accept_h0 >= 0.0 && d.evaluation.p_accept_h0 <= 1.0);
            assert!(d.evaluation.exp_groups >= 1.0);
            assert!(d.evaluation.exp_groups <= plan.k_eff() as f64 + 1e-12);
        }
    }

    /// A plan in the grid evaluator's intended regime: groups large enough
    /// that no single outcome carries much probability, so the interpolated
    /// acceptance and cost functions have only small jumps.
    fn smooth_plan() -> (Plan, CostModel) {
        let cost = CostModel::affine(0.02, 0.003);
        let cfg = DesignConfig::new(
            hyp(0.3, 0.42),
            vec![6, 9, 14, 20],
            cost.clone(),
            0.4,
            params(2.5, 1.7),
            4,
            0.05,
        )
        .unwrap();
        (niod(&cfg).unwrap(), cost)
    }

    #[test]
    fn grid_tracks_exact_within_interpolation_error() {
        let (plan, cost) = smooth_plan();
        for theta in [0.3, 0.42, 0.36] {
            let ex = evaluate_exact(&plan, theta, &cost).unwrap();
            let gr = evaluate_grid(&plan, theta, &cost).unwrap();
            assert!(
                (ex.p_accept_h0 - gr.p_accept_h0).abs() <= 1e-3,
                "p mismatch at {theta}: {} vs {}",
                ex.p_accept_h0,
                gr.p_accept_h0
            );
            assert!(
                (ex.exp_cost - gr.exp_cost).abs() <= 0.005 * ex.exp_cost.abs(),
                "cost mismatch at {theta}: {} vs {}",
                ex.exp_cost,
                gr.exp_cost
            );
            assert!(
                (ex.exp_groups - gr.exp_groups).abs() <= 0.005 * ex.exp_groups,
                "groups mismatch at {theta}: {} vs {}",
                ex.exp_groups,
                gr.exp_groups
            );
        }
    }

    #[test]
    fn grid_is_exact_when_every_reachable_state_stops_outside() {
        // after one observation of this steep problem the likelihood ratio
        // already sits outside every continuation interval, so both
        // evaluators run entirely on closed forms
        let cfg = DesignConfig::new(
            hyp(0.2, 0.8),
            vec![1, 2],
            CostModel::affine(0.0, 0.05),
            0.0,
            params(1.0, 1.0),
            2,
            0.1,
        )
        .unwrap();
        let plan = niod(&cfg).unwrap();
        let cost = CostModel::affine(0.0, 0.05);
        for theta in [0.2, 0.8, 0.5] {
            let ex = evaluate_exact(&plan, theta, &cost).unwrap();
            let gr = evaluate_grid(&plan, theta, &cost).unwrap();
            assert!((ex.p_accept_h0 - gr.p_accept_h0).abs() <= 1e-10);
            assert!((ex.exp_cost - gr.exp_cost).abs() <= 1e-10);
            assert!((ex.exp_obs - gr.exp_obs).abs() <= 1e-10);
        }
    }

    #[test]
    fn substitute_costs_count_groups_and_observations() {
        let plan = reachable_plan();
        let e = evaluate_exact(&plan, 0.5, &CostModel::affine(1.0, 0.0)).unwrap();
        assert_eq!(e.exp_cost, e.exp_groups); // c = 1 counts groups, bitwise
        let e = evaluate_exact(&plan, 0.5, &CostModel::affine(0.0, 1.0)).unwrap();
        assert_eq!(e.exp_cost, e.exp_obs); // c = m counts observations
    }

    #[test]
    fn simulate_matches_exact_within_stderr() {
        let plan = reachable_plan();
        let cost = CostModel::affine(0.004, 0.004);
        let theta = 0.5;
        let ex = evaluate_exact(&plan, theta, &cost).unwrap();
        let (mc, se) = simulate(&plan, theta, &cost, 100_000, 7).unwrap();
        assert!(
            (mc.p_accept_h0 - ex.p_accept_h0).abs() <= 4.0 * se.p_accept_h0 + 1e-12,
            "p: mc {} exact {} se {}",
            mc.p_accept_h0,
            ex.p_accept_h0,
            se.p_accept_h0
        );
        assert!((mc.exp_cost - ex.exp_cost).abs() <= 4.0 * se.exp_cost + 1e-12);
        assert!((mc.exp_groups - ex.exp_groups).abs() <= 4.0 * se.exp_groups + 1e-12);
        assert!((mc.exp_obs - ex.exp_obs).abs() <= 4.0 * se.exp_obs + 1e-12);
    }

    #[test]
    fn simulate_is_reproducible() {
        let plan = reachable_plan();
        let cost = CostModel::affine(0.004, 0.004);
        let (a, sa) = simulate(&plan, 0.5, &cost, 5_000, 42).unwrap();
        let (b, sb) = simulate(&plan, 0.5, &cost, 5_000, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa.p_accept_h0.to_bits(), sb.p_accept_h0.to_bits());
        let (c, _) = simulate(&plan, 0.5, &cost, 5_000, 43).unwrap();
        assert_ne!(a.exp_cost.to_bits(), c.exp_cost.to_bits());
    }

    #[test]
    fn oc_curve_consistency_and_monotonicity() {
        let plan = reachable_plan();
        let cost = CostModel::affine(1.0, 0.0);
        let thetas = [0.35, 0.45, 0.5, 0.55, 0.65];
        let oc = oc_curve(&plan, &thetas);
        assert_eq!(oc.len(), thetas.len());
        let ps: Vec<f64> = oc.iter().map(|(_, r)| *r.as_ref().unwrap()).collect();
        // theta1 > theta0: more successes push toward H1, so P(accept H0)
        // falls as theta rises
        for w in ps.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        // consistency with the profile's error rates
        let p = profile(&plan, &cost, EvalMethod::Exact, &[]).unwrap();
        let e0 = evaluate_exact(&plan, 0.45, &cost).unwrap();
        assert_relative_eq!(1.0 - p.alpha, e0.p_accept_h0, max_relative = 1e-12);
        assert_relative_eq!(ps[1], e0.p_accept_h0, max_relative = 1e-12);
    }

    #[test]
    fn oc_curve_reports_per_point_errors() {
        let plan = one_stage_plan();
        let oc = oc_curve(&plan, &[0.3, 1.5, 0.7]);
        assert!(oc[0].1.is_ok());
        assert!(oc[1].1.is_err());
        assert!(oc[2].1.is_ok());
    }

    #[test]
    fn evaluation_input_validation() {
        let plan = one_stage_plan();
        let cost = CostModel::affine(0.05, 0.0);
        assert!(evaluate_exact(&plan, 0.0, &cost).is_err());
        assert!(evaluate_exact(&plan, 1.0, &cost).is_err());
        assert!(evaluate_exact_detailed(&plan, 0.5, &cost, -0.1).is_err());
        assert!(simulate(&plan, 0.5, &cost, 1, 0).is_err());
        // a cost table missing a menu size is rejected up front
        let bad = CostModel::table([(99u32, 1.0)]);
        assert!(evaluate_exact(&plan, 0.5, &bad).is_err());
        // nonpositive substitute costs are rejected
        let bad = CostModel::affine(0.0, 0.0);
        assert!(evaluate_exact(&plan, 0.5, &bad).is_err());
    }

    #[test]
    fn mc_profile_carries_stderr() {
        let plan = reachable_plan();
        let cost = CostModel::affine(0.004, 0.004);
        let p = profile(
            &plan,
            &cost,
            EvalMethod::Mc {
                seed: 5,
                trials: 20_000,
            },
            &[],
        )
        .unwrap();
        let se = p.stderr.expect("MC profiles carry standard errors");
        assert!(se.alpha > 0.0 && se.beta > 0.0);
        let exact = profile(&plan, &cost, EvalMethod::Exact, &[]).unwrap();
        assert!((p.alpha - exact.alpha).abs() <= 4.0 * se.alpha + 1e-12);
        assert!((p.beta - exact.beta).abs() <= 4.0 * se.beta + 1e-12);
        assert!(exact.stderr.is_none());
    }
}
