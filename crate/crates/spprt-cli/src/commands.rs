//! Subcommand implementations. Each command reads its inputs, runs the
//! library, writes its artifacts under the output directory, and prints a
//! short human summary to stdout; nothing depends on ambient state.

use std::path::Path;

use serde::Serialize;
use spprt_core::{
    affine_total_cost, calibrate, niod, np_min_sample_size, oc_curve, profile,
    relative_efficiency, simulate, CalibrationOutcome, CostModel, Error as CoreError,
    EvalMethod, Plan,
};

use crate::advice;
use crate::config::{load_doc, CalibrateDoc, CostSpec, DesignDoc};
use crate::error::{CliError, CliResult};
use crate::plan_file::{self, ConfigEcho};
use crate::report::{self, fmt, ProfileReport};

// ---------------------------------------------------------------------------
// shared plumbing

fn ensure_out_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

/// Both override flags or neither; a single one is ambiguous.
pub fn cost_override(c0: Option<f64>, cu: Option<f64>) -> CliResult<Option<CostModel>> {
    match (c0, cu) {
        (None, None) => Ok(None),
        (Some(c0), Some(cu)) => Ok(Some(CostModel::affine(c0, cu))),
        _ => Err(CliError::Config(
            "cost override needs both --cost-c0 and --cost-cu".into(),
        )),
    }
}

fn effective_cost(plan: &Plan, over: &Option<CostModel>) -> CostModel {
    over.clone().unwrap_or_else(|| plan.config().cost().clone())
}

fn validate_thetas(thetas: &[f64]) -> CliResult<()> {
    for &t in thetas {
        if !t.is_finite() || t <= 0.0 || t >= 1.0 {
            return Err(CliError::Config(format!(
                "theta must lie strictly between 0 and 1, got {t}"
            )));
        }
    }
    Ok(())
}

fn print_plan_summary(plan: &Plan) {
    println!(
        "plan: K_eff = {}, m1 = {}, z* = {}",
        plan.k_eff(),
        plan.m1(),
        fmt(plan.z_star())
    );
    if let Some(e) = plan.early_exit() {
        println!(
            "early exit: continuation region empty at allowance {} (single-stage test)",
            e.level
        );
    }
    if plan.k_eff() > 1 {
        println!("continuation intervals (stage: allowance [a, b]):");
        for allowance in (1..plan.k_eff()).rev() {
            let env = plan.envelope(allowance).expect("allowance below kEff");
            let (a, b) = env.interval().expect("designed levels carry intervals");
            println!(
                "  stage {:>2}: allowance {:>2} [{}, {}]",
                plan.k_eff() - allowance,
                allowance,
                fmt(a),
                fmt(b)
            );
        }
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SummaryInterval {
    allowance: u32,
    stage: u32,
    a: f64,
    b: f64,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct DesignSummary {
    k_eff: u32,
    m1: u32,
    z_star: f64,
    early_exit: bool,
    intervals: Vec<SummaryInterval>,
    config_echo: ConfigEcho,
}

impl DesignSummary {
    fn new(plan: &Plan) -> Self {
        let k_eff = plan.k_eff();
        DesignSummary {
            k_eff,
            m1: plan.m1(),
            z_star: plan.z_star(),
            early_exit: plan.early_exit().is_some(),
            intervals: (1..k_eff)
                .rev()
                .map(|allowance| {
                    let env = plan.envelope(allowance).expect("allowance below kEff");
                    let (a, b) = env.interval().expect("designed levels carry intervals");
                    SummaryInterval {
                        allowance,
                        stage: k_eff - allowance,
                        a,
                        b,
                    }
                })
                .collect(),
            config_echo: ConfigEcho::from_config(plan.config()),
        }
    }
}

/// Writes the plan-derived artifacts shared by design and export-plan.
fn write_plan_artifacts(plan: &Plan, out: &Path) -> CliResult<()> {
    report::write_json(&out.join("summary.json"), &DesignSummary::new(plan))?;
    report::write_intervals_csv(&out.join("intervals.csv"), plan)?;
    report::write_rule_csv(&out.join("sampling_rule.csv"), plan)
}

// ---------------------------------------------------------------------------
// commands

pub fn design(config_path: &Path, out: &Path) -> CliResult<()> {
    let doc: DesignDoc = load_doc(config_path)?;
    let config = doc.to_config()?;
    ensure_out_dir(out)?;
    let plan = niod(&config)?;
    plan_file::save(&out.join("plan.json"), &plan)?;
    write_plan_artifacts(&plan, out)?;
    print_plan_summary(&plan);
    println!("wrote plan.json, summary.json, intervals.csv, sampling_rule.csv");
    Ok(())
}

pub fn export_plan(plan_path: &Path, out: &Path) -> CliResult<()> {
    let plan = plan_file::load(plan_path)?;
    ensure_out_dir(out)?;
    write_plan_artifacts(&plan, out)?;
    print_plan_summary(&plan);
    println!("wrote summary.json, intervals.csv, sampling_rule.csv");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    plan_path: &Path,
    thetas: &[f64],
    method_name: &str,
    seed: Option<u64>,
    trials: Option<u64>,
    c0: Option<f64>,
    cu: Option<f64>,
    out: &Path,
) -> CliResult<()> {
    let plan = plan_file::load(plan_path)?;
    let over = cost_override(c0, cu)?;
    let cost = effective_cost(&plan, &over);
    validate_thetas(thetas)?;
    let method = match method_name {
        "exact" => EvalMethod::Exact,
        "grid" => EvalMethod::Grid,
        "mc" => EvalMethod::Mc {
            seed: seed.ok_or_else(|| {
                CliError::Config("method mc requires an explicit --seed".into())
            })?,
            trials: trials.unwrap_or(100_000),
        },
        other => {
            return Err(CliError::Config(format!(
                "unknown method {other:?}: expected exact, grid, or mc"
            )))
        }
    };
    ensure_out_dir(out)?;
    let prof = profile(&plan, &cost, method, thetas)?;
    let rep = ProfileReport::new(&plan, &prof, over.as_ref().map(CostSpec::from_model).as_ref());
    report::write_json(&out.join("report.json"), &rep)?;
    rep.write_flat_csv(&out.join("report.csv"))?;
    if !prof.oc.is_empty() {
        report::write_oc_csv(&out.join("oc.csv"), &prof.oc)?;
    }
    println!(
        "alpha = {}, beta = {}",
        fmt(prof.alpha),
        fmt(prof.beta)
    );
    println!(
        "asc0 = {}, asc1 = {}, ascGamma = {}",
        fmt(prof.asc0),
        fmt(prof.asc1),
        fmt(prof.asc_gamma)
    );
    println!(
        "expGroups = ({}, {}), expObs = ({}, {})",
        fmt(prof.exp_groups0),
        fmt(prof.exp_groups1),
        fmt(prof.exp_obs0),
        fmt(prof.exp_obs1)
    );
    println!("wrote report.json, report.csv{}", if prof.oc.is_empty() { "" } else { ", oc.csv" });
    Ok(())
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct CalibrationReport {
    status: &'static str,
    lambda0: f64,
    lambda1: f64,
    objective: f64,
    alpha: f64,
    beta: f64,
    iterations: u32,
    restarted: bool,
    evaluations: usize,
}

fn write_calibration_artifacts(
    outcome: &CalibrationOutcome,
    status: &'static str,
    out: &Path,
) -> CliResult<()> {
    plan_file::save(&out.join("plan.json"), &outcome.plan)?;
    let rep = ProfileReport::new(&outcome.plan, &outcome.profile, None);
    report::write_json(&out.join("profile.json"), &rep)?;
    report::write_trace_csv(&out.join("trace.csv"), &outcome.trace)?;
    report::write_json(
        &out.join("calibration.json"),
        &CalibrationReport {
            status,
            lambda0: outcome.lambda0,
            lambda1: outcome.lambda1,
            objective: outcome.objective,
            alpha: outcome.alpha,
            beta: outcome.beta,
            iterations: outcome.iterations,
            restarted: outcome.restarted,
            evaluations: outcome.trace.len(),
        },
    )
}

pub fn run_calibrate(spec_path: &Path, out: &Path) -> CliResult<()> {
    let doc: CalibrateDoc = load_doc(spec_path)?;
    let spec = doc.to_spec()?;
    ensure_out_dir(out)?;
    match calibrate(&spec) {
        Ok(outcome) => {
            // search success still distinguishes hitting the tolerance from
            // merely landing within the acceptable band around it
            let status = if outcome.objective <= spec.dist_tol {
                "converged"
            } else {
                "acceptable"
            };
            write_calibration_artifacts(&outcome, status, out)?;
            println!(
                "calibration {status}: lambda0 = {}, lambda1 = {}, objective = {}",
                fmt(outcome.lambda0),
                fmt(outcome.lambda1),
                fmt(outcome.objective)
            );
            println!(
                "achieved alpha = {}, beta = {} in {} iterations{}",
                fmt(outcome.alpha),
                fmt(outcome.beta),
                outcome.iterations,
                if outcome.restarted { " (restarted)" } else { "" }
            );
            println!("wrote plan.json, profile.json, calibration.json, trace.csv");
            Ok(())
        }
        // budget exhausted: persist the best point found, then fail
        Err(CoreError::CalibrationFailed { best, .. }) => {
            write_calibration_artifacts(&best, "failed", out)?;
            println!("calibration failed; best point written to calibration.json");
            Err(CliError::Calibration(format!(
                "calibration failed: objective {} after {} iterations \
                 (best lambda0 = {}, lambda1 = {})",
                fmt(best.objective),
                best.iterations,
                fmt(best.lambda0),
                fmt(best.lambda1)
            )))
        }
        Err(other) => Err(other.into()),
    }
}

pub fn oc(
    plan_path: &Path,
    thetas: &[f64],
    range: Option<(f64, f64, u32)>,
    out: &Path,
) -> CliResult<()> {
    let plan = plan_file::load(plan_path)?;
    let mut points: Vec<f64> = thetas.to_vec();
    if let Some((min, max, count)) = range {
        if count < 2 || !(min < max) {
            return Err(CliError::Config(format!(
                "theta range needs min < max and at least 2 points, got \
                 [{min}, {max}] with {count}"
            )));
        }
        let step = (max - min) / f64::from(count - 1);
        points.extend((0..count).map(|i| min + f64::from(i) * step));
    }
    if points.is_empty() {
        return Err(CliError::Config(
            "no evaluation points: pass --theta or a --theta-min/--theta-max range".into(),
        ));
    }
    validate_thetas(&points)?;
    ensure_out_dir(out)?;
    let mut curve = Vec::with_capacity(points.len());
    for (t, r) in oc_curve(&plan, &points) {
        curve.push((t, r?));
    }
    report::write_oc_csv(&out.join("oc.csv"), &curve)?;
    println!("wrote oc.csv ({} points)", curve.len());
    Ok(())
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SimulationReport {
    theta: f64,
    trials: u64,
    seed: u64,
    p_accept_h0: f64,
    exp_cost: f64,
    exp_groups: f64,
    exp_obs: f64,
    p_accept_h0_std_err: f64,
    exp_cost_std_err: f64,
    exp_groups_std_err: f64,
    exp_obs_std_err: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    cost_override: Option<CostSpec>,
    config_echo: ConfigEcho,
}

#[allow(clippy::too_many_arguments)]
pub fn run_simulate(
    plan_path: &Path,
    theta: f64,
    trials: u64,
    seed: u64,
    c0: Option<f64>,
    cu: Option<f64>,
    out: &Path,
) -> CliResult<()> {
    let plan = plan_file::load(plan_path)?;
    let over = cost_override(c0, cu)?;
    let cost = effective_cost(&plan, &over);
    ensure_out_dir(out)?;
    let (mean, se) = simulate(&plan, theta, &cost, trials, seed)?;
    let rep = SimulationReport {
        theta,
        trials,
        seed,
        p_accept_h0: mean.p_accept_h0,
        exp_cost: mean.exp_cost,
        exp_groups: mean.exp_groups,
        exp_obs: mean.exp_obs,
        p_accept_h0_std_err: se.p_accept_h0,
        exp_cost_std_err: se.exp_cost,
        exp_groups_std_err: se.exp_groups,
        exp_obs_std_err: se.exp_obs,
        cost_override: over.as_ref().map(CostSpec::from_model),
        config_echo: ConfigEcho::from_config(plan.config()),
    };
    report::write_json(&out.join("simulate.json"), &rep)?;
    println!(
        "pAcceptH0 = {} (se {}), expCost = {} (se {})",
        fmt(mean.p_accept_h0),
        fmt(se.p_accept_h0),
        fmt(mean.exp_cost),
        fmt(se.exp_cost)
    );
    println!("wrote simulate.json");
    Ok(())
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct FssReport {
    target_alpha: f64,
    target_beta: f64,
    n: u64,
    threshold: u64,
    achieved_alpha: f64,
    achieved_beta: f64,
    asc_fss: f64,
    asc0: f64,
    asc1: f64,
    r0: f64,
    r1: f64,
    config_echo: ConfigEcho,
}

#[allow(clippy::too_many_arguments)]
pub fn compare_fss(
    plan_path: &Path,
    alpha: Option<f64>,
    beta: Option<f64>,
    n_cap: u64,
    sweep: Option<(f64, f64, u32)>,
    c0: Option<f64>,
    cu: Option<f64>,
    out: &Path,
) -> CliResult<()> {
    let plan = plan_file::load(plan_path)?;
    let over = cost_override(c0, cu)?;
    let cost = effective_cost(&plan, &over);
    let hyp = *plan.config().hypotheses();
    ensure_out_dir(out)?;

    if let Some((lo, hi, n_points)) = sweep {
        if !(lo > 0.0) || !(hi > lo) || n_points < 2 {
            return Err(CliError::Config(format!(
                "lambda sweep needs 0 < min < max and at least 2 points per \
                 axis, got [{lo}, {hi}] with {n_points}"
            )));
        }
        let (ln_lo, ln_hi) = (lo.ln(), hi.ln());
        let step = (ln_hi - ln_lo) / f64::from(n_points - 1);
        let ticks: Vec<f64> = (0..n_points)
            .map(|i| (ln_lo + f64::from(i) * step).exp())
            .collect();
        let mut rows = Vec::with_capacity(ticks.len() * ticks.len());
        let mut min_r0 = f64::INFINITY;
        let mut max_r0 = f64::NEG_INFINITY;
        for &l0 in &ticks {
            for &l1 in &ticks {
                let config = plan.config().with_lambdas(l0, l1)?;
                let point_plan = niod(&config)?;
                let prof = profile(&point_plan, &cost, EvalMethod::Exact, &[])?;
                let fss = np_min_sample_size(&hyp, prof.alpha, prof.beta, n_cap)?;
                let (r0, r1) = relative_efficiency(&prof, &fss, &cost)?;
                let asc_fss = affine_total_cost(&cost, fss.n)?;
                min_r0 = min_r0.min(r0);
                max_r0 = max_r0.max(r0);
                rows.push(vec![
                    fmt(l0),
                    fmt(l1),
                    fmt(prof.alpha),
                    fmt(prof.beta),
                    fmt(prof.asc0),
                    fmt(prof.asc1),
                    fss.n.to_string(),
                    fmt(asc_fss),
                    fmt(r0),
                    fmt(r1),
                ]);
            }
        }
        report::write_csv(
            &out.join("fss_sweep.csv"),
            &[
                "lambda0", "lambda1", "alpha", "beta", "asc0", "asc1", "fssN", "ascFss",
                "r0", "r1",
            ],
            rows.iter().cloned(),
        )?;
        println!(
            "swept {} lambda pairs: r0 in [{}, {}]",
            rows.len(),
            fmt(min_r0),
            fmt(max_r0)
        );
        println!("wrote fss_sweep.csv");
        return Ok(());
    }

    // single mode: targets default to the plan's own achieved error rates
    let prof = profile(&plan, &cost, EvalMethod::Exact, &[])?;
    let target_alpha = alpha.unwrap_or(prof.alpha);
    let target_beta = beta.unwrap_or(prof.beta);
    let fss = np_min_sample_size(&hyp, target_alpha, target_beta, n_cap)?;
    let (r0, r1) = relative_efficiency(&prof, &fss, &cost)?;
    let asc_fss = affine_total_cost(&cost, fss.n)?;
    let rep = FssReport {
        target_alpha,
        target_beta,
        n: fss.n,
        threshold: fss.threshold,
        achieved_alpha: fss.achieved_alpha,
        achieved_beta: fss.achieved_beta,
        asc_fss,
        asc0: prof.asc0,
        asc1: prof.asc1,
        r0,
        r1,
        config_echo: ConfigEcho::from_config(plan.config()),
    };
    report::write_json(&out.join("fss.json"), &rep)?;
    println!(
        "n({}, {}) = {}, ascFss = {}",
        fmt(target_alpha),
        fmt(target_beta),
        fss.n,
        fmt(asc_fss)
    );
    println!("r0 = {}, r1 = {}", fmt(r0), fmt(r1));
    println!("wrote fss.json");
    Ok(())
}

pub fn next(plan_path: &Path, history: &str) -> CliResult<()> {
    let plan = plan_file::load(plan_path)?;
    let steps = advice::parse_history(history)?;
    let rep = advice::advise(&plan, &steps)?;
    let text = serde_json::to_string_pretty(&rep)
        .map_err(|e| CliError::Runtime(format!("cannot serialize advice: {e}")))?;
    println!("{text}");
    Ok(())
}
