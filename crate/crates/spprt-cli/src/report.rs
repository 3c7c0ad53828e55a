//! Output plumbing: atomic writes, JSON reports, CSV plot data. Floats are
//! printed in shortest round-trip form everywhere, so identical inputs
//! yield byte-identical artifacts.

use std::path::Path;

use serde::Serialize;
use spprt_core::{sampling_rule, EvalMethod, Plan, ProfileStdErr, TestProfile, TraceEntry};

use crate::config::CostSpec;
use crate::error::{CliError, CliResult};
use crate::plan_file::ConfigEcho;

/// Writes via a temporary file in the target directory plus rename, so a
/// crash never leaves a half-written artifact behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    use std::io::Write;
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = tempfile::Builder::new()
        .prefix(".tmp-")
        .tempfile_in(dir.unwrap_or_else(|| Path::new(".")))
        .map_err(|e| CliError::Runtime(format!("cannot create temp file: {e}")))?;
    tmp.write_all(bytes)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    tmp.persist(path)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Runtime(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Writes an RFC-4180-style CSV with a header row.
pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| CliError::Runtime(format!("cannot write {}: {e}", path.display()));
    w.write_record(header).map_err(io_err)?;
    for row in rows {
        w.write_record(&row).map_err(io_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    write_atomic(path, &bytes)
}

/// Shortest decimal text that reparses to the same f64.
pub fn fmt(v: f64) -> String {
    format!("{v}")
}

// ---------------------------------------------------------------------------
// plot data

/// Continuation intervals, one row per allowance level, indexed both ways.
pub fn write_intervals_csv(path: &Path, plan: &Plan) -> CliResult<()> {
    let k_eff = plan.k_eff();
    let rows = (1..k_eff).rev().map(|allowance| {
        let env = plan.envelope(allowance).expect("allowance below kEff");
        let (a, b) = env.interval().expect("designed levels carry intervals");
        vec![
            allowance.to_string(),
            (k_eff - allowance).to_string(),
            fmt(a),
            fmt(b),
        ]
    });
    write_csv(path, &["allowance", "stage", "a", "b"], rows)
}

/// The outermost sampling rule sampled on its own grid: the group size the
/// plan prescribes at each node of the first decision level.
pub fn write_rule_csv(path: &Path, plan: &Plan) -> CliResult<()> {
    let mut rows = Vec::new();
    if plan.k_eff() > 1 {
        let top = plan.k_eff() - 1;
        let env = plan.envelope(top).expect("top level below kEff");
        for &z in env.nodes() {
            let m = sampling_rule(plan, top, z).expect("nodes are valid ratios");
            rows.push(vec![fmt(z), m.to_string()]);
        }
    }
    write_csv(path, &["z", "m"], rows)
}

pub fn write_oc_csv(path: &Path, points: &[(f64, f64)]) -> CliResult<()> {
    let rows = points.iter().map(|&(t, p)| vec![fmt(t), fmt(p)]);
    write_csv(path, &["theta", "pAcceptH0"], rows)
}

pub fn write_trace_csv(path: &Path, trace: &[TraceEntry]) -> CliResult<()> {
    let rows = trace.iter().map(|e| {
        vec![
            e.evaluation.to_string(),
            fmt(e.lambda0),
            fmt(e.lambda1),
            fmt(e.objective),
            fmt(e.alpha),
            fmt(e.beta),
        ]
    });
    write_csv(
        path,
        &["evaluation", "lambda0", "lambda1", "objective", "alpha", "beta"],
        rows,
    )
}

// ---------------------------------------------------------------------------
// structured reports

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MethodEcho {
    pub name: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
}

impl MethodEcho {
    pub fn from_method(method: &EvalMethod) -> Self {
        match method {
            EvalMethod::Exact => MethodEcho {
                name: "exact",
                seed: None,
                trials: None,
            },
            EvalMethod::Grid => MethodEcho {
                name: "grid",
                seed: None,
                trials: None,
            },
            EvalMethod::Mc { seed, trials } => MethodEcho {
                name: "mc",
                seed: Some(*seed),
                trials: Some(*trials),
            },
        }
    }
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StdErrEcho {
    pub alpha: f64,
    pub beta: f64,
    pub asc0: f64,
    pub asc1: f64,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct OcPoint {
    pub theta: f64,
    pub p_accept_h0: f64,
}

/// The full operating-characteristic report: headline quantities, the OC
/// curve, the evaluation method, and the provenance echo.
#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ProfileReport {
    pub method: MethodEcho,
    pub alpha: f64,
    pub beta: f64,
    pub asc0: f64,
    pub asc1: f64,
    pub asc_gamma: f64,
    pub exp_groups0: f64,
    pub exp_groups1: f64,
    pub exp_obs0: f64,
    pub exp_obs1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_err: Option<StdErrEcho>,
    pub oc: Vec<OcPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost_override: Option<CostSpec>,
    pub config_echo: ConfigEcho,
}

impl ProfileReport {
    pub fn new(plan: &Plan, profile: &TestProfile, cost_override: Option<&CostSpec>) -> Self {
        let se = |s: &ProfileStdErr| StdErrEcho {
            alpha: s.alpha,
            beta: s.beta,
            asc0: s.asc0,
            asc1: s.asc1,
        };
        ProfileReport {
            method: MethodEcho::from_method(&profile.method),
            alpha: profile.alpha,
            beta: profile.beta,
            asc0: profile.asc0,
            asc1: profile.asc1,
            asc_gamma: profile.asc_gamma,
            exp_groups0: profile.exp_groups0,
            exp_groups1: profile.exp_groups1,
            exp_obs0: profile.exp_obs0,
            exp_obs1: profile.exp_obs1,
            std_err: profile.stderr.as_ref().map(se),
            oc: profile
                .oc
                .iter()
                .map(|&(theta, p_accept_h0)| OcPoint {
                    theta,
                    p_accept_h0,
                })
                .collect(),
            cost_override: cost_override.cloned(),
            config_echo: ConfigEcho::from_config(plan.config()),
        }
    }

    /// The same headline numbers as metric,value rows.
    pub fn write_flat_csv(&self, path: &Path) -> CliResult<()> {
        let mut rows = vec![
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("asc0", self.asc0),
            ("asc1", self.asc1),
            ("ascGamma", self.asc_gamma),
            ("expGroups0", self.exp_groups0),
            ("expGroups1", self.exp_groups1),
            ("expObs0", self.exp_obs0),
            ("expObs1", self.exp_obs1),
        ];
        if let Some(se) = &self.std_err {
            rows.push(("alphaStdErr", se.alpha));
            rows.push(("betaStdErr", se.beta));
            rows.push(("asc0StdErr", se.asc0));
            rows.push(("asc1StdErr", se.asc1));
        }
        write_csv(
            path,
            &["metric", "value"],
            rows.into_iter().map(|(k, v)| vec![k.to_string(), fmt(v)]),
        )
    }
}
