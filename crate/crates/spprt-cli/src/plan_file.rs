//! Plan persistence. The file carries the full configuration echo and
//! every envelope payload as JSON numbers in shortest round-trip form, so
//! a reload reproduces each f64 bit for bit and revalidates the plan's
//! structural invariants.

use std::path::Path;

use serde::{Deserialize, Serialize};
use spprt_core::{DesignConfig, EarlyExitInfo, Envelope, Hypotheses, Plan, StopRiskParams};

use crate::config::CostSpec;
use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PlanFile {
    pub schema_version: u32,
    pub config: ConfigEcho,
    pub k_eff: u32,
    pub m1: u32,
    pub z_star: f64,
    pub early_exit: Option<EarlyExitEcho>,
    /// One entry per allowance level 1..kEff-1, ascending.
    pub levels: Vec<LevelPayload>,
}

/// Every design-configuration field, with the menu in canonical expanded
/// form.
#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ConfigEcho {
    pub theta0: f64,
    pub theta1: f64,
    pub group_sizes: Vec<u32>,
    pub cost: CostSpec,
    pub gamma: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub k: u32,
    pub grid_step: f64,
    pub bisect_tol: f64,
    pub bracket_cap: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct EarlyExitEcho {
    pub level: u32,
    pub nesting_violation: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LevelPayload {
    pub allowance: u32,
    /// Stage index counted from the mandatory first group: kEff - allowance.
    pub stage: u32,
    pub a: f64,
    pub b: f64,
    pub h: f64,
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
}

impl ConfigEcho {
    pub fn from_config(config: &DesignConfig) -> Self {
        let hyp = config.hypotheses();
        let params = config.params();
        ConfigEcho {
            theta0: hyp.theta0(),
            theta1: hyp.theta1(),
            group_sizes: config.group_sizes().to_vec(),
            cost: CostSpec::from_model(config.cost()),
            gamma: config.gamma(),
            lambda0: params.lambda0(),
            lambda1: params.lambda1(),
            k: config.k(),
            grid_step: config.grid_step(),
            bisect_tol: config.bisect_tol(),
            bracket_cap: config.bracket_cap(),
        }
    }

    pub fn to_config(&self) -> CliResult<DesignConfig> {
        let hyp = Hypotheses::new(self.theta0, self.theta1).map_err(CliError::config)?;
        let params =
            StopRiskParams::new(self.lambda0, self.lambda1).map_err(CliError::config)?;
        let cost = self.cost.to_model()?;
        DesignConfig::new(
            hyp,
            self.group_sizes.clone(),
            cost,
            self.gamma,
            params,
            self.k,
            self.grid_step,
        )
        .and_then(|c| c.with_tolerances(self.bisect_tol, self.bracket_cap))
        .map_err(CliError::config)
    }
}

pub fn from_plan(plan: &Plan) -> PlanFile {
    let k_eff = plan.k_eff();
    let levels = (1..k_eff)
        .map(|j| {
            let env = plan.envelope(j).expect("allowance below kEff");
            let (a, b) = env.interval().expect("designed levels carry intervals");
            LevelPayload {
                allowance: j,
                stage: k_eff - j,
                a,
                b,
                h: env.grid_step().expect("interior grid present"),
                nodes: env.nodes().to_vec(),
                values: env.values().to_vec(),
            }
        })
        .collect();
    PlanFile {
        schema_version: SCHEMA_VERSION,
        config: ConfigEcho::from_config(plan.config()),
        k_eff,
        m1: plan.m1(),
        z_star: plan.z_star(),
        early_exit: plan.early_exit().map(|e| EarlyExitEcho {
            level: e.level,
            nesting_violation: e.nesting_violation,
        }),
        levels,
    }
}

pub fn to_plan(file: &PlanFile) -> CliResult<Plan> {
    if file.schema_version != SCHEMA_VERSION {
        return Err(CliError::Config(format!(
            "plan file has schema version {}, this build reads {SCHEMA_VERSION}",
            file.schema_version
        )));
    }
    let config = file.config.to_config()?;
    let params = *config.params();
    if file.z_star != params.z_star() {
        return Err(CliError::Config(
            "plan file zStar disagrees with its lambda values".into(),
        ));
    }
    let mut levels = Vec::with_capacity(file.levels.len());
    for (i, level) in file.levels.iter().enumerate() {
        let expected = i as u32 + 1;
        if level.allowance != expected {
            return Err(CliError::Config(format!(
                "plan file levels out of order: position {i} holds allowance {}",
                level.allowance
            )));
        }
        let env = Envelope::from_samples(
            params,
            level.a,
            level.b,
            level.h,
            level.nodes.clone(),
            level.values.clone(),
        )
        .map_err(|e| CliError::Config(format!("plan file level {expected}: {e}")))?;
        levels.push(env);
    }
    let early_exit = file.early_exit.as_ref().map(|e| EarlyExitInfo {
        level: e.level,
        nesting_violation: e.nesting_violation,
    });
    Plan::from_parts(config, file.k_eff, file.m1, levels, early_exit)
        .map_err(|e| CliError::Config(format!("plan file rejected: {e}")))
}

pub fn save(path: &Path, plan: &Plan) -> CliResult<()> {
    crate::report::write_json(path, &from_plan(plan))
}

pub fn load(path: &Path) -> CliResult<Plan> {
    let file: PlanFile = crate::config::load_doc(path)?;
    to_plan(&file)
}
