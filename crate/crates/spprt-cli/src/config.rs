//! JSON document schemas for design and calibration inputs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use spprt_core::{CalibrationSpec, CostModel, DesignConfig, Hypotheses, StopRiskParams};

use crate::error::{CliError, CliResult};

/// Design configuration document. Tolerances are optional and default to
/// the library's values.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DesignDoc {
    pub theta0: f64,
    pub theta1: f64,
    pub group_sizes: GroupSizesSpec,
    pub cost: CostSpec,
    pub gamma: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub k: u32,
    pub grid_step: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bisect_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bracket_cap: Option<f64>,
}

/// Group-size menu: an explicit list or an arithmetic range.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroupSizesSpec {
    List(Vec<u32>),
    Range { min: u32, max: u32, step: u32 },
}

/// Cost model: affine in the group size, or an explicit per-size table
/// (keys are strings because JSON object keys are).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CostSpec {
    Affine { c0: f64, cu: f64 },
    Table { table: BTreeMap<String, f64> },
}

impl GroupSizesSpec {
    pub fn expand(&self) -> CliResult<Vec<u32>> {
        match self {
            GroupSizesSpec::List(v) => Ok(v.clone()),
            GroupSizesSpec::Range { min, max, step } => {
                if *step == 0 {
                    return Err(CliError::Config(
                        "groupSizes.step must be at least 1".into(),
                    ));
                }
                if min > max {
                    return Err(CliError::Config(format!(
                        "groupSizes range is empty: min = {min}, max = {max}"
                    )));
                }
                Ok((*min..=*max).step_by(*step as usize).collect())
            }
        }
    }
}

impl CostSpec {
    pub fn to_model(&self) -> CliResult<CostModel> {
        match self {
            CostSpec::Affine { c0, cu } => Ok(CostModel::affine(*c0, *cu)),
            CostSpec::Table { table } => {
                let mut entries = Vec::with_capacity(table.len());
                for (key, &value) in table {
                    let m: u32 = key.parse().map_err(|_| {
                        CliError::Config(format!(
                            "cost.table key {key:?} is not a group size"
                        ))
                    })?;
                    entries.push((m, value));
                }
                Ok(CostModel::table(entries))
            }
        }
    }

    pub fn from_model(cost: &CostModel) -> Self {
        match cost {
            CostModel::Affine { c0, cu } => CostSpec::Affine { c0: *c0, cu: *cu },
            CostModel::Table(t) => CostSpec::Table {
                table: t.iter().map(|(m, c)| (m.to_string(), *c)).collect(),
            },
        }
    }
}

impl DesignDoc {
    pub fn to_config(&self) -> CliResult<DesignConfig> {
        let hyp = Hypotheses::new(self.theta0, self.theta1).map_err(CliError::config)?;
        let sizes = self.group_sizes.expand()?;
        let cost = self.cost.to_model()?;
        let params =
            StopRiskParams::new(self.lambda0, self.lambda1).map_err(CliError::config)?;
        let config = DesignConfig::new(
            hyp,
            sizes,
            cost,
            self.gamma,
            params,
            self.k,
            self.grid_step,
        )
        .map_err(CliError::config)?;
        let bisect = self.bisect_tol.unwrap_or(config.bisect_tol());
        let bracket = self.bracket_cap.unwrap_or(config.bracket_cap());
        config
            .with_tolerances(bisect, bracket)
            .map_err(CliError::config)
    }
}

/// Calibration input: a base design (its lambdas are the starting point)
/// plus targets and optional search controls.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CalibrateDoc {
    pub design: DesignDoc,
    pub target_alpha: f64,
    pub target_beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simplex_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restart_on_failure: Option<bool>,
}

impl CalibrateDoc {
    pub fn to_spec(&self) -> CliResult<CalibrationSpec> {
        let base = self.design.to_config()?;
        let mut spec = CalibrationSpec::new(
            base,
            self.target_alpha,
            self.target_beta,
            self.design.lambda0,
            self.design.lambda1,
        )
        .map_err(CliError::config)?;
        if let Some(v) = self.max_iter {
            spec.max_iter = v;
        }
        if let Some(v) = self.dist_tol {
            spec.dist_tol = v;
        }
        if let Some(v) = self.simplex_scale {
            spec.simplex_scale = v;
        }
        if let Some(v) = self.restart_on_failure {
            spec.restart_on_failure = v;
        }
        Ok(spec)
    }
}

/// Reads and parses a JSON document; parse errors name the offending field.
pub fn load_doc<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
