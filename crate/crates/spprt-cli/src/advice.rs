//! Stateless interim advice: replay an observation history against the
//! plan's own prescriptions, then report the next group size or the final
//! decision. Positions are built from the integer counts in log space so
//! the advice agrees bit for bit with the evaluators' transitions.

use serde::Serialize;
use spprt_core::{decide, Plan};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HistoryStep {
    pub size: u32,
    pub successes: u32,
}

/// Parses "size:successes[,size:successes...]"; empty input is an empty
/// history.
pub fn parse_history(text: &str) -> CliResult<Vec<HistoryStep>> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    let mut steps = Vec::new();
    for (i, token) in text.split(',').enumerate() {
        let token = token.trim();
        let parsed = token.split_once(':').and_then(|(m, s)| {
            Some(HistoryStep {
                size: m.trim().parse().ok()?,
                successes: s.trim().parse().ok()?,
            })
        });
        let step = parsed.ok_or_else(|| {
            CliError::Config(format!(
                "history step {}: expected SIZE:SUCCESSES, got {token:?}",
                i + 1
            ))
        })?;
        if step.successes > step.size {
            return Err(CliError::Config(format!(
                "history step {}: {} successes exceed group size {}",
                i + 1,
                step.successes,
                step.size
            )));
        }
        steps.push(step);
    }
    Ok(steps)
}

#[derive(Debug, Serialize, PartialEq)]
pub enum Advice {
    #[serde(rename = "nextGroupSize")]
    NextGroupSize(u32),
    #[serde(rename = "decision")]
    Decision(&'static str),
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AdviceReport {
    pub groups_taken: u32,
    pub successes: u64,
    pub failures: u64,
    pub log_likelihood_ratio: f64,
    pub likelihood_ratio: f64,
    pub allowance: u32,
    #[serde(flatten)]
    pub advice: Advice,
}

/// Validates that each recorded group matches what the plan would have
/// prescribed at that point, then advises on the resulting state.
pub fn advise(plan: &Plan, history: &[HistoryStep]) -> CliResult<AdviceReport> {
    let hyp = *plan.config().hypotheses();
    let k_eff = plan.k_eff();
    let (mut s, mut f) = (0u64, 0u64);

    for (i, step) in history.iter().enumerate() {
        let u = hyp.log_lr(s, f);
        let prescribed = if i == 0 {
            plan.m1()
        } else if (i as u32) < k_eff {
            plan.rule_log(k_eff - i as u32, u)
        } else {
            0
        };
        if prescribed == 0 {
            return Err(CliError::Config(format!(
                "history step {}: the plan stops and decides here, but the \
                 history continues with a group of size {}",
                i + 1,
                step.size
            )));
        }
        if step.size != prescribed {
            return Err(CliError::Config(format!(
                "history step {}: group size {} diverges from the plan, which \
                 prescribes {prescribed}",
                i + 1,
                step.size
            )));
        }
        s += u64::from(step.successes);
        f += u64::from(step.size - step.successes);
    }

    let taken = history.len() as u32;
    let u = hyp.log_lr(s, f);
    let allowance = k_eff.saturating_sub(taken);
    let next = if taken == 0 {
        plan.m1()
    } else if allowance > 0 {
        plan.rule_log(allowance, u)
    } else {
        0
    };
    let advice = if next > 0 {
        Advice::NextGroupSize(next)
    } else {
        // decisions exponentiate the shared log position and compare in z
        let verdict = decide(plan, u.exp())?;
        Advice::Decision(if verdict.accepts_h1() {
            "acceptH1"
        } else {
            "acceptH0"
        })
    };
    Ok(AdviceReport {
        groups_taken: taken,
        successes: s,
        failures: f,
        log_likelihood_ratio: u,
        likelihood_ratio: u.exp(),
        allowance,
        advice,
    })
}
