//! Cost-optimal truncated sequentially planned tests for Bernoulli data.
//!
//! A sequentially planned probability ratio test observes Bernoulli trials in
//! groups. After each group the experimenter either stops and accepts one of
//! two simple hypotheses about the success probability, or chooses the size of
//! the next group from a finite menu. This crate designs such tests by
//! backward induction on the likelihood ratio, evaluates their exact operating
//! characteristics, calibrates the designs to hit prescribed error rates, and
//! compares them against the classical fixed-sample-size test.
//!
//! The main entry points are:
//!
//! * [`design::niod`], which turns a [`design::DesignConfig`] into a frozen
//!   [`design::Plan`] (continuation intervals, value envelopes, first group
//!   size) by numerical iteration over observation-cost dynamics;
//! * [`evaluate::evaluate_exact`], [`evaluate::evaluate_grid`] and
//!   [`evaluate::simulate`], three independent evaluators of a frozen plan;
//! * [`calibrate::calibrate`], a Nelder-Mead search over the two stopping-risk
//!   multipliers that drives achieved error rates to targets;
//! * [`fss::np_min_sample_size`], the fixed-sample-size benchmark.

pub mod calibrate;
pub mod design;
pub mod envelope;
pub mod error;
pub mod evaluate;
pub mod fss;
pub mod model;

mod util;

pub use calibrate::{
    calibrate, calibration_objective, CalibrationOutcome, CalibrationSpec, TraceEntry,
};
pub use design::{
    apply_cost_operator, continuation_value, decide, find_continuation_interval, niod,
    sampling_rule, weighted_cost_factor, CostModel, Decision, DesignConfig, EarlyExitInfo, Plan,
};
pub use envelope::{build_log_grid, stop_risk, Envelope, StopRiskParams};
pub use error::{Error, Result};
pub use evaluate::{
    evaluate_exact, evaluate_exact_detailed, evaluate_grid, oc_curve, profile, simulate,
    EvalMethod, Evaluation, ExactDetail, ProfileStdErr, StdErrors, TestProfile,
};
pub use fss::{affine_total_cost, np_min_sample_size, relative_efficiency, FixedSampleSize};
pub use model::{group_distribution, log_lr_factor, lr_factor, GroupOutcomeDistribution, Hypotheses};
