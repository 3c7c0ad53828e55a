//! Calibration of the stop-risk multipliers to hit target error rates.
//!
//! The design machinery takes the multipliers (lambda0, lambda1) as given;
//! calibration searches for the pair whose designed plan achieves requested
//! alpha and beta. The objective is the worse of the two relative errors,
//! minimized by a Nelder-Mead simplex in (ln lambda0, ln lambda1). Log
//! coordinates keep the multipliers positive and make the search scale-free.
//!
//! Every evaluation is recorded in a trace, and the best point ever seen is
//! returned even when the search fails, boxed inside the error.

use crate::design::{niod, DesignConfig, Plan};
use crate::error::{Error, Result};
use crate::evaluate::{evaluate_exact_pair, profile, EvalMethod, TestProfile};

/// What to calibrate and how hard to try.
#[derive(Debug, Clone)]
pub struct CalibrationSpec {
    /// Design configuration whose multipliers are to be replaced.
    pub base: DesignConfig,
    pub target_alpha: f64,
    pub target_beta: f64,
    pub init_lambda0: f64,
    pub init_lambda1: f64,
    /// Simplex iterations allowed per attempt (default 200).
    pub max_iter: u32,
    /// Success when the objective drops to this level (default 0.01, i.e.
    /// both error rates within 1% relative of target).
    pub dist_tol: f64,
    /// Initial simplex edge in ln-lambda coordinates (default 0.25).
    pub simplex_scale: f64,
    /// Retry once from the best point with a halved simplex if the first
    /// attempt exhausts its iterations badly (default true).
    pub restart_on_failure: bool,
}

impl CalibrationSpec {
    pub fn new(
        base: DesignConfig,
        target_alpha: f64,
        target_beta: f64,
        init_lambda0: f64,
        init_lambda1: f64,
    ) -> Result<Self> {
        for (name, t) in [("alpha", target_alpha), ("beta", target_beta)] {
            if !t.is_finite() || t <= 0.0 || t >= 1.0 {
                return Err(Error::invalid(format!(
                    "target {name} must lie strictly between 0 and 1, got {t}"
                )));
            }
        }
        for (name, l) in [("lambda0", init_lambda0), ("lambda1", init_lambda1)] {
            if !l.is_finite() || l <= 0.0 {
                return Err(Error::invalid(format!(
                    "initial {name} must be finite and positive, got {l}"
                )));
            }
        }
        Ok(Self {
            base,
            target_alpha,
            target_beta,
            init_lambda0,
            init_lambda1,
            max_iter: 200,
            dist_tol: 0.01,
            simplex_scale: 0.25,
            restart_on_failure: true,
        })
    }
}

/// One objective evaluation in the search trace.
#[derive(Debug, Clone, Copy)]
pub struct TraceEntry {
    /// 1-based evaluation counter.
    pub evaluation: u32,
    pub lambda0: f64,
    pub lambda1: f64,
    /// Objective value; infinite when the design or evaluation failed.
    pub objective: f64,
    /// Achieved rates, NaN when the evaluation failed.
    pub alpha: f64,
    pub beta: f64,
}

/// Result of a calibration run: the best multipliers found, the plan they
/// design, its achieved rates and full profile, and the search trace.
#[derive(Debug, Clone)]
pub struct CalibrationOutcome {
    pub lambda0: f64,
    pub lambda1: f64,
    pub objective: f64,
    pub alpha: f64,
    pub beta: f64,
    pub plan: Plan,
    pub profile: TestProfile,
    pub trace: Vec<TraceEntry>,
    /// Simplex iterations used, summed over restarts.
    pub iterations: u32,
    pub restarted: bool,
}

/// Designs a plan for `config` and scores it against the targets: the worse
/// of the two relative error-rate misses. Returns (objective, alpha, beta,
/// plan).
pub fn calibration_objective(
    config: &DesignConfig,
    target_alpha: f64,
    target_beta: f64,
) -> Result<(f64, f64, f64, Plan)> {
    let plan = niod(config)?;
    let hyp = config.hypotheses();
    let [d0, d1] = evaluate_exact_pair(
        &plan,
        [hyp.theta0(), hyp.theta1()],
        config.cost(),
        0.0,
    )?;
    let alpha = 1.0 - d0.evaluation.p_accept_h0;
    let beta = d1.evaluation.p_accept_h0;
    let objective = ((alpha - target_alpha).abs() / target_alpha)
        .max((beta - target_beta).abs() / target_beta);
    Ok((objective, alpha, beta, plan))
}

struct Vertex {
    x: [f64; 2],
    f: f64,
    seq: u32,
}

struct Best {
    x: [f64; 2],
    f: f64,
    alpha: f64,
    beta: f64,
    plan: Plan,
}

struct Search<'a> {
    spec: &'a CalibrationSpec,
    trace: Vec<TraceEntry>,
    best: Option<Best>,
    last_err: Option<Error>,
    evals: u32,
    seq: u32,
}

impl<'a> Search<'a> {
    /// Objective at ln-lambda coordinates; failures score +infinity so the
    /// simplex walks away from invalid regions instead of aborting.
    fn eval(&mut self, x: [f64; 2]) -> Vertex {
        let (l0, l1) = (x[0].exp(), x[1].exp());
        self.evals += 1;
        let entry;
        let f;
        match self
            .spec
            .base
            .with_lambdas(l0, l1)
            .and_then(|cfg| {
                calibration_objective(&cfg, self.spec.target_alpha, self.spec.target_beta)
            }) {
            Ok((obj, alpha, beta, plan)) => {
                f = obj;
                entry = TraceEntry {
                    evaluation: self.evals,
                    lambda0: l0,
                    lambda1: l1,
                    objective: obj,
                    alpha,
                    beta,
                };
                let better = self.best.as_ref().map_or(true, |b| obj < b.f);
                if better {
                    self.best = Some(Best {
                        x,
                        f: obj,
                        alpha,
                        beta,
                        plan,
                    });
                }
            }
            Err(e) => {
                f = f64::INFINITY;
                entry = TraceEntry {
                    evaluation: self.evals,
                    lambda0: l0,
                    lambda1: l1,
                    objective: f64::INFINITY,
                    alpha: f64::NAN,
                    beta: f64::NAN,
                };
                self.last_err = Some(e);
            }
        }
        self.trace.push(entry);
        self.seq += 1;
        Vertex {
            x,
            f,
            seq: self.seq,
        }
    }

    /// One Nelder-Mead run from `x0` with edge `scale`. Returns iterations
    /// used; the best point accumulates in `self.best`.
    fn run(&mut self, x0: [f64; 2], scale: f64) -> u32 {
        let mut simplex = vec![
            self.eval(x0),
            self.eval([x0[0] + scale, x0[1]]),
            self.eval([x0[0], x0[1] + scale]),
        ];
        let mut iterations = 0;
        while iterations < self.spec.max_iter {
            simplex.sort_by(|a, b| a.f.total_cmp(&b.f).then(a.seq.cmp(&b.seq)));
            if simplex[0].f <= self.spec.dist_tol {
                break;
            }
            // simplex collapsed: no direction left to explore at this scale
            let diam = simplex[1..]
                .iter()
                .map(|v| {
                    (v.x[0] - simplex[0].x[0])
                        .abs()
                        .max((v.x[1] - simplex[0].x[1]).abs())
                })
                .fold(0.0f64, f64::max);
            if diam <= 1e-4 {
                break;
            }
            iterations += 1;

            let centroid = [
                0.5 * (simplex[0].x[0] + simplex[1].x[0]),
                0.5 * (simplex[0].x[1] + simplex[1].x[1]),
            ];
            let worst = simplex[2].x;
            let dir = [centroid[0] - worst[0], centroid[1] - worst[1]];
            let reflect = [centroid[0] + dir[0], centroid[1] + dir[1]];
            let vr = self.eval(reflect);

            if vr.f < simplex[0].f {
                let expand = [centroid[0] + 2.0 * dir[0], centroid[1] + 2.0 * dir[1]];
                let ve = self.eval(expand);
                simplex[2] = if ve.f < vr.f { ve } else { vr };
            } else if vr.f < simplex[1].f {
                simplex[2] = vr;
            } else if vr.f < simplex[2].f {
                let outside = [centroid[0] + 0.5 * dir[0], centroid[1] + 0.5 * dir[1]];
                let vc = self.eval(outside);
                if vc.f <= vr.f {
                    simplex[2] = vc;
                } else {
                    self.shrink(&mut simplex);
                }
            } else {
                let inside = [centroid[0] - 0.5 * dir[0], centroid[1] - 0.5 * dir[1]];
                let vc = self.eval(inside);
                if vc.f < simplex[2].f {
                    simplex[2] = vc;
                } else {
                    self.shrink(&mut simplex);
                }
            }
        }
        iterations
    }

    fn shrink(&mut self, simplex: &mut [Vertex]) {
        let x0 = simplex[0].x;
        for i in 1..simplex.len() {
            let x = [
                x0[0] + 0.5 * (simplex[i].x[0] - x0[0]),
                x0[1] + 0.5 * (simplex[i].x[1] - x0[1]),
            ];
            simplex[i] = self.eval(x);
        }
    }
}

/// Searches for multipliers whose designed plan achieves the target error
/// rates. Succeeds when the objective (worse relative miss) reaches
/// `dist_tol`, or when the simplex collapses, or when iterations run out
/// with the objective still within 10x of `dist_tol`; only a badly missed
/// budget is an error, and even then the best outcome rides along inside it.
pub fn calibrate(spec: &CalibrationSpec) -> Result<CalibrationOutcome> {
    if !(spec.dist_tol.is_finite() && spec.dist_tol > 0.0) {
        return Err(Error::invalid("dist_tol must be finite and positive"));
    }
    if !(spec.simplex_scale.is_finite() && spec.simplex_scale > 0.0) {
        return Err(Error::invalid("simplex_scale must be finite and positive"));
    }
    if spec.max_iter == 0 {
        return Err(Error::invalid("max_iter must be at least 1"));
    }
    CalibrationSpec::new(
        spec.base.clone(),
        spec.target_alpha,
        spec.target_beta,
        spec.init_lambda0,
        spec.init_lambda1,
    )?;

    let mut search = Search {
        spec,
        trace: Vec::new(),
        best: None,
        last_err: None,
        evals: 0,
        seq: 0,
    };
    let x0 = [spec.init_lambda0.ln(), spec.init_lambda1.ln()];
    let mut iterations = search.run(x0, spec.simplex_scale);
    let mut restarted = false;
    let needs_restart = search
        .best
        .as_ref()
        .map_or(true, |b| b.f > 10.0 * spec.dist_tol);
    if needs_restart && spec.restart_on_failure {
        restarted = true;
        let from = search.best.as_ref().map_or(x0, |b| b.x);
        iterations += search.run(from, 0.5 * spec.simplex_scale);
    }

    let Search {
        trace,
        best,
        last_err,
        ..
    } = search;
    let best = match best {
        Some(b) => b,
        // every single evaluation failed; surface the underlying error
        None => {
            return Err(last_err
                .unwrap_or_else(|| Error::invalid("calibration made no successful evaluation")))
        }
    };

    let prof = profile(&best.plan, spec.base.cost(), EvalMethod::Exact, &[])?;
    let outcome = CalibrationOutcome {
        lambda0: best.x[0].exp(),
        lambda1: best.x[1].exp(),
        objective: best.f,
        alpha: best.alpha,
        beta: best.beta,
        plan: best.plan,
        profile: prof,
        trace,
        iterations,
        restarted,
    };
    if outcome.objective > 10.0 * spec.dist_tol {
        return Err(Error::CalibrationFailed {
            objective: outcome.objective,
            iterations: outcome.iterations,
            lambda0: outcome.lambda0,
            lambda1: outcome.lambda1,
            best: Box::new(outcome),
        });
    }
    Ok(outcome)
}

// ---------------------------------------------------------------------------
