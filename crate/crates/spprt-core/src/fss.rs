//! Fixed-sample-size benchmark: the smallest single-batch Neyman-Pearson
//! test meeting the same error-rate targets, and cost ratios against it.
//!
//! For Bernoulli data the likelihood ratio is monotone in the success count,
//! so the optimal fixed-n test rejects H0 on an extreme success count: large
//! counts when theta1 > theta0, small counts otherwise. Within one sample
//! size the threshold search is monotone, but feasibility is NOT monotone in
//! n: the attainable alpha levels jump discretely, so adding an observation
//! can force a more conservative cutoff and lose power (for (0.3, 0.7) with
//! alpha = beta = 0.1, sizes 9 and 11 are feasible while 10 and 12 are not).
//! The minimum is therefore found by a plain upward scan.

use crate::design::CostModel;
use crate::error::{Error, Result};
use crate::model::Hypotheses;
use crate::util::NeumaierSum;

/// A single-batch test: observe `n`, reject H0 on an extreme success count.
///
/// When theta1 > theta0 the test rejects for `successes >= threshold`;
/// when theta1 < theta0 it rejects for `successes <= threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedSampleSize {
    pub n: u64,
    pub threshold: u64,
    pub achieved_alpha: f64,
    pub achieved_beta: f64,
}

/// Threshold and achieved rates for the upward test (p1 > p0) at sample
/// size n: the smallest cutoff whose alpha fits, and the beta it implies.
/// Among alpha-feasible cutoffs the smallest also minimizes beta, so this
/// pair decides feasibility of n.
fn upward_rates(n: u64, p0: f64, p1: f64, alpha: f64) -> (u64, f64, f64) {
    let len = (n + 1) as usize;
    let (ln_p0, ln_q0) = (p0.ln(), (1.0 - p0).ln());
    let (ln_p1, ln_q1) = (p1.ln(), (1.0 - p1).ln());
    let mut pmf0 = vec![0.0f64; len];
    let mut pmf1 = vec![0.0f64; len];
    // ln C(n, k) by recurrence: cheap and stable at any n, and underflow in
    // the far tails rounds harmlessly to zero only after exponentiation
    let mut ln_c = 0.0f64;
    for k in 0..len {
        let kf = k as f64;
        let nkf = (n - k as u64) as f64;
        pmf0[k] = (ln_c + kf * ln_p0 + nkf * ln_q0).exp();
        pmf1[k] = (ln_c + kf * ln_p1 + nkf * ln_q1).exp();
        if k + 1 < len {
            ln_c += nkf.ln() - (kf + 1.0).ln();
        }
    }
    // upper tail under H0, accumulated from above so small tails stay exact
    let mut sf0 = vec![0.0f64; len + 1];
    let mut acc = NeumaierSum::new();
    for k in (0..len).rev() {
        acc.add(pmf0[k]);
        sf0[k] = acc.value();
    }
    let mut cdf1 = vec![0.0f64; len];
    let mut acc = NeumaierSum::new();
    for k in 0..len {
        acc.add(pmf1[k]);
        cdf1[k] = acc.value();
    }
    // smallest cutoff with alpha within target; k = n + 1 never rejects
    let k = sf0.partition_point(|&a| a > alpha) as u64;
    let achieved_alpha = sf0[k as usize];
    let achieved_beta = if k == 0 { 0.0 } else { cdf1[(k - 1) as usize] };
    (k, achieved_alpha, achieved_beta)
}

/// Smallest sample size whose best one-sided count test achieves both
/// targets, by upward scan (feasibility is not monotone in n, see module
/// docs); errors with [`Error::FssCapExceeded`] if no n up to `n_cap` works.
pub fn np_min_sample_size(
    hyp: &Hypotheses,
    alpha: f64,
    beta: f64,
    n_cap: u64,
) -> Result<FixedSampleSize> {
    for (name, t) in [("alpha", alpha), ("beta", beta)] {
        if !t.is_finite() || t <= 0.0 || t >= 1.0 {
            return Err(Error::invalid(format!(
                "target {name} must lie strictly between 0 and 1, got {t}"
            )));
        }
    }
    if n_cap == 0 {
        return Err(Error::invalid("sample size cap must be at least 1"));
    }
    let upward = hyp.theta1() > hyp.theta0();
    // the downward problem is the upward problem on failure counts
    let (p0, p1) = if upward {
        (hyp.theta0(), hyp.theta1())
    } else {
        (1.0 - hyp.theta0(), 1.0 - hyp.theta1())
    };

    for n in 1..=n_cap {
        let (k, achieved_alpha, achieved_beta) = upward_rates(n, p0, p1, alpha);
        if achieved_beta <= beta {
            let threshold = if upward { k } else { n - k };
            return Ok(FixedSampleSize {
                n,
                threshold,
                achieved_alpha,
                achieved_beta,
            });
        }
    }
    let (_, a, b) = upward_rates(n_cap, p0, p1, alpha);
    Err(Error::FssCapExceeded {
        cap: n_cap,
        alpha: a,
        beta: b,
    })
}

/// Total cost of taking all `n` observations in one batch under an affine
/// cost model: one setup charge plus the per-observation charges.
pub fn affine_total_cost(cost: &CostModel, n: u64) -> Result<f64> {
    let Some((c0, cu)) = cost.affine_parts() else {
        return Err(Error::invalid(
            "fixed-sample cost comparison needs an affine cost model",
        ));
    };
    let total = c0 + cu * n as f64;
    if !total.is_finite() || total <= 0.0 {
        return Err(Error::invalid(format!(
            "fixed-sample total cost must be finite and positive, got {total}"
        )));
    }
    Ok(total)
}

/// Cost of the fixed-sample test relative to the sequential plan's expected
/// cost under each hypothesis: (vs asc0, vs asc1). Values above 1 mean the
/// sequential plan is cheaper.
pub fn relative_efficiency(
    profile: &crate::evaluate::TestProfile,
    fss: &FixedSampleSize,
    cost: &CostModel,
) -> Result<(f64, f64)> {
    let total = affine_total_cost(cost, fss.n)?;
    for (name, asc) in [("asc0", profile.asc0), ("asc1", profile.asc1)] {
        if !asc.is_finite() || asc <= 0.0 {
            return Err(Error::invalid(format!(
                "profile {name} must be finite and positive, got {asc}"
            )));
        }
    }
    Ok((total / profile.asc0, total / profile.asc1))
}

// ---------------------------------------------------------------------------
