//! Likelihood-ratio model for Bernoulli observations taken in groups.
//!
//! Under H0 a trial succeeds with probability theta0, under H1 with theta1.
//! A group of m trials carrying s successes multiplies the running likelihood
//! ratio by r^s * q^(m-s), where r = theta1/theta0 and q = (1-theta1)/(1-theta0).
//! Factors are accumulated additively in log space and exponentiated late, so
//! groups of hundreds of observations cannot overflow intermediate products.

use crate::error::{Error, Result};
use crate::util::NeumaierSum;
use statrs::function::gamma::ln_gamma;

/// A simple-vs-simple Bernoulli testing problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hypotheses {
    theta0: f64,
    theta1: f64,
    r: f64,
    q: f64,
    ln_r: f64,
    ln_q: f64,
}

impl Hypotheses {
    /// Requires 0 < theta0, theta1 < 1 and theta0 != theta1.
    pub fn new(theta0: f64, theta1: f64) -> Result<Self> {
        for (name, t) in [("theta0", theta0), ("theta1", theta1)] {
            if !t.is_finite() || t <= 0.0 || t >= 1.0 {
                return Err(Error::invalid(format!(
                    "{name} must lie strictly between 0 and 1, got {t}"
                )));
            }
        }
        if theta0 == theta1 {
            return Err(Error::invalid(
                "theta0 and theta1 must differ; equal hypotheses admit no test",
            ));
        }
        let r = theta1 / theta0;
        let q = (1.0 - theta1) / (1.0 - theta0);
        Ok(Self {
            theta0,
            theta1,
            r,
            q,
            ln_r: r.ln(),
            ln_q: q.ln(),
        })
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    pub fn theta1(&self) -> f64 {
        self.theta1
    }

    /// r = theta1/theta0, the likelihood-ratio factor of one success.
    pub fn success_ratio(&self) -> f64 {
        self.r
    }

    /// q = (1-theta1)/(1-theta0), the factor of one failure.
    pub fn failure_ratio(&self) -> f64 {
        self.q
    }

    pub fn ln_success_ratio(&self) -> f64 {
        self.ln_r
    }

    pub fn ln_failure_ratio(&self) -> f64 {
        self.ln_q
    }

    /// Log likelihood ratio after `successes` + `failures` observations:
    /// s*ln(r) + f*ln(q).
    ///
    /// Single source of truth: every consumer (design probes, exact dynamic
    /// program, simulator, advice replay) derives log-z positions from this
    /// expression, so interval-membership decisions agree bit for bit.
    pub fn log_lr(&self, successes: u64, failures: u64) -> f64 {
        successes as f64 * self.ln_r + failures as f64 * self.ln_q
    }
}

/// r^s * q^(m-s) for a single group, computed in log space.
pub fn lr_factor(hyp: &Hypotheses, m: u32, s: u32) -> Result<f64> {
    Ok(log_lr_factor(hyp, m, s)?.exp())
}

/// s*ln(r) + (m-s)*ln(q), the exact logarithm of [`lr_factor`].
pub fn log_lr_factor(hyp: &Hypotheses, m: u32, s: u32) -> Result<f64> {
    if m < 1 {
        return Err(Error::invalid("group size m must be at least 1"));
    }
    if s > m {
        return Err(Error::invalid(format!(
            "success count {s} exceeds group size {m}"
        )));
    }
    Ok(hyp.log_lr(u64::from(s), u64::from(m - s)))
}

/// ln of the binomial pmf C(n,k) theta^k (1-theta)^(n-k).
pub(crate) fn ln_binom_pmf(n: u64, k: u64, theta: f64) -> f64 {
    debug_assert!(k <= n);
    let n_f = n as f64;
    let k_f = k as f64;
    ln_gamma(n_f + 1.0) - ln_gamma(k_f + 1.0) - ln_gamma(n_f - k_f + 1.0)
        + k_f * theta.ln()
        + (n_f - k_f) * (1.0 - theta).ln()
}

/// Outcome distribution of one group of size m under success probability
/// theta, paired with the likelihood-ratio factor each outcome contributes.
///
/// Prefix arrays over outcomes are kept so expectations of piecewise-linear
/// functions of the likelihood ratio can be split into closed-form tails plus
/// a short interior correction.
#[derive(Debug, Clone)]
pub struct GroupOutcomeDistribution {
    m: u32,
    theta: f64,
    probs: Vec<f64>,
    lr: Vec<f64>,
    log_lr: Vec<f64>,
    /// cum_prob[t] = P(S <= t), Neumaier prefix sums.
    cum_prob: Vec<f64>,
    /// cum_prob_lr[t] = sum_{s<=t} P(S=s)*lr(s), each term exp(log p + log lr)
    /// so that huge factors paired with tiny probabilities stay finite.
    cum_prob_lr: Vec<f64>,
}

/// Builds the outcome distribution of a group of size `m` under `theta`.
///
/// The likelihood-ratio factors refer to `hyp` and do not depend on `theta`;
/// probabilities are binomial(m, theta). Probabilities must sum to 1 within
/// 1e-12, enforced at construction.
pub fn group_distribution(
    hyp: &Hypotheses,
    m: u32,
    theta: f64,
) -> Result<GroupOutcomeDistribution> {
    if m < 1 {
        return Err(Error::invalid("group size m must be at least 1"));
    }
    if !theta.is_finite() || theta <= 0.0 || theta >= 1.0 {
        return Err(Error::invalid(format!(
            "theta must lie strictly between 0 and 1, got {theta}"
        )));
    }
    let n = m as usize;
    let mut probs = Vec::with_capacity(n + 1);
    let mut lr = Vec::with_capacity(n + 1);
    let mut log_lr = Vec::with_capacity(n + 1);
    let mut log_probs = Vec::with_capacity(n + 1);
    for s in 0..=m {
        let lp = ln_binom_pmf(u64::from(m), u64::from(s), theta);
        let llr = hyp.log_lr(u64::from(s), u64::from(m - s));
        log_probs.push(lp);
        probs.push(lp.exp());
        log_lr.push(llr);
        lr.push(llr.exp());
    }
    let mut cum_prob = Vec::with_capacity(n + 1);
    let mut cum_prob_lr = Vec::with_capacity(n + 1);
    let mut acc_p = NeumaierSum::new();
    let mut acc_plr = NeumaierSum::new();
    for s in 0..=n {
        acc_p.add(probs[s]);
        acc_plr.add((log_probs[s] + log_lr[s]).exp());
        cum_prob.push(acc_p.value());
        cum_prob_lr.push(acc_plr.value());
    }
    let total = cum_prob[n];
    if !((total - 1.0).abs() <= 1e-12) {
        return Err(Error::NonFinite {
            context: "group outcome probabilities do not sum to 1",
        });
    }
    Ok(GroupOutcomeDistribution {
        m,
        theta,
        probs,
        lr,
        log_lr,
        cum_prob,
        cum_prob_lr,
    })
}

impl GroupOutcomeDistribution {
    pub fn group_size(&self) -> u32 {
        self.m
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// P(S = s) indexed by s = 0..=m.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Likelihood-ratio factor r^s q^(m-s) indexed by s.
    pub fn lr_factors(&self) -> &[f64] {
        &self.lr
    }

    /// Exact logs of [`Self::lr_factors`]; monotone in s.
    pub fn log_lr_factors(&self) -> &[f64] {
        &self.log_lr
    }

    /// Rows (s, lrFactor, prob).
    pub fn entries(&self) -> impl Iterator<Item = (u32, f64, f64)> + '_ {
        (0..=self.m).map(move |s| (s, self.lr[s as usize], self.probs[s as usize]))
    }

    pub(crate) fn cum_prob(&self) -> &[f64] {
        &self.cum_prob
    }

    pub(crate) fn cum_prob_lr(&self) -> &[f64] {
        &self.cum_prob_lr
    }

    /// Inverse-CDF draw: smallest s with P(S <= s) > u, clamped to m.
    pub(crate) fn sample(&self, u: f64) -> u32 {
        let idx = self.cum_prob.partition_point(|&c| c <= u);
        idx.min(self.m as usize) as u32
    }
}

// ---------------------------------------------------------------------------
