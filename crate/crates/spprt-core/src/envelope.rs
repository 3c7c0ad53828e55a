//! Stop risk and piecewise-linear value envelopes on log-geometric grids.
//!
//! Stopping at likelihood ratio z costs g(z) = min(lambda0, lambda1*z): the
//! cheaper of the two weighted error risks. Backward induction produces value
//! functions rho_j that agree with g outside a continuation interval [a, b]
//! and dip below it inside; an [`Envelope`] stores that interior as samples
//! on a geometric grid and interpolates linearly in z between nodes, which
//! under-approximates the true concave value and therefore never invents
//! spurious continuation regions at the next level.

use crate::error::{Error, Result};

/// Error-risk multipliers (lambda0 for a false rejection of H0, lambda1 for
/// a false rejection of H1) defining the stop risk g(z) = min(lambda0, lambda1*z).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRiskParams {
    lambda0: f64,
    lambda1: f64,
    ln_z_star: f64,
}

impl StopRiskParams {
    pub fn new(lambda0: f64, lambda1: f64) -> Result<Self> {
        for (name, l) in [("lambda0", lambda0), ("lambda1", lambda1)] {
            if !l.is_finite() || l <= 0.0 {
                return Err(Error::invalid(format!(
                    "{name} must be finite and positive, got {l}"
                )));
            }
        }
        Ok(Self {
            lambda0,
            lambda1,
            ln_z_star: (lambda0 / lambda1).ln(),
        })
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    /// The indifference point z* = lambda0/lambda1 where both stop decisions
    /// carry equal risk.
    pub fn z_star(&self) -> f64 {
        self.lambda0 / self.lambda1
    }

    pub fn ln_z_star(&self) -> f64 {
        self.ln_z_star
    }

    /// g evaluated from a log position. Values only (never used to decide
    /// membership), so the ulp-level disagreement with the min form at the
    /// kink is harmless.
    pub(crate) fn g_log(&self, u: f64) -> f64 {
        if u >= self.ln_z_star {
            self.lambda0
        } else {
            self.lambda1 * u.exp()
        }
    }

    pub(crate) fn g(&self, z: f64) -> f64 {
        f64::min(self.lambda0, self.lambda1 * z)
    }
}

/// min(lambda0, lambda1*z), the risk of the better stop decision at z.
pub fn stop_risk(params: &StopRiskParams, z: f64) -> Result<f64> {
    if !(z >= 0.0) || !z.is_finite() {
        return Err(Error::invalid(format!(
            "stop risk requires a finite likelihood ratio z >= 0, got {z}"
        )));
    }
    Ok(params.g(z))
}

/// Geometric grid a*e^(k*h) for k = 0, 1, ... while below b, with b itself as
/// the final node: snapped onto the last generated node when that node lands
/// within 1e-12 (relative) of b, appended otherwise.
pub fn build_log_grid(a: f64, b: f64, h: f64) -> Result<Vec<f64>> {
    if !(a > 0.0) || !a.is_finite() || !b.is_finite() || !(b > a) {
        return Err(Error::invalid(format!(
            "grid interval must satisfy 0 < a < b, got a = {a}, b = {b}"
        )));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid(format!("grid step must be positive, got {h}")));
    }
    let mut nodes = vec![a];
    let mut k = 1u32;
    loop {
        let z = a * (f64::from(k) * h).exp();
        if z >= b {
            break;
        }
        nodes.push(z);
        k += 1;
    }
    let last = *nodes.last().expect("grid always holds the left endpoint");
    if nodes.len() >= 2 && (b - last).abs() <= 1e-12 * b {
        *nodes.last_mut().expect("non-empty") = b;
    } else {
        nodes.push(b);
    }
    Ok(nodes)
}

/// A strictly increasing node set over [a, b], log-uniform except possibly
/// the final gap, with O(1) segment lookup. Value columns sampled on the
/// nodes are interpolated linearly in z.
#[derive(Debug, Clone)]
pub(crate) struct LogGrid {
    ln_a: f64,
    h: f64,
    nodes: Vec<f64>,
    ln_nodes: Vec<f64>,
}

impl LogGrid {
    pub(crate) fn new(a: f64, b: f64, h: f64) -> Result<Self> {
        Self::from_nodes(build_log_grid(a, b, h)?, h)
    }

    pub(crate) fn from_nodes(nodes: Vec<f64>, h: f64) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::invalid("a grid needs at least two nodes"));
        }
        let ln_nodes: Vec<f64> = nodes.iter().map(|z| z.ln()).collect();
        Ok(Self {
            ln_a: ln_nodes[0],
            h,
            nodes,
            ln_nodes,
        })
    }

    pub(crate) fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub(crate) fn ln_nodes(&self) -> &[f64] {
        &self.ln_nodes
    }

    /// Segment index for a log position inside the span. The grid is uniform
    /// in log except possibly the appended final gap, so division lands on
    /// the segment directly and the guards move at most a step.
    fn locate(&self, u: f64) -> usize {
        let n = self.nodes.len();
        let guess = ((u - self.ln_a) / self.h) as isize;
        let mut k = guess.clamp(0, n as isize - 2) as usize;
        while k > 0 && u < self.ln_nodes[k] {
            k -= 1;
        }
        while k + 2 < n && u > self.ln_nodes[k + 1] {
            k += 1;
        }
        k
    }

    /// Linear interpolation in z of a value column sampled on this grid.
    pub(crate) fn lerp(&self, u: f64, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.nodes.len());
        let k = self.locate(u);
        let z = u.exp();
        let z0 = self.nodes[k];
        let z1 = self.nodes[k + 1];
        let t = ((z - z0) / (z1 - z0)).clamp(0.0, 1.0);
        values[k] + t * (values[k + 1] - values[k])
    }
}

#[derive(Debug, Clone)]
struct Interior {
    a: f64,
    b: f64,
    ln_b: f64,
    grid: LogGrid,
    values: Vec<f64>,
}

/// A value envelope: equal to the stop risk g outside the continuation
/// interval, piecewise linear in z through grid samples inside it.
///
/// Invariants enforced at construction: strictly increasing positive nodes
/// spanning exactly [a, b]; finite nonnegative values; values never above g
/// (within 1e-12); midpoint concavity of the samples within 1e-9*lambda0.
#[derive(Debug, Clone)]
pub struct Envelope {
    params: StopRiskParams,
    interior: Option<Interior>,
}

impl Envelope {
    /// The envelope with empty continuation region: rho_0 = g everywhere.
    pub fn pure_stop_risk(params: StopRiskParams) -> Self {
        Self {
            params,
            interior: None,
        }
    }

    /// Builds an envelope from samples on a log grid over [a, b].
    pub fn from_samples(
        params: StopRiskParams,
        a: f64,
        b: f64,
        h: f64,
        nodes: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() || !b.is_finite() || !(b > a) {
            return Err(Error::invalid(format!(
                "envelope interval must satisfy 0 < a < b, got a = {a}, b = {b}"
            )));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::invalid("envelope grid step must be positive"));
        }
        if nodes.len() != values.len() || nodes.len() < 2 {
            return Err(Error::invalid(format!(
                "envelope needs matching node/value arrays of length >= 2, got {} nodes, {} values",
                nodes.len(),
                values.len()
            )));
        }
        if nodes[0] != a || *nodes.last().expect("len >= 2") != b {
            return Err(Error::invalid(
                "envelope nodes must span exactly [a, b] (first node a, last node b)",
            ));
        }
        for w in nodes.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::invalid(
                    "envelope nodes must be strictly increasing",
                ));
            }
        }
        for (&z, &v) in nodes.iter().zip(values.iter()) {
            if !z.is_finite() || !v.is_finite() || v < 0.0 {
                return Err(Error::NonFinite {
                    context: "envelope nodes/values",
                });
            }
            if v > params.g(z) + 1e-12 {
                return Err(Error::invalid(format!(
                    "envelope value {v} exceeds stop risk {} at z = {z}",
                    params.g(z)
                )));
            }
        }
        // sampled concavity: each interior point sits on or above the chord
        // of its neighbours (scaled slack; the values derive from a concave
        // function, so violations flag construction bugs, not geometry)
        let slack = 1e-9 * params.lambda0();
        for i in 1..nodes.len() - 1 {
            let (z0, z1, z2) = (nodes[i - 1], nodes[i], nodes[i + 1]);
            let (v0, v2) = (values[i - 1], values[i + 1]);
            let chord = v0 + (v2 - v0) * (z1 - z0) / (z2 - z0);
            if values[i] < chord - slack {
                return Err(Error::invalid(format!(
                    "envelope samples not concave at node {i} (z = {z1})"
                )));
            }
        }
        Ok(Self {
            params,
            interior: Some(Interior {
                a,
                b,
                ln_b: b.ln(),
                grid: LogGrid::from_nodes(nodes, h)?,
                values,
            }),
        })
    }

    pub fn params(&self) -> &StopRiskParams {
        &self.params
    }

    /// Continuation interval, or None for the pure stop-risk envelope.
    pub fn interval(&self) -> Option<(f64, f64)> {
        self.interior.as_ref().map(|it| (it.a, it.b))
    }

    pub(crate) fn ln_interval(&self) -> Option<(f64, f64)> {
        self.interior.as_ref().map(|it| (it.grid.ln_a, it.ln_b))
    }

    pub fn grid_step(&self) -> Option<f64> {
        self.interior.as_ref().map(|it| it.grid.h)
    }

    pub fn nodes(&self) -> &[f64] {
        self.interior.as_ref().map_or(&[], |it| it.grid.nodes())
    }

    pub fn values(&self) -> &[f64] {
        self.interior.as_ref().map_or(&[], |it| &it.values)
    }

    /// Evaluates the envelope at likelihood ratio z > 0.
    pub fn eval(&self, z: f64) -> Result<f64> {
        if !(z > 0.0) || !z.is_finite() {
            return Err(Error::invalid(format!(
                "envelope evaluation requires finite z > 0, got {z}"
            )));
        }
        Ok(self.eval_log(z.ln()))
    }

    /// Evaluation from a log position; membership in [a, b] is decided in
    /// log space everywhere in this crate so boundary cases cannot diverge
    /// between the design, the evaluators, and advice replay.
    pub(crate) fn eval_log(&self, u: f64) -> f64 {
        match &self.interior {
            None => self.params.g_log(u),
            Some(it) => {
                if u < it.grid.ln_a || u > it.ln_b {
                    self.params.g_log(u)
                } else {
                    it.grid.lerp(u, &it.values)
                }
            }
        }
    }

    pub(crate) fn contains_log(&self, u: f64) -> bool {
        match &self.interior {
            None => false,
            Some(it) => u >= it.grid.ln_a && u <= it.ln_b,
        }
    }
}

// ---------------------------------------------------------------------------
