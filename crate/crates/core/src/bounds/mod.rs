//! Hypothesis checks and the blow-up time bound.
//!
//! With `lambda1 = mu1 + (c1^2 + c2^2)/2`, `alpha = <psi, u0>` and
//! `beta = <psi, v0>`, the comparison problem blows up no later than
//!
//! ```text
//! T = int_alpha^inf [ lambda1 alpha^2 + beta^2 - lambda1 s^2
//!                     + kappa^2/(2 + 2r) (s^{r+1} - alpha^{r+1}) ]^{-1/2} ds
//! ```
//!
//! provided `alpha >= (4 lambda1 / kappa^2)^{1/(r-1)}`. The integral is split
//! into geometric panels `[alpha, 2 alpha], [2 alpha, 4 alpha], ...` handled by
//! adaptive Simpson, and a tail `[S, inf)` bounded in closed form from both
//! sides using the leading `s^{r+1}` term.

mod ode;

pub use ode::{glassey_ode, GlasseyOde, OdeOptions, OdeTrajectory};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::adaptive_simpson;
use crate::spectral::{eigenpair, Projector, SpatialGrid};

/// Physical coefficients shared by the stochastic and comparison problems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    pub c1: f64,
    pub c2: f64,
    pub kappa: f64,
    pub r: f64,
}

impl PhysParams {
    pub fn new(c1: f64, c2: f64, kappa: f64, r: f64) -> Result<Self> {
        let p = Self { c1, c2, kappa, r };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c1.is_finite() && self.c2.is_finite()) {
            return Err(Error::Parameter("c1 and c2 must be finite".into()));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::Parameter(format!("kappa must be > 0, got {}", self.kappa)));
        }
        if !(self.r > 1.0 && self.r.is_finite()) {
            return Err(Error::Parameter(format!("r must be > 1, got {}", self.r)));
        }
        Ok(())
    }

    /// `(c1^2 + c2^2) / 2`, the linear damping of the comparison problem.
    pub fn damping(&self) -> f64 {
        0.5 * (self.c1 * self.c1 + self.c2 * self.c2)
    }

    /// Coefficient `kappa^2 / 4` of `|u|^r` in the comparison problem.
    pub fn source_coeff(&self) -> f64 {
        0.25 * self.kappa * self.kappa
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub mu1: f64,
    pub lambda1: f64,
    pub alpha: f64,
    pub beta: f64,
    pub threshold: f64,
    pub h1_ok: bool,
    pub h2_ok: bool,
    #[serde(rename = "T")]
    pub t_bound: Option<f64>,
    #[serde(rename = "T_error")]
    pub t_error: Option<f64>,
}

impl BoundReport {
    pub fn admissible(&self) -> bool {
        self.h1_ok && self.h2_ok
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub max_depth: u32,
    /// Largest split point tried before giving up on the tail.
    pub max_split: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            max_depth: 60,
            max_split: 1e200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeBound {
    pub value: f64,
    pub error: f64,
    /// Split point between the adaptive part and the analytic tail.
    pub split: f64,
    pub evals: usize,
}

/// `(alpha, beta) = (<psi, u0>, <psi, v0>)` from node samples.
pub fn compute_alpha_beta(u0: &[f64], v0: &[f64], grid: &SpatialGrid) -> Result<(f64, f64)> {
    let proj = Projector::new(&eigenpair(grid.domain()), grid);
    Ok((proj.apply(u0)?, proj.apply(v0)?))
}

pub fn threshold(lambda1: f64, kappa: f64, r: f64) -> f64 {
    (4.0 * lambda1 / (kappa * kappa)).powf(1.0 / (r - 1.0))
}

/// Populates every field of the report except `T`.
pub fn check_hypotheses(u0: &[f64], v0: &[f64], params: &PhysParams, grid: &SpatialGrid) -> Result<BoundReport> {
    params.validate()?;
    let (alpha, beta) = compute_alpha_beta(u0, v0, grid)?;
    let mu1 = eigenpair(grid.domain()).mu1;
    let lambda1 = mu1 + params.damping();
    let threshold = threshold(lambda1, params.kappa, params.r);
    let nonneg = u0.iter().chain(v0).all(|&v| v >= 0.0);
    let v_max = v0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(BoundReport {
        mu1,
        lambda1,
        alpha,
        beta,
        threshold,
        h1_ok: nonneg && v_max > 0.0,
        h2_ok: alpha >= threshold,
        t_bound: None,
        t_error: None,
    })
}

/// Hypothesis check followed by the bound `T` whenever it is defined
/// (`h2_ok` and `beta > 0`).
pub fn bound_report(
    u0: &[f64],
    v0: &[f64],
    params: &PhysParams,
    grid: &SpatialGrid,
    quad: &QuadConfig,
) -> Result<BoundReport> {
    let mut report = check_hypotheses(u0, v0, params, grid)?;
    if report.h2_ok && report.beta > 0.0 {
        let t = blowup_time_t(report.alpha, report.beta, report.lambda1, params.kappa, params.r, quad)?;
        report.t_bound = Some(t.value);
        report.t_error = Some(t.error);
    }
    Ok(report)
}

/// The integrand `[beta^2 + 2 int_alpha^s h]^{-1/2}` with
/// `h(s) = kappa^2/4 s^r - lambda1 s`.
#[derive(Debug, Clone, Copy)]
pub struct BoundIntegrand {
    pub alpha: f64,
    pub beta: f64,
    pub lambda1: f64,
    pub kappa: f64,
    pub r: f64,
}

impl BoundIntegrand {
    fn lead(&self) -> f64 {
        self.kappa * self.kappa / (2.0 + 2.0 * self.r)
    }

    /// The bracket, arranged so the `s`-dependent terms cancel exactly at `s = alpha`.
    pub fn bracket(&self, s: f64) -> f64 {
        let a = self.lead();
        let grow = if self.alpha > 0.0 && s > 0.0 {
            a * self.alpha.powf(self.r + 1.0) * ((self.r + 1.0) * (s / self.alpha).ln()).exp_m1()
        } else {
            a * (s.powf(self.r + 1.0) - self.alpha.powf(self.r + 1.0))
        };
        self.beta * self.beta + grow - self.lambda1 * (s - self.alpha) * (s + self.alpha)
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        let b = self.bracket(s);
        if b > 0.0 && b.is_finite() {
            Ok(1.0 / b.sqrt())
        } else {
            Err(Error::Hypothesis(format!(
                "bracket is non-positive ({b:e}) at s = {s}; the bound integral is undefined"
            )))
        }
    }

    /// Lower and upper bounds of `int_split^inf`; `None` while the leading
    /// term does not yet dominate at `split`.
    fn tail_bounds(&self, split: f64) -> Option<(f64, f64)> {
        let a = self.lead();
        let c0 = self.lambda1 * self.alpha * self.alpha + self.beta * self.beta
            - a * self.alpha.powf(self.r + 1.0);
        let lead_at = a * split.powf(self.r + 1.0);
        let theta_up = (self.lambda1 * split * split + (-c0).max(0.0)) / lead_at;
        if !(theta_up < 1.0) {
            return None;
        }
        let theta_lo = c0.max(0.0) / lead_at;
        let base = 2.0 / (self.r - 1.0) / a.sqrt() * split.powf(-(self.r - 1.0) / 2.0);
        Some((base / (1.0 + theta_lo).sqrt(), base / (1.0 - theta_up).sqrt()))
    }
}

fn check_bound_args(alpha: f64, beta: f64, lambda1: f64, kappa: f64, r: f64) -> Result<()> {
    if !(kappa > 0.0) || !(r > 1.0) {
        return Err(Error::Parameter(format!("need kappa > 0 and r > 1, got kappa = {kappa}, r = {r}")));
    }
    if !(beta > 0.0) {
        return Err(Error::Hypothesis(format!("beta must be > 0, got {beta}")));
    }
    if !(lambda1 >= 0.0) {
        return Err(Error::Parameter(format!("lambda1 must be >= 0, got {lambda1}")));
    }
    let th = threshold(lambda1, kappa, r);
    if !(alpha >= th) || !(alpha > 0.0) {
        return Err(Error::Hypothesis(format!(
            "alpha = {alpha} is below the threshold {th}"
        )));
    }
    Ok(())
}

/// The improper integral `T` with a certified error estimate.
pub fn blowup_time_t(alpha: f64, beta: f64, lambda1: f64, kappa: f64, r: f64, quad: &QuadConfig) -> Result<TimeBound> {
    check_bound_args(alpha, beta, lambda1, kappa, r)?;
    let f = BoundIntegrand {
        alpha,
        beta,
        lambda1,
        kappa,
        r,
    };
    let first = adaptive_simpson(|s| f.eval(s), alpha, 2.0 * alpha, quad.rel_tol * 1e-3 * alpha / beta, quad.max_depth)?;
    let scale = first.value;
    let target = 0.5 * quad.rel_tol * scale;
    let mut value = first.value;
    let mut error = first.error;
    let mut evals = first.evals;
    let mut split = 2.0 * alpha;
    let mut panel_tol = 0.5 * target;
    loop {
        if let Some((lo, hi)) = f.tail_bounds(split) {
            let half = 0.5 * (hi - lo);
            if half <= target {
                return Ok(TimeBound {
                    value: value + 0.5 * (lo + hi),
                    error: error + half,
                    split,
                    evals,
                });
            }
        }
        if split > quad.max_split {
            return Err(Error::Convergence(format!(
                "tail bound still above tolerance at split point {split:e}"
            )));
        }
        let panel = adaptive_simpson(|s| f.eval(s), split, 2.0 * split, panel_tol, quad.max_depth)?;
        value += panel.value;
        error += panel.error;
        evals += panel.evals;
        split *= 2.0;
        panel_tol *= 0.5;
    }
}

/// Time for the extremal comparison ODE to climb from `alpha` to `level`:
/// `int_alpha^level [beta^2 + 2 int_alpha^s h]^{-1/2} ds`.
pub fn level_time(
    integrand: &BoundIntegrand,
    level: f64,
    quad: &QuadConfig,
) -> Result<f64> {
    if !(level >= integrand.alpha) {
        return Err(Error::Precondition(format!(
            "level {level} is below alpha = {}",
            integrand.alpha
        )));
    }
    let q = adaptive_simpson(|s| integrand.eval(s), integrand.alpha, level, quad.rel_tol, quad.max_depth)?;
    Ok(q.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::Profile;
    use crate::spectral::Interval;
    use std::f64::consts::PI;

    fn pi_grid(nx: usize) -> SpatialGrid {
        SpatialGrid::new(Interval::new(PI).unwrap(), nx).unwrap()
    }

    #[test]
    fn alpha_beta_examples() {
        let g = pi_grid(512);
        let zero = vec![0.0; g.n_nodes()];
        assert_eq!(compute_alpha_beta(&zero, &zero, &g).unwrap(), (0.0, 0.0));
        let ones = vec![1.0; g.n_nodes()];
        let (a, b) = compute_alpha_beta(&ones, &ones, &g).unwrap();
        assert!((a - 1.0).abs() < 1e-5 && (b - 1.0).abs() < 1e-5);

        let u0 = Profile::sine(1, 4.0).sample(&g);
        let v0 = Profile::sine(1, 1.0).sample(&g);
        let (a, b) = compute_alpha_beta(&u0, &v0, &g).unwrap();
        // oracle: midpoint rule for int (1/2) sin x * 4 sin x and int (1/2) sin^2 x
        let n = 100_000;
        let h = PI / n as f64;
        let oracle: f64 = (0..n).map(|i| 0.5 * ((i as f64 + 0.5) * h).sin().powi(2) * h).sum();
        assert!((4.0 * oracle - PI).abs() < 1e-8 && (oracle - PI / 4.0).abs() < 1e-8);
        assert!((a - PI).abs() < 1e-10);
        assert!((b - PI / 4.0).abs() < 1e-10);
    }

    #[test]
    fn hypothesis_examples() {
        let g = pi_grid(256);
        let u0 = Profile::sine(1, 4.0).sample(&g);
        let v0 = Profile::sine(1, 1.0).sample(&g);
        let p = PhysParams::new(0.0, 0.0, 2.0, 2.0).unwrap();
        let rep = check_hypotheses(&u0, &v0, &p, &g).unwrap();
        assert!((rep.threshold - 1.0).abs() < 1e-15);
        assert!((rep.lambda1 - 1.0).abs() < 1e-15);
        assert!(rep.h1_ok && rep.h2_ok);
        assert!(rep.t_bound.is_none());

        let zero = vec![0.0; g.n_nodes()];
        assert!(!check_hypotheses(&u0, &zero, &p, &g).unwrap().h1_ok);

        let weak = PhysParams::new(0.0, 0.0, 0.01, 2.0).unwrap();
        let rep = check_hypotheses(&u0, &v0, &weak, &g).unwrap();
        assert!((rep.threshold - 40_000.0).abs() < 1e-6);
        assert!(!rep.h2_ok);
    }

    #[test]
    fn parameter_errors() {
        assert!(matches!(PhysParams::new(0.0, 0.0, 2.0, 1.0), Err(Error::Parameter(_))));
        assert!(matches!(PhysParams::new(0.0, 0.0, 0.0, 2.0), Err(Error::Parameter(_))));
        assert!(matches!(PhysParams::new(0.0, 0.0, -1.0, 2.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn integrand_at_alpha_is_one_over_beta() {
        for &(alpha, beta, lambda1, kappa, r) in &[
            (2.0, 1.0, 1.0, 2.0, 2.0),
            (PI, PI / 4.0, 1.0, 2.0, 2.0),
            (1.7, 0.3, 0.5, 3.0, 2.5),
            (5.0, 2.0, 2.0, 1.5, 1.3),
        ] {
            let f = BoundIntegrand { alpha, beta, lambda1, kappa, r };
            assert_eq!(f.eval(alpha).unwrap(), 1.0 / beta);
        }
    }

    #[test]
    fn rejects_inadmissible_inputs() {
        let q = QuadConfig::default();
        assert!(matches!(blowup_time_t(2.0, 0.0, 1.0, 2.0, 2.0, &q), Err(Error::Hypothesis(_))));
        assert!(matches!(blowup_time_t(0.5, 1.0, 1.0, 2.0, 2.0, &q), Err(Error::Hypothesis(_))));
        assert!(matches!(blowup_time_t(2.0, 1.0, 1.0, 2.0, 1.0, &q), Err(Error::Parameter(_))));
    }

    #[test]
    fn report_serializes_with_exact_names() {
        let g = pi_grid(64);
        let u0 = Profile::sine(1, 4.0).sample(&g);
        let v0 = Profile::sine(1, 1.0).sample(&g);
        let p = PhysParams::new(0.0, 0.0, 2.0, 2.0).unwrap();
        let rep = bound_report(&u0, &v0, &p, &g, &QuadConfig::default()).unwrap();
        let v: serde_json::Value = serde_json::to_value(rep).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(|s| s.as_str()).collect();
        for k in ["mu1", "lambda1", "alpha", "beta", "threshold", "h1_ok", "h2_ok", "T", "T_error"] {
            assert!(keys.contains(&k), "missing {k}");
        }
        assert_eq!(keys.len(), 9);
        assert!(v["T"].as_f64().unwrap() > 0.0);
    }
}
