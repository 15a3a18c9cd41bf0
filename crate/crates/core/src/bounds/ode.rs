//! The comparison ODE `phi'' = h(phi)`, `h(s) = kappa^2/4 |s|^r - lambda1 s`,
//! `phi(0) = alpha`, `phi'(0) = beta`.
//!
//! Classical RK4 with the step capped at `eta * min(phi/phi', sqrt(phi/phi''))`,
//! so the step shrinks geometrically as the solution approaches its
//! singularity. Blow-up is operationalised as the first time `phi >= cap`;
//! the run continues to `2 cap` and the two hitting times are combined into a
//! Richardson-style estimate of the singular time, using
//! `t* - t(M) ~ M^{-(r-1)/2}`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlasseyOde {
    pub alpha: f64,
    pub beta: f64,
    pub lambda1: f64,
    pub kappa: f64,
    pub r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub cap: f64,
    /// Largest step; near blow-up the relative control takes over.
    pub dt: f64,
    pub t_max: f64,
    pub eta: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            cap: 1e6,
            dt: 1e-3,
            t_max: 100.0,
            eta: 5e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeTrajectory {
    pub times: Vec<f64>,
    pub phi: Vec<f64>,
    pub phi_dot: Vec<f64>,
    /// First time `phi` reaches `cap`, or `None` within `t_max`.
    pub hitting_time: Option<f64>,
    /// First time `phi` reaches `2 cap`.
    pub double_cap_time: Option<f64>,
    /// Extrapolated singular time from the two hitting times.
    pub blowup_estimate: Option<f64>,
    /// Largest `|E - E0| / scale` seen, with `E = phi'^2/2 - int_alpha^phi h`.
    pub max_energy_drift: f64,
}

impl OdeTrajectory {
    /// First recorded time with `phi >= level` (linear interpolation between samples).
    pub fn time_to_level(&self, level: f64) -> Option<f64> {
        let k = self.phi.iter().position(|&p| p >= level)?;
        if k == 0 {
            return Some(self.times[0]);
        }
        let (p0, p1) = (self.phi[k - 1], self.phi[k]);
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        Some(t0 + (t1 - t0) * (level - p0) / (p1 - p0))
    }
}

impl GlasseyOde {
    pub fn h(&self, s: f64) -> f64 {
        0.25 * self.kappa * self.kappa * s.abs().powf(self.r) - self.lambda1 * s
    }

    /// `int_alpha^s h`.
    pub fn h_integral(&self, s: f64) -> f64 {
        let odd_pow = |x: f64| x * x.abs().powf(self.r);
        0.25 * self.kappa * self.kappa * (odd_pow(s) - odd_pow(self.alpha)) / (self.r + 1.0)
            - 0.5 * self.lambda1 * (s * s - self.alpha * self.alpha)
    }

    fn energy_drift(&self, phi: f64, phi_dot: f64) -> f64 {
        let kinetic = 0.5 * phi_dot * phi_dot;
        let potential = self.h_integral(phi);
        let e0 = 0.5 * self.beta * self.beta;
        let scale = kinetic + potential.abs() + e0;
        if scale == 0.0 {
            0.0
        } else {
            (kinetic - potential - e0).abs() / scale
        }
    }

    fn rk4(&self, phi: f64, v: f64, h: f64) -> (f64, f64) {
        let k1p = v;
        let k1v = self.h(phi);
        let k2p = v + 0.5 * h * k1v;
        let k2v = self.h(phi + 0.5 * h * k1p);
        let k3p = v + 0.5 * h * k2v;
        let k3v = self.h(phi + 0.5 * h * k2p);
        let k4p = v + h * k3v;
        let k4v = self.h(phi + h * k3p);
        (
            phi + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
            v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
        )
    }
}

/// Cubic Hermite crossing of `level` inside one accepted step.
fn hermite_crossing(t0: f64, h: f64, p0: f64, v0: f64, p1: f64, v1: f64, level: f64) -> f64 {
    let eval = |s: f64| {
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * p0
            + (s3 - 2.0 * s2 + s) * h * v0
            + (-2.0 * s3 + 3.0 * s2) * p1
            + (s3 - s2) * h * v1
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if eval(mid) >= level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    t0 + h * 0.5 * (lo + hi)
}

pub fn glassey_ode(alpha: f64, beta: f64, lambda1: f64, kappa: f64, r: f64, opts: &OdeOptions) -> Result<OdeTrajectory> {
    if !(alpha > 0.0) || !(beta >= 0.0) {
        return Err(Error::Precondition(format!(
            "need alpha > 0 and beta >= 0, got alpha = {alpha}, beta = {beta}"
        )));
    }
    if !(r > 1.0) || !(kappa >= 0.0) || !lambda1.is_finite() {
        return Err(Error::Parameter(format!(
            "need r > 1, kappa >= 0, finite lambda1; got r = {r}, kappa = {kappa}, lambda1 = {lambda1}"
        )));
    }
    if !(opts.cap > alpha) || !(opts.dt > 0.0) || !(opts.eta > 0.0) || !(opts.t_max > 0.0) {
        return Err(Error::Precondition("need cap > alpha and positive dt, eta, t_max".into()));
    }
    let ode = GlasseyOde {
        alpha,
        beta,
        lambda1,
        kappa,
        r,
    };
    let mut t = 0.0;
    let (mut phi, mut v) = (alpha, beta);
    let mut out = OdeTrajectory {
        times: vec![t],
        phi: vec![phi],
        phi_dot: vec![v],
        hitting_time: None,
        double_cap_time: None,
        blowup_estimate: None,
        max_energy_drift: 0.0,
    };
    let top = 2.0 * opts.cap;
    while t < opts.t_max {
        let mut h = opts.dt.min(opts.t_max - t);
        if v != 0.0 {
            h = h.min(opts.eta * (phi / v).abs());
        }
        let acc = ode.h(phi);
        if acc != 0.0 {
            h = h.min(opts.eta * (phi / acc).abs().sqrt());
        }
        if !(h > 0.0) || t + h == t {
            return Err(Error::SolverStall { t, step: h });
        }
        let (p1, v1) = ode.rk4(phi, v, h);
        if !(p1.is_finite() && v1.is_finite()) {
            return Err(Error::SolverStall { t, step: h });
        }
        if out.hitting_time.is_none() && p1 >= opts.cap {
            out.hitting_time = Some(hermite_crossing(t, h, phi, v, p1, v1, opts.cap));
        }
        if p1 >= top {
            out.double_cap_time = Some(hermite_crossing(t, h, phi, v, p1, v1, top));
        }
        t += h;
        phi = p1;
        v = v1;
        out.times.push(t);
        out.phi.push(phi);
        out.phi_dot.push(v);
        out.max_energy_drift = out.max_energy_drift.max(ode.energy_drift(phi, v));
        if out.double_cap_time.is_some() {
            break;
        }
    }
    if let (Some(t1), Some(t2)) = (out.hitting_time, out.double_cap_time) {
        let q = 0.5 * (r - 1.0);
        out.blowup_estimate = Some(t1 + (t2 - t1) / (1.0 - 2f64.powf(-q)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_motion_never_blows_up() {
        let opts = OdeOptions {
            t_max: 5.0,
            dt: 0.01,
            ..Default::default()
        };
        let tr = glassey_ode(1.0, 0.5, 0.0, 0.0, 2.0, &opts).unwrap();
        assert!(tr.hitting_time.is_none());
        let n = tr.times.len() - 1;
        assert!((tr.times[n] - 5.0).abs() < 1e-12);
        assert!((tr.phi[n] - (1.0 + 0.5 * 5.0)).abs() < 1e-12);
        assert!(tr.phi_dot.iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn monotone_when_source_is_nonnegative() {
        let tr = glassey_ode(2.0, 1.0, 1.0, 2.0, 2.0, &OdeOptions::default()).unwrap();
        assert!(tr.phi_dot.iter().all(|&v| v > 0.0));
        assert!(tr.phi.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn rejects_bad_inputs() {
        let o = OdeOptions::default();
        assert!(glassey_ode(0.0, 1.0, 1.0, 2.0, 2.0, &o).is_err());
        assert!(glassey_ode(1.0, 1.0, 1.0, 2.0, 1.0, &o).is_err());
        let small_cap = OdeOptions { cap: 0.5, ..o };
        assert!(glassey_ode(1.0, 1.0, 1.0, 2.0, 2.0, &small_cap).is_err());
    }

    #[test]
    fn hermite_crossing_on_a_line() {
        let t = hermite_crossing(1.0, 0.5, 0.0, 2.0, 1.0, 2.0, 0.25);
        assert!((t - 1.125).abs() < 1e-14);
    }
}
