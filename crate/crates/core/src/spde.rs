//! Sample paths of
//!
//! ```text
//! u_tt = u_xx + c1 u + (c2 u + f(u)) W'(t, x),
//! u(0) = (J + T + 1)(1 + u0),   u_t(0) = (J + T + 1) v0,
//! ```
//!
//! where `T` is the deterministic blow-up bound. The noise enters the
//! leapfrog update as `(dt/dx) sigma(u^n_j) dW_{n,j}`, with `sigma` evaluated
//! at the current level so the discrete integrand stays predictable.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bounds::PhysParams;
use crate::error::{Error, Result};
use crate::lattice::{close_boundary, sup_norm, LatticeField};
use crate::noise::fill_row;
use crate::profile::Profile;
use crate::spectral::{eigenpair, Boundary, Interval, Projector, SpatialGrid};

/// The multiplicative nonlinearity `f`.
///
/// `Power` (`kappa u |u|^{r-1}`) and `AbsPower` (`kappa |u|^r`) satisfy
/// `|f(u)| >= kappa |u|^r`; `Zero` and `One` are test stubs that do not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    #[default]
    Power,
    AbsPower,
    Zero,
    One,
}

impl Nonlinearity {
    #[inline]
    pub fn eval(self, u: f64, kappa: f64, r: f64) -> f64 {
        match self {
            Nonlinearity::Power => kappa * u * u.abs().powf(r - 1.0),
            Nonlinearity::AbsPower => kappa * u.abs().powf(r),
            Nonlinearity::Zero => 0.0,
            Nonlinearity::One => 1.0,
        }
    }

    pub fn satisfies_growth_bound(self) -> bool {
        matches!(self, Nonlinearity::Power | Nonlinearity::AbsPower)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpdeSpec {
    pub domain: Interval,
    pub params: PhysParams,
    pub f_choice: Nonlinearity,
    pub t_bound: f64,
    pub u0: Profile,
    pub v0: Profile,
    pub epsilon: f64,
    /// Blow-up threshold `L`.
    pub level: f64,
    pub boundary: Boundary,
}

impl SpdeSpec {
    /// `J + T + 1`.
    pub fn scale(&self) -> f64 {
        self.domain.length() + self.t_bound + 1.0
    }

    pub fn horizon(&self) -> f64 {
        self.t_bound + self.epsilon
    }

    /// Node samples of the scaled initial data (clamped under Dirichlet).
    pub fn initial_samples(&self, grid: &SpatialGrid) -> (Vec<f64>, Vec<f64>) {
        let s = self.scale();
        let mut u: Vec<f64> = self.u0.sample(grid).into_iter().map(|v| s * (1.0 + v)).collect();
        let mut v: Vec<f64> = self.v0.sample(grid).into_iter().map(|v| s * v).collect();
        if self.boundary == Boundary::Dirichlet {
            close_boundary(&mut u, Boundary::Dirichlet);
            close_boundary(&mut v, Boundary::Dirichlet);
        }
        (u, v)
    }

    pub fn validate(&self, grid: &SpatialGrid) -> Result<()> {
        let p = &self.params;
        if !(p.r > 1.0 && p.r.is_finite() && p.kappa >= 0.0 && p.kappa.is_finite()) {
            return Err(Error::Parameter("need r > 1 and kappa >= 0".into()));
        }
        if !(p.c1.is_finite() && p.c2.is_finite()) {
            return Err(Error::Parameter("c1 and c2 must be finite".into()));
        }
        if grid.domain() != self.domain {
            return Err(Error::Domain("grid and spec domains differ".into()));
        }
        self.u0.validate()?;
        self.v0.validate()?;
        if !(self.t_bound >= 0.0 && self.t_bound.is_finite()) {
            return Err(Error::Parameter(format!("T must be finite and >= 0, got {}", self.t_bound)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Parameter(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        let u_max = self.u0.sample(grid).into_iter().fold(f64::NEG_INFINITY, f64::max);
        let floor = self.scale() * (1.0 + u_max);
        if !(self.level > floor) {
            return Err(Error::Parameter(format!(
                "L = {} must exceed scale * (1 + max u0) = {floor}",
                self.level
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOptions {
    pub dt: f64,
    pub checkpoint_every: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub seed: u64,
    /// Time-level index of each checkpoint.
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    pub sup_norm: Vec<f64>,
    pub phi: Vec<f64>,
    pub sup_u_sq: Vec<f64>,
    pub sigma_l: Option<f64>,
    pub blown_up: bool,
    /// Blow-up detected through non-finite values rather than the threshold.
    pub overflow: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSidecar {
    pub seed: u64,
    #[serde(rename = "sigma_L")]
    pub sigma_l: Option<f64>,
    pub blown_up: bool,
    pub overflow: bool,
}

impl PathResult {
    /// Overall sup-norm, `+inf` after blow-up.
    pub fn peak(&self) -> f64 {
        if self.blown_up {
            f64::INFINITY
        } else {
            self.sup_norm.iter().copied().fold(0.0, f64::max)
        }
    }

    pub fn sup_norm_at_step(&self, step: usize) -> Option<f64> {
        self.steps.binary_search(&step).ok().map(|k| self.sup_norm[k])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,sup_norm,phi,sup_u_sq\n");
        for i in 0..self.times.len() {
            let _ = writeln!(out, "{},{},{},{}", self.times[i], self.sup_norm[i], self.phi[i], self.sup_u_sq[i]);
        }
        out
    }

    pub fn sidecar(&self) -> PathSidecar {
        PathSidecar {
            seed: self.seed,
            sigma_l: self.sigma_l,
            blown_up: self.blown_up,
            overflow: self.overflow,
        }
    }
}

/// First checkpoint time with sup-norm at or above `level`.
pub fn sigma_l_of(path: &PathResult, level: f64) -> Option<f64> {
    path.times
        .iter()
        .zip(&path.sup_norm)
        .find(|(_, &s)| s >= level)
        .map(|(&t, _)| t)
}

/// Number of time steps needed to reach the spec horizon.
pub fn step_count(horizon: f64, dt: f64) -> usize {
    (horizon / dt - 1e-9).ceil().max(1.0) as usize
}

pub fn simulate_path(spec: &SpdeSpec, grid: &SpatialGrid, opts: &PathOptions, seed: u64) -> Result<PathResult> {
    simulate_path_with(spec, grid, opts, seed, |_, _, _| {})
}

/// [`simulate_path`] calling `observer(n, t, u)` at every time level.
pub fn simulate_path_with<O>(
    spec: &SpdeSpec,
    grid: &SpatialGrid,
    opts: &PathOptions,
    seed: u64,
    mut observer: O,
) -> Result<PathResult>
where
    O: FnMut(usize, f64, &[f64]),
{
    spec.validate(grid)?;
    if opts.checkpoint_every == 0 {
        return Err(Error::Config("checkpoint_every must be >= 1".into()));
    }
    let dt = opts.dt;
    let dx = grid.dx();
    let nt = step_count(spec.horizon(), dt);
    let (u0, v0) = spec.initial_samples(grid);
    let p = spec.params;
    let f = spec.f_choice;
    let dt2 = dt * dt;
    let ratio = dt / dx;
    let noise_scale = (dt * dx).sqrt();
    let sigma = move |u: f64| p.c2 * u + f.eval(u, p.kappa, p.r);
    let proj = Projector::new(&eigenpair(spec.domain), grid);

    let mut out = PathResult {
        seed,
        steps: Vec::new(),
        times: Vec::new(),
        sup_norm: Vec::new(),
        phi: Vec::new(),
        sup_u_sq: Vec::new(),
        sigma_l: None,
        blown_up: false,
        overflow: false,
    };
    let record = |out: &mut PathResult, n: usize, t: f64, u: &[f64]| -> Result<()> {
        let s = sup_norm(u);
        out.steps.push(n);
        out.times.push(t);
        out.sup_norm.push(s);
        out.phi.push(proj.apply(u)?);
        out.sup_u_sq.push(s * s);
        Ok(())
    };

    let mut row = vec![0.0; grid.nx()];
    observer(0, 0.0, &u0);
    let mut u_init = u0.clone();
    close_boundary(&mut u_init, spec.boundary);
    let s0 = sup_norm(&u_init);
    record(&mut out, 0, 0.0, &u_init)?;
    if s0 >= spec.level {
        out.blown_up = true;
        out.sigma_l = Some(0.0);
        return Ok(out);
    }
    fill_row(seed, 0, noise_scale, &mut row);
    let mut field = LatticeField::start(grid, spec.boundary, &u0, &v0, dt, |j, u| {
        dt2 * (p.c1 * u) + ratio * sigma(u) * row[j]
    })?;
    let mut last_recorded = 0;
    loop {
        let n = field.n;
        let t = n as f64 * dt;
        let s = sup_norm(&field.cur);
        if !s.is_finite() {
            let prior = n - 1;
            if last_recorded != prior {
                let prev = field.prev.clone();
                record(&mut out, prior, prior as f64 * dt, &prev)?;
            }
            out.blown_up = true;
            out.overflow = true;
            out.sigma_l = Some(prior as f64 * dt);
            break;
        }
        observer(n, t, &field.cur);
        let hit = s >= spec.level;
        if hit || n >= nt || n % opts.checkpoint_every == 0 {
            record(&mut out, n, t, &field.cur)?;
            last_recorded = n;
        }
        if hit {
            out.blown_up = true;
            out.sigma_l = Some(t);
            break;
        }
        if n >= nt {
            break;
        }
        fill_row(seed, n as u64, noise_scale, &mut row);
        field.step(|j, u| dt2 * (p.c1 * u) + ratio * sigma(u) * row[j]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn spec(u0: Profile, v0: Profile, f_choice: Nonlinearity) -> SpdeSpec {
        SpdeSpec {
            domain: Interval::new(PI).unwrap(),
            params: PhysParams { c1: 0.0, c2: 0.0, kappa: 2.0, r: 2.0 },
            f_choice,
            t_bound: 1.74,
            u0,
            v0,
            epsilon: 0.5,
            level: 1e3,
            boundary: Boundary::Periodic,
        }
    }

    #[test]
    fn nonlinearity_growth() {
        for u in [-3.0, -0.5, 0.0, 0.7, 2.0] {
            for f in [Nonlinearity::Power, Nonlinearity::AbsPower] {
                assert!(f.eval(u, 2.0, 2.5).abs() >= 2.0 * f64::abs(u).powf(2.5) * (1.0 - 1e-15));
            }
        }
        assert_eq!(Nonlinearity::Power.eval(-2.0, 1.0, 2.0), -4.0);
        assert!(!Nonlinearity::One.satisfies_growth_bound());
        let json = serde_json::to_string(&Nonlinearity::AbsPower).unwrap();
        assert_eq!(json, "\"abs_power\"");
    }

    #[test]
    fn zero_state_stays_zero() {
        let mut s = spec(Profile::Constant(-1.0), Profile::Zero, Nonlinearity::Power);
        s.params.c2 = 1.0;
        let g = SpatialGrid::new(s.domain, 32).unwrap();
        let path = simulate_path(&s, &g, &PathOptions { dt: 0.5 * g.dx(), checkpoint_every: 1 }, 3).unwrap();
        assert!(path.sup_norm.iter().all(|&v| v == 0.0));
        assert!(!path.blown_up && path.sigma_l.is_none());
        assert!(*path.times.last().unwrap() >= s.horizon() - 1e-9);
    }

    #[test]
    fn rejects_threshold_below_initial_data() {
        let mut s = spec(Profile::sine(1, 4.0), Profile::sine(1, 1.0), Nonlinearity::Power);
        s.level = 10.0;
        let g = SpatialGrid::new(s.domain, 32).unwrap();
        assert!(matches!(s.validate(&g), Err(Error::Parameter(_))));
    }

    #[test]
    fn sigma_query_examples() {
        let s = spec(Profile::Constant(-1.0), Profile::Zero, Nonlinearity::Zero);
        let g = SpatialGrid::new(s.domain, 16).unwrap();
        let path = simulate_path(&s, &g, &PathOptions { dt: g.dx(), checkpoint_every: 2 }, 0).unwrap();
        assert_eq!(sigma_l_of(&path, 0.0), Some(0.0));
        assert_eq!(sigma_l_of(&path, 1.0), None);
    }

    #[test]
    fn csv_and_sidecar() {
        let s = spec(Profile::Constant(-1.0), Profile::Zero, Nonlinearity::Zero);
        let g = SpatialGrid::new(s.domain, 16).unwrap();
        let path = simulate_path(&s, &g, &PathOptions { dt: g.dx(), checkpoint_every: 4 }, 11).unwrap();
        let csv = path.to_csv();
        assert!(csv.starts_with("t,sup_norm,phi,sup_u_sq\n"));
        assert_eq!(csv.lines().count(), path.times.len() + 1);
        let json = serde_json::to_value(path.sidecar()).unwrap();
        assert_eq!(json["seed"], 11);
        assert!(json["sigma_L"].is_null());
    }
}
