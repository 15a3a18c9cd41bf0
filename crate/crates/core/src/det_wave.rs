//! Deterministic comparison problem
//!
//! ```text
//! U_tt = U_xx + kappa^2/4 |U|^r - (c1^2 + c2^2)/2 U,   U(t, 0) = U(t, J) = 0,
//! ```
//!
//! solved by leapfrog, with the eigenprojection `phi(t) = <psi, U(t)>`
//! recorded alongside the sup-norm. Also the lattice check of the mild
//! comparison inequality `v >= I + S * F(v)`.

use std::fmt::Write as _;

use log::warn;

use crate::bounds::PhysParams;
use crate::error::{Error, Result};
use crate::lattice::{close_boundary, sup_norm, LatticeField};
use crate::profile::Profile;
use crate::spectral::{eigenpair, kernel, required_images, Boundary, Interval, Projector, SpatialGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct DetProblem {
    pub domain: Interval,
    pub params: PhysParams,
    pub u0: Profile,
    pub v0: Profile,
    pub boundary: Boundary,
}

impl DetProblem {
    pub fn new(domain: Interval, params: PhysParams, u0: Profile, v0: Profile) -> Self {
        Self {
            domain,
            params,
            u0,
            v0,
            boundary: Boundary::Dirichlet,
        }
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        if !(p.r > 1.0 && p.r.is_finite()) {
            return Err(Error::Parameter(format!("r must be > 1, got {}", p.r)));
        }
        if !(p.kappa >= 0.0 && p.kappa.is_finite() && p.c1.is_finite() && p.c2.is_finite()) {
            return Err(Error::Parameter("kappa must be >= 0 and all coefficients finite".into()));
        }
        self.u0.validate()?;
        self.v0.validate()
    }

    /// `kappa^2/4 |u|^r - (c1^2 + c2^2)/2 u`.
    #[inline]
    pub fn forcing(&self, u: f64) -> f64 {
        self.params.source_coeff() * u.abs().powf(self.params.r) - self.params.damping() * u
    }

    pub fn lambda1(&self) -> f64 {
        eigenpair(self.domain).mu1 + self.params.damping()
    }

    /// Node samples of the initial data, clamped to the boundary condition.
    pub fn initial_samples(&self, grid: &SpatialGrid) -> (Vec<f64>, Vec<f64>) {
        let mut u0 = self.u0.sample(grid);
        let mut v0 = self.v0.sample(grid);
        if self.boundary == Boundary::Dirichlet {
            let nx = grid.nx();
            let scale = 1e-12 * (1.0 + sup_norm(&u0).max(sup_norm(&v0)));
            if [u0[0], u0[nx], v0[0], v0[nx]].iter().any(|v| v.abs() > scale) {
                warn!("initial data does not vanish on the boundary; clamping endpoints to zero");
            }
            close_boundary(&mut u0, Boundary::Dirichlet);
            close_boundary(&mut v0, Boundary::Dirichlet);
        }
        (u0, v0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub dt: f64,
    pub horizon: f64,
    /// Blow-up threshold `L`.
    pub level: f64,
    pub checkpoint_every: usize,
    pub store_fields: bool,
    /// Step halving near the threshold.
    pub refine: bool,
}

impl SolveOptions {
    pub const MAX_HALVINGS: u32 = 20;

    pub fn new(dt: f64, horizon: f64, level: f64) -> Self {
        Self {
            dt,
            horizon,
            level,
            checkpoint_every: 1,
            store_fields: false,
            refine: true,
        }
    }
}

/// Full fields at the recorded checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldHistory {
    pub times: Vec<f64>,
    pub fields: Vec<Vec<f64>>,
}

impl FieldHistory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_value(&self) -> f64 {
        self.fields.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Pointwise map, keeping the time stamps.
    pub fn map<F: Fn(f64, f64) -> f64>(&self, f: F) -> FieldHistory {
        FieldHistory {
            times: self.times.clone(),
            fields: self
                .times
                .iter()
                .zip(&self.fields)
                .map(|(&t, u)| u.iter().map(|&v| f(t, v)).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub sup_norm: Vec<f64>,
    pub phi: Vec<f64>,
    pub sigma_l: Option<f64>,
    pub blown_up: bool,
    pub level: f64,
    pub halvings: u32,
    pub fields: Option<FieldHistory>,
}

impl TrajectoryRecord {
    /// First checkpoint time with sup-norm at or above `level`.
    pub fn sigma_l_at(&self, level: f64) -> Option<f64> {
        self.times
            .iter()
            .zip(&self.sup_norm)
            .find(|(_, &s)| s >= level || s.is_nan())
            .map(|(&t, _)| t)
    }

    /// Sup-norm at time `t` by linear interpolation, `None` outside the record.
    pub fn sup_norm_at(&self, t: f64) -> Option<f64> {
        let k = self.times.iter().position(|&s| s >= t)?;
        if k == 0 {
            return Some(self.sup_norm[0]);
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        Some(self.sup_norm[k - 1] * (1.0 - w) + self.sup_norm[k] * w)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,sup_norm,phi\n");
        for i in 0..self.times.len() {
            let _ = writeln!(out, "{},{},{}", self.times[i], self.sup_norm[i], self.phi[i]);
        }
        out
    }
}

struct Recorder<'a> {
    proj: Projector,
    rec: TrajectoryRecord,
    every: usize,
    since: usize,
    opts: &'a SolveOptions,
}

impl Recorder<'_> {
    fn push(&mut self, t: f64, u: &[f64], force: bool) -> Result<()> {
        self.since += 1;
        if !(force || self.since >= self.every) {
            return Ok(());
        }
        self.since = 0;
        self.rec.times.push(t);
        self.rec.sup_norm.push(sup_norm(u));
        self.rec.phi.push(self.proj.apply(u)?);
        if let Some(f) = self.rec.fields.as_mut() {
            f.times.push(t);
            f.fields.push(u.to_vec());
        }
        Ok(())
    }
}

pub fn solve_det(problem: &DetProblem, grid: &SpatialGrid, opts: &SolveOptions) -> Result<TrajectoryRecord> {
    let (u0, v0) = problem.initial_samples(grid);
    solve_det_from(problem, grid, &u0, &v0, opts)
}

/// [`solve_det`] from explicit node samples instead of the problem's profiles.
pub fn solve_det_from(
    problem: &DetProblem,
    grid: &SpatialGrid,
    u0: &[f64],
    v0: &[f64],
    opts: &SolveOptions,
) -> Result<TrajectoryRecord> {
    problem.validate()?;
    if grid.domain() != problem.domain {
        return Err(Error::Domain("grid and problem domains differ".into()));
    }
    if !(opts.horizon > 0.0) {
        return Err(Error::Precondition(format!("horizon must be > 0, got {}", opts.horizon)));
    }
    if opts.checkpoint_every == 0 {
        return Err(Error::Config("checkpoint_every must be >= 1".into()));
    }
    grid.check_len(u0)?;
    grid.check_len(v0)?;
    let sup0 = sup_norm(u0);
    if !(opts.level > sup0) {
        return Err(Error::Precondition(format!(
            "threshold L = {} must exceed sup|u0| = {sup0}",
            opts.level
        )));
    }
    let boundary = problem.boundary;
    let mut rec = Recorder {
        proj: Projector::new(&eigenpair(problem.domain), grid),
        rec: TrajectoryRecord {
            times: Vec::new(),
            sup_norm: Vec::new(),
            phi: Vec::new(),
            sigma_l: None,
            blown_up: false,
            level: opts.level,
            halvings: 0,
            fields: opts.store_fields.then(|| FieldHistory {
                times: Vec::new(),
                fields: Vec::new(),
            }),
        },
        every: opts.checkpoint_every,
        since: 0,
        opts,
    };
    rec.push(0.0, u0, true)?;

    let dt2 = opts.dt * opts.dt;
    let mut field = LatticeField::start(grid, boundary, u0, v0, opts.dt, |_, u| dt2 * problem.forcing(u))?;
    let end = opts.horizon * (1.0 - 1e-12);
    let mut last_t = 0.0;
    loop {
        let sup = sup_norm(&field.cur);
        if !sup.is_finite() {
            rec.rec.blown_up = true;
            rec.rec.sigma_l = Some(last_t);
            break;
        }
        let done = sup >= opts.level || field.t >= end;
        rec.push(field.t, &field.cur, done)?;
        if sup >= opts.level {
            rec.rec.blown_up = true;
            rec.rec.sigma_l = Some(field.t);
            break;
        }
        if done {
            break;
        }
        if rec.opts.refine && rec.rec.halvings == 0 && sup >= 0.9 * opts.level {
            halve(&mut field, problem);
            rec.rec.halvings += 1;
        }
        loop {
            let dt2 = field.dt * field.dt;
            let next = sup_norm(field.propose(|_, u| dt2 * problem.forcing(u)));
            let overshoot = !next.is_finite() || next >= opts.level;
            if rec.opts.refine && overshoot && rec.rec.halvings < SolveOptions::MAX_HALVINGS {
                halve(&mut field, problem);
                rec.rec.halvings += 1;
                continue;
            }
            break;
        }
        last_t = field.t;
        field.commit();
    }
    Ok(rec.rec)
}

fn halve(field: &mut LatticeField, problem: &DetProblem) {
    let dt2 = field.dt * field.dt;
    field.halve(|_, u| dt2 * problem.forcing(u));
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualPoint {
    pub t: f64,
    pub sup_norm: f64,
    pub residual: f64,
}

/// `phi'' + lambda1 phi - kappa^2/4 |phi|^r` at every interior checkpoint,
/// with `phi''` from the three-point formula on the (possibly non-uniform)
/// checkpoint times.
pub fn projection_residual(record: &TrajectoryRecord, problem: &DetProblem) -> Result<Vec<ResidualPoint>> {
    let n = record.times.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 checkpoints, got {n}"
        )));
    }
    let lambda1 = problem.lambda1();
    let coeff = problem.params.source_coeff();
    let (t, phi) = (&record.times, &record.phi);
    Ok((1..n - 1)
        .filter(|&i| record.sup_norm[i + 1].is_finite())
        .map(|i| {
            let h1 = t[i] - t[i - 1];
            let h2 = t[i + 1] - t[i];
            let acc = 2.0 * (h1 * phi[i + 1] - (h1 + h2) * phi[i] + h2 * phi[i - 1]) / (h1 * h2 * (h1 + h2));
            ResidualPoint {
                t: t[i],
                sup_norm: record.sup_norm[i],
                residual: acc + lambda1 * phi[i] - coeff * phi[i].abs().powf(problem.params.r),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginReport {
    /// Minimum of `v - I - S * F(v)` over the lattice, evaluated relative to `U`.
    pub min: f64,
    pub t_at_min: f64,
    pub x_at_min: f64,
    /// Minimum over space at each time level.
    pub per_level: Vec<f64>,
    /// Largest `|U - I - S * F(U)|` evaluated directly: how well the supplied
    /// history satisfies the lattice integral equation.
    pub base_defect: f64,
}

/// The offset `f0(t) = exp(A J (t - t_f))` of the witness `v1 = U + f0`,
/// with `A = r kappa^2/4 (M + 1)^{r-1} - (c1^2 + c2^2)/2`, `M = max U` and
/// `t_f` the last time of the history.
pub fn witness_offset(u: &FieldHistory, problem: &DetProblem) -> Result<FieldHistory> {
    let tf = *u
        .times
        .last()
        .ok_or_else(|| Error::InsufficientData("empty field history".into()))?;
    let p = &problem.params;
    let m = u.max_value();
    let a = p.r * p.source_coeff() * (m + 1.0).powf(p.r - 1.0) - p.damping();
    let j = problem.domain.length();
    Ok(u.map(|t, _| (a * j * (t - tf)).exp()))
}

/// The witness `v1 = U + f0` itself. Where `f0` falls below the rounding
/// level of `U` the sum no longer carries it; prefer [`comparison_margin_offset`]
/// with [`witness_offset`].
pub fn comparison_witness(u: &FieldHistory, problem: &DetProblem) -> Result<FieldHistory> {
    let f0 = witness_offset(u, problem)?;
    Ok(FieldHistory {
        times: u.times.clone(),
        fields: u
            .fields
            .iter()
            .zip(&f0.fields)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect(),
    })
}

fn extended_sample(u0: &[f64], k: i64, boundary: Boundary) -> f64 {
    let nx = (u0.len() - 1) as i64;
    match boundary {
        Boundary::Periodic => u0[k.rem_euclid(nx) as usize],
        Boundary::Dirichlet => {
            let q = k.rem_euclid(2 * nx);
            if q <= nx {
                u0[q as usize]
            } else {
                -u0[(2 * nx - q) as usize]
            }
        }
    }
}

/// `|b + w|^r - |b|^r` without cancellation when `|w| << |b|`.
fn pow_increment(b: f64, w: f64, r: f64) -> f64 {
    if b != 0.0 && 1.0 + w / b > 0.0 {
        b.abs().powf(r) * (r * (w / b).ln_1p()).exp_m1()
    } else {
        (b + w).abs().powf(r) - b.abs().powf(r)
    }
}

/// Space-time convolution on the unit-Courant lattice.
///
/// A source cell `(m, i)` reaches `(n, j)` only when `(n - m) - (j - i)` is
/// odd, with weight `2 S(t_n - t_m; x_j, y_i) dt w_i` (half weight at
/// `m = 0`); the `K` part of `I` is the lattice d'Alembert average. These are
/// exactly the weights the leapfrog recursion applies, so the leapfrog
/// solution satisfies `U = I + S * F(U)` on the lattice up to rounding.
struct LatticeDuhamel<'a> {
    grid: &'a SpatialGrid,
    boundary: Boundary,
    dt: f64,
    domain: Interval,
}

impl LatticeDuhamel<'_> {
    fn odd_kernel(&self, k: usize, j: usize, i: usize) -> Result<f64> {
        if (k + j + i).is_multiple_of(2) {
            return Ok(0.0);
        }
        let tau = k as f64 * self.dt;
        let n_images = required_images(tau, self.domain.length());
        Ok(2.0 * kernel(self.boundary, tau, self.grid.node(j), self.grid.node(i), self.domain, n_images)?)
    }

    fn free(&self, u0: &[f64], v0: &[f64], n: usize, j: usize) -> Result<f64> {
        let (jp, jm) = (j as i64 + n as i64, j as i64 - n as i64);
        let mut free = 0.5 * (extended_sample(u0, jp, self.boundary) + extended_sample(u0, jm, self.boundary));
        for (i, &v) in v0.iter().enumerate() {
            let w = self.odd_kernel(n, j, i)?;
            if w != 0.0 {
                free += self.grid.trapezoid_weight(i) * w * v;
            }
        }
        Ok(free)
    }

    fn convolve(&self, forcing: &[Vec<f64>], n: usize, j: usize) -> Result<f64> {
        let mut conv = 0.0;
        for (m, f) in forcing.iter().enumerate().take(n) {
            let time_weight = if m == 0 { 0.5 } else { 1.0 };
            let mut row = 0.0;
            for (i, &g) in f.iter().enumerate() {
                let w = self.odd_kernel(n - m, j, i)?;
                if w != 0.0 {
                    row += self.grid.trapezoid_weight(i) * w * g;
                }
            }
            conv += time_weight * self.dt * row;
        }
        Ok(conv)
    }
}

/// Minimum over the lattice of `v - I - S * F(v)` for `v` given as a field
/// history on the same lattice as the solved `U`.
///
/// Equivalent to [`comparison_margin_offset`] with offset `v - U`.
pub fn comparison_margin(
    u: &FieldHistory,
    v: &FieldHistory,
    problem: &DetProblem,
    grid: &SpatialGrid,
) -> Result<MarginReport> {
    check_same_lattice(u, v, grid)?;
    let w = FieldHistory {
        times: v.times.clone(),
        fields: v
            .fields
            .iter()
            .zip(&u.fields)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect(),
    };
    comparison_margin_offset(u, &w, problem, grid)
}

fn check_same_lattice(u: &FieldHistory, v: &FieldHistory, grid: &SpatialGrid) -> Result<()> {
    if u.len() != v.len() || u.times.iter().zip(&v.times).any(|(a, b)| a != b) {
        return Err(Error::Shape {
            expected: u.len(),
            got: v.len(),
        });
    }
    for (a, b) in u.fields.iter().zip(&v.fields) {
        grid.check_len(a)?;
        grid.check_len(b)?;
    }
    Ok(())
}

/// Margin of `v = U + w`. The margin is split as
///
/// ```text
/// v - I - S*F(v) = [U - I - S*F(U)] + [w - S*(F(U + w) - F(U))],
/// ```
///
/// the first bracket being zero on the lattice for the leapfrog solution. It
/// is evaluated directly and reported as `base_defect`; the minimum is taken
/// over the second bracket, which keeps offsets far below the rounding level
/// of `U` resolvable.
pub fn comparison_margin_offset(
    u: &FieldHistory,
    w: &FieldHistory,
    problem: &DetProblem,
    grid: &SpatialGrid,
) -> Result<MarginReport> {
    problem.validate()?;
    if grid.domain() != problem.domain {
        return Err(Error::Domain("grid and problem domains differ".into()));
    }
    check_same_lattice(u, w, grid)?;
    if u.len() < 2 {
        return Err(Error::InsufficientData("need at least 2 time levels".into()));
    }
    let dx = grid.dx();
    let dt = u.times[1] - u.times[0];
    let uniform = u
        .times
        .iter()
        .enumerate()
        .all(|(n, &t)| (t - n as f64 * dt).abs() <= 1e-9 * dt * (n as f64 + 1.0));
    if !uniform || (dt - dx).abs() > 1e-9 * dx {
        return Err(Error::Config(
            "comparison margin needs a uniform history with dt = dx".into(),
        ));
    }
    let nx = grid.nx();
    let boundary = problem.boundary;
    if boundary == Boundary::Periodic && nx % 2 == 1 {
        return Err(Error::Config("periodic comparison margin needs an even number of cells".into()));
    }
    let (u0, v0) = problem.initial_samples(grid);
    let duhamel = LatticeDuhamel {
        grid,
        boundary,
        dt,
        domain: problem.domain,
    };
    let p = &problem.params;
    let base_forcing: Vec<Vec<f64>> = u
        .fields
        .iter()
        .map(|f| f.iter().map(|&x| problem.forcing(x)).collect())
        .collect();
    let forcing_increment: Vec<Vec<f64>> = u
        .fields
        .iter()
        .zip(&w.fields)
        .map(|(b, d)| {
            b.iter()
                .zip(d)
                .map(|(&b, &d)| p.source_coeff() * pow_increment(b, d, p.r) - p.damping() * d)
                .collect()
        })
        .collect();

    let mut report = MarginReport {
        min: f64::INFINITY,
        t_at_min: 0.0,
        x_at_min: 0.0,
        per_level: Vec::with_capacity(u.len()),
        base_defect: 0.0,
    };
    for n in 0..u.len() {
        let mut level_min = f64::INFINITY;
        for j in 0..=nx {
            let base = u.fields[n][j] - duhamel.free(&u0, &v0, n, j)? - duhamel.convolve(&base_forcing, n, j)?;
            report.base_defect = report.base_defect.max(base.abs());
            let margin = w.fields[n][j] - duhamel.convolve(&forcing_increment, n, j)?;
            level_min = level_min.min(margin);
            if margin < report.min {
                report.min = margin;
                report.t_at_min = u.times[n];
                report.x_at_min = grid.node(j);
            }
        }
        report.per_level.push(level_min);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn pi_problem(kappa: f64, u0: Profile, v0: Profile) -> (DetProblem, SpatialGrid) {
        let d = Interval::new(PI).unwrap();
        let p = PhysParams { c1: 0.0, c2: 0.0, kappa, r: 2.0 };
        (DetProblem::new(d, p, u0, v0), SpatialGrid::new(d, 64).unwrap())
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let (p, g) = pi_problem(2.0, Profile::Zero, Profile::Zero);
        let rec = solve_det(&p, &g, &SolveOptions::new(g.dx(), 3.0, 10.0)).unwrap();
        assert!(rec.sup_norm.iter().all(|&s| s == 0.0));
        assert!(rec.sigma_l.is_none() && !rec.blown_up);
        let res = projection_residual(&rec, &p).unwrap();
        assert!(res.iter().all(|r| r.residual == 0.0));
    }

    #[test]
    fn csv_has_header_and_one_row_per_checkpoint() {
        let (p, g) = pi_problem(0.0, Profile::sine(1, 1.0), Profile::Zero);
        let mut o = SolveOptions::new(0.5 * g.dx(), 1.0, 10.0);
        o.checkpoint_every = 4;
        let rec = solve_det(&p, &g, &o).unwrap();
        let csv = rec.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,sup_norm,phi"));
        assert_eq!(lines.count(), rec.times.len());
    }

    #[test]
    fn rejects_bad_options() {
        let (p, g) = pi_problem(2.0, Profile::sine(1, 4.0), Profile::sine(1, 1.0));
        assert!(matches!(
            solve_det(&p, &g, &SolveOptions::new(1.5 * g.dx(), 1.0, 1e3)),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            solve_det(&p, &g, &SolveOptions::new(g.dx(), 1.0, 2.0)),
            Err(Error::Precondition(_))
        ));
        assert!(solve_det(&p, &g, &SolveOptions::new(g.dx(), 0.0, 1e3)).is_err());
    }

    #[test]
    fn residual_needs_three_checkpoints() {
        let rec = TrajectoryRecord {
            times: vec![0.0, 0.1],
            sup_norm: vec![0.0, 0.0],
            phi: vec![0.0, 0.0],
            sigma_l: None,
            blown_up: false,
            level: 1.0,
            halvings: 0,
            fields: None,
        };
        let (p, _) = pi_problem(2.0, Profile::Zero, Profile::Zero);
        assert!(matches!(projection_residual(&rec, &p), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn clamps_boundary_data() {
        let (p, g) = pi_problem(2.0, Profile::Constant(1.0), Profile::Zero);
        let (u0, _) = p.initial_samples(&g);
        assert_eq!(u0[0], 0.0);
        assert_eq!(u0[g.nx()], 0.0);
        assert_eq!(u0[1], 1.0);
    }

    #[test]
    fn extended_samples_are_odd_and_periodic() {
        let u = [0.0, 1.0, 2.0, 0.0];
        assert_eq!(extended_sample(&u, -1, Boundary::Dirichlet), -1.0);
        assert_eq!(extended_sample(&u, 4, Boundary::Dirichlet), -2.0);
        assert_eq!(extended_sample(&u, 7, Boundary::Dirichlet), 1.0);
        assert_eq!(extended_sample(&u, -1, Boundary::Periodic), 2.0);
        assert_eq!(extended_sample(&u, 4, Boundary::Periodic), 1.0);
    }
}
