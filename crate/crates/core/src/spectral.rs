//! Spectral geometry of the interval `D = (0, J)`.
//!
//! The first Dirichlet eigenpair is used in closed form,
//! `mu1 = (pi/J)^2`, `psi(x) = (pi / 2J) sin(pi x / J)`, normalised so that
//! `psi` is a probability density on `D`. All projections and
//! convolutions use the composite trapezoid rule on a uniform grid.
//!
//! The wave kernels are available in two boundary modes:
//!
//! - [`Boundary::Periodic`]: the period-`J` image sums
//!   `S(t, x) = sum_n (1/2) 1[-t, t](x + nJ)` and the matching `K`.
//! - [`Boundary::Dirichlet`]: odd reflection, i.e. images of period `2J` with
//!   sign-flipped mirror copies, which is the Green's function of the wave
//!   equation with `u = 0` on the boundary.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Periodic,
    Dirichlet,
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Boundary::Periodic => write!(f, "periodic"),
            Boundary::Dirichlet => write!(f, "dirichlet"),
        }
    }
}

/// The spatial domain `(0, J)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    length: f64,
}

impl Interval {
    pub fn new(length: f64) -> Result<Self> {
        if length.is_finite() && length > 0.0 {
            Ok(Self { length })
        } else {
            Err(Error::Domain(format!("interval length must be positive, got {length}")))
        }
    }

    pub fn length(&self) -> f64 {
        self.length
    }
}

/// First eigenvalue and normalised eigenfunction of `-d^2/dx^2` with Dirichlet conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair {
    pub mu1: f64,
    length: f64,
}

impl EigenPair {
    pub fn psi(&self, x: f64) -> f64 {
        if !(0.0..=self.length).contains(&x) {
            return 0.0;
        }
        PI / (2.0 * self.length) * (PI * x / self.length).sin()
    }

    /// Exact integral of `psi` over `[0, x]`.
    pub fn psi_antiderivative(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, self.length);
        0.5 * (1.0 - (PI * x / self.length).cos())
    }

    pub fn length(&self) -> f64 {
        self.length
    }
}

pub fn eigenpair(domain: Interval) -> EigenPair {
    let ratio = PI / domain.length;
    EigenPair {
        mu1: ratio * ratio,
        length: domain.length,
    }
}

/// Uniform grid with nodes `x_j = j J / nx`, `j = 0..=nx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    domain: Interval,
    nx: usize,
}

impl SpatialGrid {
    pub const MIN_CELLS: usize = 8;

    pub fn new(domain: Interval, nx: usize) -> Result<Self> {
        if nx < Self::MIN_CELLS {
            return Err(Error::Domain(format!(
                "grid needs at least {} cells, got {nx}",
                Self::MIN_CELLS
            )));
        }
        Ok(Self { domain, nx })
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn length(&self) -> f64 {
        self.domain.length
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn n_nodes(&self) -> usize {
        self.nx + 1
    }

    pub fn dx(&self) -> f64 {
        self.domain.length / self.nx as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        if j == self.nx {
            self.domain.length
        } else {
            j as f64 * self.domain.length / self.nx as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.nx).map(|j| self.node(j)).collect()
    }

    /// Composite trapezoid weights (`dx/2` at the ends, `dx` inside).
    pub fn trapezoid_weight(&self, j: usize) -> f64 {
        if j == 0 || j == self.nx {
            0.5 * self.dx()
        } else {
            self.dx()
        }
    }

    pub fn check_len(&self, samples: &[f64]) -> Result<()> {
        if samples.len() == self.n_nodes() {
            Ok(())
        } else {
            Err(Error::Shape {
                expected: self.n_nodes(),
                got: samples.len(),
            })
        }
    }

    pub fn trapezoid(&self, samples: &[f64]) -> Result<f64> {
        self.check_len(samples)?;
        Ok(samples
            .iter()
            .enumerate()
            .map(|(j, v)| self.trapezoid_weight(j) * v)
            .sum())
    }
}

/// Precomputed `w_j psi(x_j)` so projections are a single dot product.
#[derive(Debug, Clone)]
pub struct Projector {
    weights: Vec<f64>,
}

impl Projector {
    pub fn new(eig: &EigenPair, grid: &SpatialGrid) -> Self {
        let weights = (0..=grid.nx())
            .map(|j| grid.trapezoid_weight(j) * eig.psi(grid.node(j)))
            .collect();
        Self { weights }
    }

    pub fn apply(&self, samples: &[f64]) -> Result<f64> {
        if samples.len() != self.weights.len() {
            return Err(Error::Shape {
                expected: self.weights.len(),
                got: samples.len(),
            });
        }
        Ok(self.weights.iter().zip(samples).map(|(w, u)| w * u).sum())
    }

    /// Trapezoid integral of `psi` itself; slightly below 1 on any finite grid.
    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Trapezoid approximation of `phi = int_D psi u dx`.
pub fn project(samples: &[f64], eig: &EigenPair, grid: &SpatialGrid) -> Result<f64> {
    Projector::new(eig, grid).apply(samples)
}

/// Smallest image count for which the truncated kernel sums are exact for
/// `|x| <= J` (periodic) or `x, y in [0, J]` (Dirichlet).
pub fn required_images(t: f64, length: f64) -> usize {
    ((t + length) / length).ceil() as usize
}

fn check_kernel_args(t: f64, domain: Interval, n_images: usize) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Precondition(format!("kernel time must be >= 0, got {t}")));
    }
    let need = required_images(t, domain.length);
    if n_images < need {
        return Err(Error::Precondition(format!(
            "n_images = {n_images} truncates the image sum at t = {t}; need at least {need}"
        )));
    }
    Ok(())
}

#[inline]
fn half_indicator(z: f64, t: f64) -> f64 {
    if z.abs() <= t {
        0.5
    } else {
        0.0
    }
}

/// Periodic wave kernel `S(t, x) = sum_{|n| <= n_images} (1/2) 1[-t, t](x + nJ)`.
pub fn kernel_s(t: f64, x: f64, domain: Interval, n_images: usize) -> Result<f64> {
    check_kernel_args(t, domain, n_images)?;
    let n = n_images as i64;
    Ok((-n..=n)
        .map(|k| half_indicator(x + k as f64 * domain.length, t))
        .sum())
}

/// Dirichlet wave kernel `S_D(t; x, y)` built from odd reflections.
pub fn kernel_s_dirichlet(t: f64, x: f64, y: f64, domain: Interval, n_images: usize) -> Result<f64> {
    check_kernel_args(t, domain, n_images)?;
    let n = n_images as i64;
    let period = 2.0 * domain.length;
    Ok((-n..=n)
        .map(|k| {
            let shift = k as f64 * period;
            half_indicator(x - y + shift, t) - half_indicator(x + y + shift, t)
        })
        .sum())
}

/// `S(t; x, y)` in the requested boundary mode.
pub fn kernel(boundary: Boundary, t: f64, x: f64, y: f64, domain: Interval, n_images: usize) -> Result<f64> {
    match boundary {
        Boundary::Periodic => kernel_s(t, x - y, domain, n_images),
        Boundary::Dirichlet => kernel_s_dirichlet(t, x, y, domain, n_images),
    }
}

/// Extension of a function on `[0, J]` to the real line: periodic with period
/// `J`, or odd about both endpoints with period `2J`.
pub fn extend<F: Fn(f64) -> f64>(f: &F, x: f64, length: f64, boundary: Boundary) -> f64 {
    match boundary {
        Boundary::Periodic => f(x.rem_euclid(length)),
        Boundary::Dirichlet => {
            let y = x.rem_euclid(2.0 * length);
            if y <= length {
                f(y)
            } else {
                -f(2.0 * length - y)
            }
        }
    }
}

/// Antiderivative of the piecewise-linear interpolant of node samples.
struct LinearAntiderivative<'a> {
    grid: &'a SpatialGrid,
    samples: &'a [f64],
    cumulative: Vec<f64>,
}

impl<'a> LinearAntiderivative<'a> {
    fn new(grid: &'a SpatialGrid, samples: &'a [f64]) -> Self {
        let dx = grid.dx();
        let mut cumulative = Vec::with_capacity(samples.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in samples.windows(2) {
            acc += 0.5 * dx * (w[0] + w[1]);
            cumulative.push(acc);
        }
        Self {
            grid,
            samples,
            cumulative,
        }
    }

    fn at(&self, y: f64) -> f64 {
        let nx = self.grid.nx();
        let dx = self.grid.dx();
        let y = y.clamp(0.0, self.grid.length());
        let i = ((y / dx).floor() as usize).min(nx - 1);
        let w = (y - self.grid.node(i)) / dx;
        let value = self.samples[i] * (1.0 - w) + self.samples[i + 1] * w;
        self.cumulative[i] + 0.5 * w * dx * (self.samples[i] + value)
    }

    fn between(&self, a: f64, b: f64) -> f64 {
        let lo = a.max(0.0);
        let hi = b.min(self.grid.length());
        if hi <= lo {
            0.0
        } else {
            self.at(hi) - self.at(lo)
        }
    }
}

/// `int_D S(t; x, y) v(y) dy` for node samples `v`.
///
/// The trapezoid rule is applied to the linear interpolant of `v` with the
/// kernel's jump points inserted as extra nodes, so the result is exact for
/// piecewise-linear data (in particular for constants).
pub fn s_convolution(v: &[f64], t: f64, x: f64, grid: &SpatialGrid, boundary: Boundary) -> Result<f64> {
    grid.check_len(v)?;
    if !(t >= 0.0) {
        return Err(Error::Precondition(format!("time must be >= 0, got {t}")));
    }
    let length = grid.length();
    let n = required_images(t, length) as i64;
    let anti = LinearAntiderivative::new(grid, v);
    let mut total = 0.0;
    match boundary {
        Boundary::Periodic => {
            for k in -n..=n {
                let c = x + k as f64 * length;
                total += 0.5 * anti.between(c - t, c + t);
            }
        }
        Boundary::Dirichlet => {
            for k in -n..=n {
                let shift = k as f64 * 2.0 * length;
                let direct = x + shift;
                let mirror = -x - shift;
                total += 0.5 * anti.between(direct - t, direct + t);
                total -= 0.5 * anti.between(mirror - t, mirror + t);
            }
        }
    }
    Ok(total)
}

/// Free-wave part `I(t, x) = int K(t, x-y) u0(y) dy + int S(t, x-y) v0(y) dy`.
///
/// The `K` term is the exact traveling-wave average of the extended `u0`;
/// the `S` term is [`s_convolution`] of `v0` sampled on `grid`.
pub fn linear_solution_i<U, V>(
    u0: U,
    v0: V,
    t: f64,
    x: f64,
    grid: &SpatialGrid,
    boundary: Boundary,
) -> Result<f64>
where
    U: Fn(f64) -> f64,
    V: Fn(f64) -> f64,
{
    if !(t >= 0.0) {
        return Err(Error::Precondition(format!("time must be >= 0, got {t}")));
    }
    let length = grid.length();
    let k_part = 0.5 * (extend(&u0, x + t, length, boundary) + extend(&u0, x - t, length, boundary));
    let v: Vec<f64> = grid.nodes().into_iter().map(&v0).collect();
    Ok(k_part + s_convolution(&v, t, x, grid, boundary)?)
}

/// [`linear_solution_i`] at every grid node.
pub fn linear_solution_field<U, V>(u0: U, v0: V, t: f64, grid: &SpatialGrid, boundary: Boundary) -> Result<Vec<f64>>
where
    U: Fn(f64) -> f64,
    V: Fn(f64) -> f64,
{
    let v: Vec<f64> = grid.nodes().into_iter().map(&v0).collect();
    let length = grid.length();
    (0..=grid.nx())
        .map(|j| {
            let x = grid.node(j);
            let k_part =
                0.5 * (extend(&u0, x + t, length, boundary) + extend(&u0, x - t, length, boundary));
            Ok(k_part + s_convolution(&v, t, x, grid, boundary)?)
        })
        .collect()
}
