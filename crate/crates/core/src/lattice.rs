//! Explicit leapfrog stepping on the node lattice of a [`SpatialGrid`].
//!
//! Both PDE solvers advance
//!
//! ```text
//! u^{n+1}_j = 2 u^n_j - u^{n-1}_j + c^2 (u^n_{j+1} - 2 u^n_j + u^n_{j-1}) + s_j(u^n_j),
//! ```
//!
//! with `c = dt/dx` and a solver-specific increment `s_j`, which already
//! carries its powers of `dt` (and, for the stochastic solver, the noise).
//! Periodic fields keep node `nx` as a copy of node `0`; Dirichlet fields pin
//! both endpoints to zero.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::spectral::{Boundary, SpatialGrid};

/// Nodes updated by the scheme.
pub fn active_nodes(boundary: Boundary, nx: usize) -> Range<usize> {
    match boundary {
        Boundary::Periodic => 0..nx,
        Boundary::Dirichlet => 1..nx,
    }
}

/// `u_{j+1} - 2 u_j + u_{j-1}`, wrapping for periodic fields.
#[inline]
pub fn second_difference(u: &[f64], j: usize, boundary: Boundary) -> f64 {
    let nx = u.len() - 1;
    let (left, right) = match boundary {
        Boundary::Periodic => (
            if j == 0 { u[nx - 1] } else { u[j - 1] },
            u[j + 1],
        ),
        Boundary::Dirichlet => (u[j - 1], u[j + 1]),
    };
    right - 2.0 * u[j] + left
}

pub fn close_boundary(u: &mut [f64], boundary: Boundary) {
    let nx = u.len() - 1;
    match boundary {
        Boundary::Periodic => u[nx] = u[0],
        Boundary::Dirichlet => {
            u[0] = 0.0;
            u[nx] = 0.0;
        }
    }
}

pub fn sup_norm(u: &[f64]) -> f64 {
    let mut m = 0.0f64;
    for &v in u {
        if v.is_nan() {
            return f64::NAN;
        }
        m = m.max(v.abs());
    }
    m
}

/// Two consecutive time levels of a leapfrog solution.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeField {
    pub prev: Vec<f64>,
    pub cur: Vec<f64>,
    pub n: usize,
    pub t: f64,
    pub dt: f64,
    dx: f64,
    boundary: Boundary,
    scratch: Vec<f64>,
}

impl LatticeField {
    /// Builds levels 0 and 1, the latter by the Taylor step
    /// `u^1 = u^0 + dt v0 + (c^2 D2 u^0 + s(u^0)) / 2`.
    pub fn start<S>(
        grid: &SpatialGrid,
        boundary: Boundary,
        u0: &[f64],
        v0: &[f64],
        dt: f64,
        mut source: S,
    ) -> Result<Self>
    where
        S: FnMut(usize, f64) -> f64,
    {
        grid.check_len(u0)?;
        grid.check_len(v0)?;
        let dx = grid.dx();
        if !(dt > 0.0) || dt > dx * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "time step {dt} violates the CFL bound dt <= dx = {dx}"
            )));
        }
        let c2 = (dt / dx) * (dt / dx);
        let mut prev = u0.to_vec();
        close_boundary(&mut prev, boundary);
        let mut cur = prev.clone();
        for j in active_nodes(boundary, grid.nx()) {
            let lap = second_difference(&prev, j, boundary);
            cur[j] = prev[j] + dt * v0[j] + 0.5 * (c2 * lap + source(j, prev[j]));
        }
        close_boundary(&mut cur, boundary);
        let scratch = vec![0.0; cur.len()];
        Ok(Self {
            prev,
            cur,
            n: 1,
            t: dt,
            dt,
            dx,
            boundary,
            scratch,
        })
    }

    pub fn courant2(&self) -> f64 {
        (self.dt / self.dx) * (self.dt / self.dx)
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Computes the next level into an internal buffer without committing it.
    pub fn propose<S>(&mut self, mut source: S) -> &[f64]
    where
        S: FnMut(usize, f64) -> f64,
    {
        let c2 = self.courant2();
        let nx = self.cur.len() - 1;
        for j in active_nodes(self.boundary, nx) {
            let u = self.cur[j];
            let lap = second_difference(&self.cur, j, self.boundary);
            self.scratch[j] = 2.0 * u - self.prev[j] + c2 * lap + source(j, u);
        }
        close_boundary(&mut self.scratch, self.boundary);
        &self.scratch
    }

    /// Accepts the last proposal.
    pub fn commit(&mut self) {
        std::mem::swap(&mut self.prev, &mut self.cur);
        std::mem::swap(&mut self.cur, &mut self.scratch);
        self.n += 1;
        self.t += self.dt;
    }

    pub fn step<S>(&mut self, source: S)
    where
        S: FnMut(usize, f64) -> f64,
    {
        self.propose(source);
        self.commit();
    }

    /// Halves `dt`, rebuilding the previous level at `t - dt/2` from a
    /// second-order Taylor expansion about the current level. `source` is the
    /// increment at the old step size.
    pub fn halve<S>(&mut self, mut source: S)
    where
        S: FnMut(usize, f64) -> f64,
    {
        let c2 = self.courant2();
        let nx = self.cur.len() - 1;
        for j in active_nodes(self.boundary, nx) {
            let u = self.cur[j];
            let accel = c2 * second_difference(&self.cur, j, self.boundary) + source(j, u);
            self.scratch[j] = 0.5 * (self.prev[j] + u) - accel / 8.0;
        }
        close_boundary(&mut self.scratch, self.boundary);
        std::mem::swap(&mut self.prev, &mut self.scratch);
        self.dt *= 0.5;
    }
}
