//! Discretised space-time white noise.
//!
//! Cell `(n, j)` holds `dW = W([t_n, t_n + dt) x [x_j, x_j + dx))`, a
//! `Normal(0, dt dx)` variable. Values come from ChaCha8 keyed by the seed,
//! with stream `n` and word offset `4 j`: every cell consumes exactly two
//! 64-bit outputs and is addressable without generating its predecessors.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::spectral::SpatialGrid;

const WORDS_PER_CELL: u128 = 4;

/// SplitMix64 finaliser.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of path `index` within a campaign.
pub fn path_seed(master: u64, index: u64) -> u64 {
    splitmix64(master.wrapping_add(splitmix64(index)))
}

fn open_unit(x: u64) -> f64 {
    ((x >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Box-Muller from two 64-bit words (cosine branch only).
fn standard_normal(a: u64, b: u64) -> f64 {
    let r = (-2.0 * open_unit(a).ln()).sqrt();
    r * (std::f64::consts::TAU * open_unit(b)).cos()
}

fn row_rng(seed: u64, n: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(n);
    rng
}

/// Standard normal in cell `(n, j)`.
pub fn cell_normal(seed: u64, n: u64, j: u64) -> f64 {
    let mut rng = row_rng(seed, n);
    rng.set_word_pos(WORDS_PER_CELL * j as u128);
    let a = rng.next_u64();
    standard_normal(a, rng.next_u64())
}

/// Fills `out` with the increments of time row `n`, each scaled by `scale`.
pub fn fill_row(seed: u64, n: u64, scale: f64, out: &mut [f64]) {
    let mut rng = row_rng(seed, n);
    for v in out.iter_mut() {
        let a = rng.next_u64();
        *v = scale * standard_normal(a, rng.next_u64());
    }
}

/// Row-major lattice of increments, `nt` rows of `width` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseField {
    pub seed: u64,
    pub nt: usize,
    pub width: usize,
    pub dt: f64,
    pub dx: f64,
    pub values: Vec<f64>,
}

impl NoiseField {
    pub fn get(&self, n: usize, j: usize) -> f64 {
        self.values[n * self.width + j]
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.values[n * self.width..(n + 1) * self.width]
    }

    pub fn cell_variance(&self) -> f64 {
        self.dt * self.dx
    }
}

pub fn sample_noise(grid: &SpatialGrid, dt: f64, nt: usize, seed: u64) -> Result<NoiseField> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Parameter(format!("time step must be > 0, got {dt}")));
    }
    let width = grid.nx();
    let scale = (dt * grid.dx()).sqrt();
    let mut values = vec![0.0; nt * width];
    for (n, row) in values.chunks_mut(width.max(1)).enumerate() {
        fill_row(seed, n as u64, scale, row);
    }
    Ok(NoiseField {
        seed,
        nt,
        width,
        dt,
        dx: grid.dx(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Interval;

    #[test]
    fn cells_are_addressable() {
        let g = SpatialGrid::new(Interval::new(1.0).unwrap(), 16).unwrap();
        let f = sample_noise(&g, 0.01, 5, 42).unwrap();
        let scale = (0.01 * g.dx()).sqrt();
        for &(n, j) in &[(0, 0), (3, 7), (4, 15), (2, 0)] {
            assert_eq!(f.get(n, j), scale * cell_normal(42, n as u64, j as u64));
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let g = SpatialGrid::new(Interval::new(2.0).unwrap(), 32).unwrap();
        let a = sample_noise(&g, 0.05, 10, 7).unwrap();
        let b = sample_noise(&g, 0.05, 10, 7).unwrap();
        let c = sample_noise(&g, 0.05, 10, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn path_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| path_seed(1, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(path_seed(1, 0), path_seed(2, 0));
    }

    #[test]
    fn uniform_map_avoids_zero() {
        assert!(open_unit(0) > 0.0);
        assert!(open_unit(u64::MAX) <= 1.0);
        assert!(standard_normal(0, 0).is_finite());
    }
}
