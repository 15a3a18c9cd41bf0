//! Run configuration: one flat JSON document shared by every subcommand.

use std::path::{Path, PathBuf};

use blowup_core::bounds::PhysParams;
use blowup_core::mc::MAX_DELTA;
use blowup_core::spde::Nonlinearity;
use blowup_core::spectral::{Boundary, Interval, SpatialGrid};
use blowup_core::{Error, Profile, Result};
use serde::{Deserialize, Serialize};

fn default_cfl() -> f64 {
    0.5
}

fn default_level() -> f64 {
    1e3
}

fn default_epsilon() -> f64 {
    0.5
}

fn default_paths() -> usize {
    512
}

fn default_delta() -> f64 {
    0.1
}

fn default_checkpoint() -> usize {
    1
}

fn default_boundary() -> Boundary {
    Boundary::Dirichlet
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "J")]
    pub length: f64,
    #[serde(default)]
    pub c1: f64,
    #[serde(default)]
    pub c2: f64,
    pub kappa: f64,
    pub r: f64,
    #[serde(default)]
    pub f_choice: Nonlinearity,
    pub u0: Profile,
    pub v0: Profile,
    pub nx: usize,
    /// `dt / dx`.
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(rename = "L", default = "default_level")]
    pub level: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
    /// Deterministic runs only; defaults to `T + epsilon`.
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default = "default_checkpoint")]
    pub checkpoint_every: usize,
    /// Keep one CSV per Monte Carlo path.
    #[serde(default)]
    pub keep_paths: bool,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// Typed objects built from a validated configuration.
#[derive(Debug, Clone)]
pub struct Setup {
    pub domain: Interval,
    pub grid: SpatialGrid,
    pub params: PhysParams,
    pub dt: f64,
}

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::Config(format!(
                "{origin}:{}:{}: {}",
                e.line(),
                e.column(),
                strip_position(&e.to_string())
            ))
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self, campaign: bool) -> Result<Setup> {
        let domain = Interval::new(self.length)?;
        let grid = SpatialGrid::new(domain, self.nx)?;
        let params = PhysParams::new(self.c1, self.c2, self.kappa, self.r)?;
        self.u0.validate()?;
        self.v0.validate()?;
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::Config(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.level > 0.0 && self.level.is_finite()) {
            return Err(Error::Parameter(format!("L must be positive and finite, got {}", self.level)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Parameter(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if let Some(h) = self.horizon {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::Parameter(format!("horizon must be positive, got {h}")));
            }
        }
        if self.checkpoint_every == 0 {
            return Err(Error::Config("checkpoint_every must be >= 1".into()));
        }
        if !(0.0..=MAX_DELTA).contains(&self.delta) {
            return Err(Error::Parameter(format!("delta must lie in [0, 1/3], got {}", self.delta)));
        }
        if campaign && self.n_paths < blowup_core::mc::MIN_PATHS {
            return Err(Error::Parameter(format!("n_paths must be >= 30, got {}", self.n_paths)));
        }
        Ok(Setup {
            domain,
            dt: self.cfl * grid.dx(),
            grid,
            params,
        })
    }
}

/// serde_json appends " at line X column Y"; the prefix already carries it.
fn strip_position(msg: &str) -> &str {
    msg.rfind(" at line ").map_or(msg, |i| &msg[..i])
}
