//! Monte Carlo campaigns over independent sample paths.
//!
//! Paths run in a dedicated rayon pool and are collected by index; every
//! statistic is then a sequential fold in path order, so a summary depends on
//! the campaign alone and not on the schedule.

use std::fmt::Write as _;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::det_wave::{solve_det, DetProblem, SolveOptions};
use crate::error::{Error, Result};
use crate::noise::{fill_row, path_seed};
use crate::spde::{simulate_path, step_count, PathOptions, PathResult, SpdeSpec};
use crate::spectral::{Boundary, SpatialGrid};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959963984540054;

pub const MIN_PATHS: usize = 30;
pub const MAX_DELTA: f64 = 1.0 / 3.0;

fn check_delta(delta: f64) -> Result<()> {
    if (0.0..=MAX_DELTA).contains(&delta) {
        Ok(())
    } else {
        Err(Error::Parameter(format!("delta must lie in [0, 1/3], got {delta}")))
    }
}

/// The estimator itself only needs a fraction below one; campaigns keep the
/// tighter [`MAX_DELTA`].
fn check_fraction(delta: f64) -> Result<()> {
    if (0.0..1.0).contains(&delta) {
        Ok(())
    } else {
        Err(Error::Parameter(format!("trimming fraction must lie in [0, 1), got {delta}")))
    }
}

/// Empirical `E_delta`: drops the `ceil(delta N)` largest samples and divides
/// the remaining sum by `N`.
pub fn partial_expectation(values: &[f64], delta: f64) -> Result<f64> {
    partial_expectation_by_key(values, values, delta)
}

/// [`partial_expectation`] with the excluded samples chosen by `keys`
/// (largest first, ties broken by position).
pub fn partial_expectation_by_key(values: &[f64], keys: &[f64], delta: f64) -> Result<f64> {
    check_fraction(delta)?;
    if values.is_empty() {
        return Err(Error::Domain("partial expectation of an empty sample".into()));
    }
    if keys.len() != values.len() {
        return Err(Error::Shape {
            expected: values.len(),
            got: keys.len(),
        });
    }
    let n = values.len();
    let drop = excluded_count(n, delta);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]).then(a.cmp(&b)));
    let mut kept = vec![true; n];
    for &i in &order[..drop] {
        kept[i] = false;
    }
    let sum: f64 = values.iter().zip(&kept).filter(|(_, &k)| k).map(|(v, _)| v).sum();
    Ok(sum / n as f64)
}

fn excluded_count(n: usize, delta: f64) -> usize {
    // guard against delta * n landing a hair above an integer
    let raw = delta * n as f64;
    let r = raw.round();
    let c = if (raw - r).abs() <= 1e-9 * n as f64 { r } else { raw.ceil() };
    (c as usize).min(n)
}

/// Wilson score interval at 95%.
pub fn wilson(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = Z95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    let low = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let high = if successes == n { 1.0 } else { (center + half).min(1.0) };
    (low, high)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Campaign {
    pub spec: SpdeSpec,
    pub grid: SpatialGrid,
    pub dt: f64,
    pub n_paths: usize,
    pub master_seed: u64,
    pub delta: f64,
    pub checkpoint_every: usize,
}

impl Campaign {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < MIN_PATHS {
            return Err(Error::Parameter(format!(
                "n_paths must be >= {MIN_PATHS}, got {}",
                self.n_paths
            )));
        }
        check_delta(self.delta)?;
        if self.checkpoint_every == 0 {
            return Err(Error::Config("checkpoint_every must be >= 1".into()));
        }
        if !(self.dt > 0.0) || self.dt > self.grid.dx() * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "time step {} violates the CFL bound dt <= dx = {}",
                self.dt,
                self.grid.dx()
            )));
        }
        self.spec.validate(&self.grid)
    }

    pub fn n_steps(&self) -> usize {
        step_count(self.spec.horizon(), self.dt)
    }

    /// Time-level indices of the common checkpoints.
    pub fn checkpoint_steps(&self) -> Vec<usize> {
        let nt = self.n_steps();
        let mut steps: Vec<usize> = (0..=nt).step_by(self.checkpoint_every).collect();
        if *steps.last().unwrap() != nt {
            steps.push(nt);
        }
        steps
    }

    fn path_options(&self) -> PathOptions {
        PathOptions {
            dt: self.dt,
            checkpoint_every: self.checkpoint_every,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaQuantiles {
    pub q10: Option<f64>,
    pub q25: Option<f64>,
    pub q50: Option<f64>,
    pub q75: Option<f64>,
    pub q90: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub n_paths: usize,
    pub n_blowup: usize,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub master_seed: u64,
    pub delta: f64,
    #[serde(rename = "T_bound")]
    pub t_bound: f64,
    pub horizon: f64,
    pub boundary: Boundary,
    pub nx: usize,
    pub dt: f64,
    pub checkpoint_times: Vec<f64>,
    /// `E_delta[sup_x u^2]` per checkpoint; `None` once a kept path has blown up.
    pub trimmed_second_moment: Vec<Option<f64>>,
    pub untrimmed_second_moment: Vec<Option<f64>>,
    /// `sup_x U` of the comparison problem; `None` after it blows up.
    pub comparison_curve: Option<Vec<Option<f64>>>,
    pub sigma_quantiles: SigmaQuantiles,
    #[serde(rename = "sigma_L")]
    pub sigma_l: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignOutput {
    pub summary: McSummary,
    pub paths: Vec<PathResult>,
}

pub fn run_campaign(c: &Campaign) -> Result<CampaignOutput> {
    run_campaign_with_threads(c, 0)
}

/// `threads = 0` lets rayon pick the worker count.
pub fn run_campaign_with_threads(c: &Campaign, threads: usize) -> Result<CampaignOutput> {
    c.validate()?;
    let opts = c.path_options();
    let results: Vec<(u64, Result<PathResult>)> = in_pool(threads, || {
        (0..c.n_paths as u64)
            .into_par_iter()
            .map(|i| {
                let seed = path_seed(c.master_seed, i);
                (seed, simulate_path(&c.spec, &c.grid, &opts, seed))
            })
            .collect()
    })?;
    let mut paths = Vec::with_capacity(results.len());
    for (seed, r) in results {
        match r {
            Ok(p) => paths.push(p),
            Err(e) => {
                return Err(Error::PathFailure {
                    seed,
                    message: e.to_string(),
                })
            }
        }
    }
    let comparison = comparison_curve(c).map_err(|e| warn!("comparison curve unavailable: {e}")).ok();
    let summary = summarize(c, &paths, comparison)?;
    Ok(CampaignOutput { summary, paths })
}

fn in_pool<T: Send>(threads: usize, work: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(work))
}

/// `sup_x U` at the campaign checkpoints for the unscaled data, Dirichlet
/// conditions and the campaign time step.
pub fn comparison_curve(c: &Campaign) -> Result<Vec<Option<f64>>> {
    let s = &c.spec;
    let problem = DetProblem::new(s.domain, s.params, s.u0.clone(), s.v0.clone());
    let mut opts = SolveOptions::new(c.dt, c.n_steps() as f64 * c.dt, s.level);
    opts.refine = false;
    let rec = solve_det(&problem, &c.grid, &opts)?;
    Ok(c.checkpoint_steps()
        .into_iter()
        .map(|n| {
            rec.sup_norm
                .get(n)
                .copied()
                .filter(|v| v.is_finite() && *v < s.level)
        })
        .collect())
}

/// `E_delta[sup_x u^2]` at each checkpoint, trimming on the overall sup-norm.
pub fn trimmed_curve(paths: &[PathResult], steps: &[usize], delta: f64) -> Result<Vec<Option<f64>>> {
    let keys: Vec<f64> = paths.iter().map(PathResult::peak).collect();
    steps
        .iter()
        .map(|&n| {
            let values: Vec<f64> = paths.iter().map(|p| sup_u_sq_at(p, n)).collect();
            let e = partial_expectation_by_key(&values, &keys, delta)?;
            Ok(e.is_finite().then_some(e))
        })
        .collect()
}

/// `sup_x u^2` at time level `n`, `+inf` from the blow-up level on.
fn sup_u_sq_at(p: &PathResult, n: usize) -> f64 {
    let last = p.steps.last().copied().unwrap_or(0);
    if p.blown_up && n >= last {
        return f64::INFINITY;
    }
    match p.steps.binary_search(&n) {
        Ok(k) => p.sup_u_sq[k],
        Err(_) => f64::INFINITY,
    }
}

fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    let v = sorted[rank - 1];
    v.is_finite().then_some(v)
}

pub fn summarize(c: &Campaign, paths: &[PathResult], comparison: Option<Vec<Option<f64>>>) -> Result<McSummary> {
    let horizon = c.spec.horizon();
    let n = paths.len();
    if n == 0 {
        return Err(Error::InsufficientData("campaign produced no paths".into()));
    }
    let sigma: Vec<Option<f64>> = paths.iter().map(|p| p.sigma_l).collect();
    let n_blowup = sigma.iter().filter(|s| s.is_some_and(|t| t < horizon)).count();
    let (ci_low, ci_high) = wilson(n_blowup, n);
    let mut sorted: Vec<f64> = sigma.iter().map(|s| s.unwrap_or(f64::INFINITY)).collect();
    sorted.sort_by(f64::total_cmp);
    let steps = c.checkpoint_steps();
    Ok(McSummary {
        n_paths: n,
        n_blowup,
        p_hat: n_blowup as f64 / n as f64,
        ci_low,
        ci_high,
        master_seed: c.master_seed,
        delta: c.delta,
        t_bound: c.spec.t_bound,
        horizon,
        boundary: c.spec.boundary,
        nx: c.grid.nx(),
        dt: c.dt,
        checkpoint_times: steps.iter().map(|&s| s as f64 * c.dt).collect(),
        trimmed_second_moment: trimmed_curve(paths, &steps, c.delta)?,
        untrimmed_second_moment: trimmed_curve(paths, &steps, 0.0)?,
        comparison_curve: comparison,
        sigma_quantiles: SigmaQuantiles {
            q10: quantile(&sorted, 0.10),
            q25: quantile(&sorted, 0.25),
            q50: quantile(&sorted, 0.50),
            q75: quantile(&sorted, 0.75),
            q90: quantile(&sorted, 0.90),
        },
        sigma_l: sigma,
    })
}

/// `E_delta[sup_x u^2](t) - sup_x U(t)` where both are defined.
pub fn trimmed_vs_comparison(summary: &McSummary) -> Result<Vec<Option<f64>>> {
    margin_series(&summary.trimmed_second_moment, summary)
}

/// As [`trimmed_vs_comparison`] for an arbitrary trimmed curve on the same checkpoints.
pub fn margin_series(curve: &[Option<f64>], summary: &McSummary) -> Result<Vec<Option<f64>>> {
    let cmp = summary
        .comparison_curve
        .as_ref()
        .ok_or_else(|| Error::Config("summary has no comparison curve".into()))?;
    if cmp.len() != curve.len() {
        return Err(Error::Shape {
            expected: curve.len(),
            got: cmp.len(),
        });
    }
    Ok(curve
        .iter()
        .zip(cmp)
        .map(|(a, b)| match (a, b) {
            (Some(a), Some(b)) => Some(a - b),
            _ => None,
        })
        .collect())
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `t,trimmed_sup_u_sq,comparison_sup_u,margin`, blank where undefined.
pub fn margin_csv(summary: &McSummary) -> Result<String> {
    let margin = trimmed_vs_comparison(summary)?;
    let cmp = summary.comparison_curve.as_ref().expect("checked by trimmed_vs_comparison");
    let mut out = String::from("t,trimmed_sup_u_sq,comparison_sup_u,margin\n");
    for i in 0..summary.checkpoint_times.len() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            summary.checkpoint_times[i],
            opt_cell(summary.trimmed_second_moment[i]),
            opt_cell(cmp[i]),
            opt_cell(margin[i])
        );
    }
    Ok(out)
}

/// Histogram of sigma_L over `[0, horizon]`; censored paths are not binned.
pub fn histogram_csv(summary: &McSummary, bins: usize) -> String {
    let bins = bins.max(1);
    let width = summary.horizon / bins as f64;
    let mut counts = vec![0usize; bins];
    for t in summary.sigma_l.iter().flatten() {
        let k = ((t / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let mut out = String::from("bin_start,bin_end,count\n");
    for (k, c) in counts.iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", k as f64 * width, (k + 1) as f64 * width, c);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsometryReport {
    pub n_paths: usize,
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
    pub target: f64,
    pub z_mean: f64,
    pub z_second_moment: f64,
}

/// Monte Carlo moments of `sum_{n,j} v(n, j) dW_{n,j}` over `nt` rows of the
/// noise lattice of `grid`.
pub fn isometry_report<V>(
    grid: &SpatialGrid,
    dt: f64,
    nt: usize,
    n_paths: usize,
    master_seed: u64,
    integrand: V,
    threads: usize,
) -> Result<IsometryReport>
where
    V: Fn(usize, usize) -> f64 + Sync,
{
    if n_paths < 2 {
        return Err(Error::InsufficientData("need at least 2 paths".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::Parameter(format!("time step must be > 0, got {dt}")));
    }
    let width = grid.nx();
    let cell = dt * grid.dx();
    let weights: Vec<f64> = (0..nt).flat_map(|n| (0..width).map(move |j| (n, j))).map(|(n, j)| integrand(n, j)).collect();
    if weights.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("integrand must be bounded".into()));
    }
    let target: f64 = weights.iter().map(|v| v * v * cell).sum();
    let scale = cell.sqrt();
    let integrals: Vec<f64> = in_pool(threads, || {
        (0..n_paths as u64)
            .into_par_iter()
            .map(|i| {
                let seed = path_seed(master_seed, i);
                let mut row = vec![0.0; width];
                let mut acc = 0.0;
                for n in 0..nt {
                    fill_row(seed, n as u64, scale, &mut row);
                    acc += weights[n * width..(n + 1) * width].iter().zip(&row).map(|(w, d)| w * d).sum::<f64>();
                }
                acc
            })
            .collect()
    })?;
    let nf = n_paths as f64;
    let mean = integrals.iter().sum::<f64>() / nf;
    let second_moment = integrals.iter().map(|v| v * v).sum::<f64>() / nf;
    let variance = integrals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let (z_mean, z_second_moment) = if target > 0.0 {
        (mean / (target / nf).sqrt(), (second_moment - target) / (target * (2.0 / nf).sqrt()))
    } else {
        (0.0, 0.0)
    };
    Ok(IsometryReport {
        n_paths,
        mean,
        second_moment,
        variance,
        target,
        z_mean,
        z_second_moment,
    })
}
