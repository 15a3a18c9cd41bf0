use std::fs;
use std::path::{Path, PathBuf};

use blowup_core::bounds::{bound_report, glassey_ode, BoundReport, OdeOptions, QuadConfig};
use blowup_core::det_wave::{solve_det, DetProblem, SolveOptions};
use blowup_core::mc::{histogram_csv, margin_csv, run_campaign_with_threads, Campaign};
use blowup_core::spde::{simulate_path, PathOptions, SpdeSpec};
use blowup_core::{Error, Result};
use log::{info, warn};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{RunConfig, Setup};

pub const EXIT_OK: u8 = 0;
pub const EXIT_HYPOTHESIS: u8 = 2;

const HISTOGRAM_BINS: usize = 20;

pub struct Context {
    pub config: RunConfig,
    pub output_dir: PathBuf,
    pub seed: Option<u64>,
    pub threads: usize,
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serialises");
    s.push('\n');
    s
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn report_for(ctx: &Context, setup: &Setup) -> Result<BoundReport> {
    let c = &ctx.config;
    bound_report(
        &c.u0.sample(&setup.grid),
        &c.v0.sample(&setup.grid),
        &setup.params,
        &setup.grid,
        &QuadConfig::default(),
    )
}

/// The bound `T`, or the report when the hypotheses fail.
fn require_bound(report: &BoundReport) -> std::result::Result<f64, u8> {
    match report.t_bound {
        Some(t) if report.admissible() => Ok(t),
        _ => {
            println!("{}", to_json(report).trim_end());
            eprintln!("hypotheses H1/H2 do not hold (h1_ok = {}, h2_ok = {})", report.h1_ok, report.h2_ok);
            Err(EXIT_HYPOTHESIS)
        }
    }
}

pub fn bound(ctx: &Context) -> Result<u8> {
    let setup = ctx.config.validate(false)?;
    let report = report_for(ctx, &setup)?;
    print!("{}", to_json(&report));
    Ok(if report.admissible() { EXIT_OK } else { EXIT_HYPOTHESIS })
}

pub fn det_solve(ctx: &Context) -> Result<u8> {
    let c = &ctx.config;
    let setup = c.validate(false)?;
    let report = report_for(ctx, &setup)?;
    let horizon = c
        .horizon
        .or(report.t_bound.map(|t| t + c.epsilon))
        .unwrap_or(c.length);
    let problem = DetProblem::new(setup.domain, setup.params, c.u0.clone(), c.v0.clone()).with_boundary(c.boundary);
    let mut opts = SolveOptions::new(setup.dt, horizon, c.level);
    opts.checkpoint_every = c.checkpoint_every;
    let rec = solve_det(&problem, &setup.grid, &opts)?;
    let summary = json!({
        "sigma_L": rec.sigma_l,
        "T": report.t_bound,
        "horizon": horizon,
        "blown_up": rec.blown_up,
        "halvings": rec.halvings,
        "L": c.level,
        "nx": c.nx,
        "dt": setup.dt,
        "boundary": c.boundary,
    });
    write(&ctx.output_dir.join("det_trajectory.csv"), &rec.to_csv())?;
    write(&ctx.output_dir.join("det_summary.json"), &to_json(&summary))?;
    print!("{}", to_json(&summary));
    Ok(EXIT_OK)
}

fn spde_spec(c: &RunConfig, setup: &Setup, t_bound: f64) -> SpdeSpec {
    SpdeSpec {
        domain: setup.domain,
        params: setup.params,
        f_choice: c.f_choice,
        t_bound,
        u0: c.u0.clone(),
        v0: c.v0.clone(),
        epsilon: c.epsilon,
        level: c.level,
        boundary: c.boundary,
    }
}

pub fn spde_run(ctx: &Context) -> Result<u8> {
    let c = &ctx.config;
    let setup = c.validate(false)?;
    let report = report_for(ctx, &setup)?;
    let t_bound = match require_bound(&report) {
        Ok(t) => t,
        Err(code) => return Ok(code),
    };
    let spec = spde_spec(c, &setup, t_bound);
    spec.validate(&setup.grid)?;
    let seed = ctx.seed.unwrap_or(c.master_seed);
    let opts = PathOptions {
        dt: setup.dt,
        checkpoint_every: c.checkpoint_every,
    };
    let path = simulate_path(&spec, &setup.grid, &opts, seed).map_err(|e| Error::PathFailure {
        seed,
        message: e.to_string(),
    })?;
    let sidecar = to_json(&path.sidecar());
    write(&ctx.output_dir.join(format!("path_{seed}.csv")), &path.to_csv())?;
    write(&ctx.output_dir.join(format!("path_{seed}.json")), &sidecar)?;
    print!("{sidecar}");
    Ok(EXIT_OK)
}

pub fn mc(ctx: &Context) -> Result<u8> {
    let mut c = ctx.config.clone();
    if let Some(seed) = ctx.seed {
        c.master_seed = seed;
    }
    let setup = c.validate(true)?;
    let report = report_for(ctx, &setup)?;
    let t_bound = match require_bound(&report) {
        Ok(t) => t,
        Err(code) => return Ok(code),
    };
    let campaign = Campaign {
        spec: spde_spec(&c, &setup, t_bound),
        grid: setup.grid,
        dt: setup.dt,
        n_paths: c.n_paths,
        master_seed: c.master_seed,
        delta: c.delta,
        checkpoint_every: c.checkpoint_every,
    };
    campaign.validate()?;
    info!("running {} paths on {} threads", c.n_paths, ctx.threads);
    let out = run_campaign_with_threads(&campaign, ctx.threads)?;
    let s = &out.summary;

    let run_dir = ctx.output_dir.join(format!("seed_{}", c.master_seed));
    let mut files = vec!["summary.json", "histogram.csv"];
    write(&run_dir.join("summary.json"), &to_json(s))?;
    write(&run_dir.join("histogram.csv"), &histogram_csv(s, HISTOGRAM_BINS))?;
    match margin_csv(s) {
        Ok(csv) => {
            write(&run_dir.join("margin.csv"), &csv)?;
            files.push("margin.csv");
        }
        Err(e) => warn!("margin.csv not written: {e}"),
    }
    if c.keep_paths {
        for (i, p) in out.paths.iter().enumerate() {
            write(&run_dir.join("paths").join(format!("path_{i:05}.csv")), &p.to_csv())?;
            write(&run_dir.join("paths").join(format!("path_{i:05}.json")), &to_json(&p.sidecar()))?;
        }
    }
    let manifest = json!({
        "spec_hash": hex::encode(Sha256::digest(c.to_json().as_bytes())),
        "grid": { "J": c.length, "nx": c.nx, "dx": setup.grid.dx(), "boundary": c.boundary },
        "dt": setup.dt,
        "T": t_bound,
        "versions": { "blowup-core": blowup_core::VERSION, "blowup-cli": env!("CARGO_PKG_VERSION") },
        "files": files,
        "per_path_csv": c.keep_paths,
    });
    write(&run_dir.join("manifest.json"), &to_json(&manifest))?;
    println!(
        "p_hat = {} (95% CI [{}, {}]); {} of {} paths reached L = {} before t = {}",
        s.p_hat, s.ci_low, s.ci_high, s.n_blowup, s.n_paths, c.level, s.horizon
    );
    println!("summary: {}", run_dir.join("summary.json").display());
    Ok(EXIT_OK)
}

pub fn ode_check(ctx: &Context) -> Result<u8> {
    let c = &ctx.config;
    let setup = c.validate(false)?;
    let report = report_for(ctx, &setup)?;
    let t_bound = match require_bound(&report) {
        Ok(t) => t,
        Err(code) => return Ok(code),
    };
    let opts = OdeOptions::default();
    let ode = glassey_ode(report.alpha, report.beta, report.lambda1, c.kappa, c.r, &opts)?;
    let rel = ode.hitting_time.map(|t| (t - t_bound).abs() / t_bound);
    let out = json!({
        "alpha": report.alpha,
        "beta": report.beta,
        "lambda1": report.lambda1,
        "T": t_bound,
        "T_error": report.t_error,
        "cap": opts.cap,
        "hitting_time": ode.hitting_time,
        "blowup_estimate": ode.blowup_estimate,
        "relative_difference": rel,
        "max_energy_drift": ode.max_energy_drift,
    });
    print!("{}", to_json(&out));
    Ok(EXIT_OK)
}
