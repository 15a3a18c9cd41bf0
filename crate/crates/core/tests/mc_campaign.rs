use blowup_core::bounds::{bound_report, PhysParams, QuadConfig};
use blowup_core::mc::{
    isometry_report, margin_series, partial_expectation, run_campaign, run_campaign_with_threads, trimmed_curve,
    trimmed_vs_comparison, wilson, Campaign,
};
use blowup_core::spde::{Nonlinearity, SpdeSpec};
use blowup_core::spectral::{Boundary, Interval, SpatialGrid};
use blowup_core::{Error, Profile};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn blowup_campaign(nx: usize, n_paths: usize) -> Campaign {
    let domain = Interval::new(PI).unwrap();
    let params = PhysParams { c1: 0.0, c2: 0.0, kappa: 2.0, r: 2.0 };
    let grid = SpatialGrid::new(domain, nx).unwrap();
    let (u0, v0) = (Profile::sine(1, 4.0), Profile::sine(1, 1.0));
    let rep = bound_report(&u0.sample(&grid), &v0.sample(&grid), &params, &grid, &QuadConfig::default()).unwrap();
    Campaign {
        spec: SpdeSpec {
            domain,
            params,
            f_choice: Nonlinearity::Power,
            t_bound: rep.t_bound.unwrap(),
            u0,
            v0,
            epsilon: 0.5,
            level: 1e3,
            boundary: Boundary::Dirichlet,
        },
        dt: 0.5 * grid.dx(),
        grid,
        n_paths,
        master_seed: 11,
        delta: 0.1,
        checkpoint_every: 4,
    }
}

#[test]
fn zero_noise_campaign_never_blows_up() {
    let mut c = blowup_campaign(32, 30);
    c.spec.f_choice = Nonlinearity::Zero;
    c.spec.u0 = Profile::Constant(-1.0);
    c.spec.v0 = Profile::Zero;
    c.spec.boundary = Boundary::Periodic;
    let s = run_campaign(&c).unwrap();
    let s = s.summary;
    assert_eq!((s.n_blowup, s.p_hat, s.ci_low), (0, 0.0, 0.0));
    assert!(s.trimmed_second_moment.iter().all(|v| *v == Some(0.0)));
}

#[test]
fn campaign_is_schedule_independent() {
    let c = blowup_campaign(32, 40);
    let a = serde_json::to_string(&run_campaign_with_threads(&c, 1).unwrap().summary).unwrap();
    let b = serde_json::to_string(&run_campaign_with_threads(&c, 3).unwrap().summary).unwrap();
    let d = serde_json::to_string(&run_campaign_with_threads(&c, 8).unwrap().summary).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, d);
}

#[test]
fn blowup_campaign_summary() {
    let c = blowup_campaign(64, 64);
    let out = run_campaign(&c).unwrap();
    let s = &out.summary;
    assert!(s.n_blowup >= 1 && s.ci_low > 0.0);
    assert!(s.ci_low <= s.p_hat && s.p_hat <= s.ci_high);
    assert_eq!(s.sigma_l.len(), c.n_paths);
    assert_eq!(s.checkpoint_times.len(), s.trimmed_second_moment.len());

    // trimming never adds mass
    for (t, u) in s.trimmed_second_moment.iter().zip(&s.untrimmed_second_moment) {
        if let (Some(t), Some(u)) = (t, u) {
            assert!(t <= u);
        }
    }
    let steps = c.checkpoint_steps();
    let third = trimmed_curve(&out.paths, &steps, 1.0 / 3.0).unwrap();
    let m0 = margin_series(&s.untrimmed_second_moment, s).unwrap();
    let m3 = margin_series(&third, s).unwrap();
    for (a, b) in m0.iter().zip(&m3) {
        if let (Some(a), Some(b)) = (a, b) {
            assert!(a >= b);
        }
    }
    assert_eq!(trimmed_vs_comparison(s).unwrap().len(), steps.len());

    let mut bare = s.clone();
    bare.comparison_curve = None;
    assert!(matches!(trimmed_vs_comparison(&bare), Err(Error::Config(_))));
}

#[test]
fn campaign_preconditions() {
    let mut c = blowup_campaign(32, 29);
    assert!(matches!(run_campaign(&c), Err(Error::Parameter(_))));
    c.n_paths = 30;
    c.delta = 0.4;
    assert!(matches!(run_campaign(&c), Err(Error::Parameter(_))));
    c.delta = 0.0;
    c.dt = 2.0 * c.grid.dx();
    assert!(matches!(run_campaign(&c), Err(Error::Config(_))));
}

#[test]
fn partial_expectation_is_monotone_in_delta() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let deltas = [0.0, 0.05, 0.1, 0.2, 0.25, 1.0 / 3.0];
    for _ in 0..1000 {
        let n = 1 + (rng.next_u64() % 60) as usize;
        let v: Vec<f64> = (0..n).map(|_| 10.0 * uniform(&mut rng)).collect();
        let e: Vec<f64> = deltas.iter().map(|&d| partial_expectation(&v, d).unwrap()).collect();
        assert!(e.windows(2).all(|w| w[0] >= w[1]), "{v:?}");
        assert_eq!(e[0], v.iter().sum::<f64>() / n as f64);
    }
}

#[test]
fn wilson_covers_on_bernoulli_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (p, n, reps) = (0.1, 500, 200);
    let mut covered = 0;
    for _ in 0..reps {
        let k = (0..n).filter(|_| uniform(&mut rng) < p).count();
        let (lo, hi) = wilson(k, n);
        if lo <= p && p <= hi {
            covered += 1;
        }
    }
    assert!(covered as f64 >= 0.9 * reps as f64, "{covered}/{reps}");
}

fn square_lattice() -> (SpatialGrid, f64) {
    let g = SpatialGrid::new(Interval::new(1.0).unwrap(), 16).unwrap();
    let dt = g.dx();
    (g, dt)
}

#[test]
fn isometry_trivial_integrands() {
    let (g, dt) = square_lattice();
    let zero = isometry_report(&g, dt, 16, 100, 1, |_, _| 0.0, 0).unwrap();
    assert_eq!((zero.mean, zero.second_moment, zero.z_mean, zero.z_second_moment), (0.0, 0.0, 0.0, 0.0));
    let full = isometry_report(&g, dt, 16, 100, 1, |_, _| 1.0, 0).unwrap();
    let half = isometry_report(&g, dt, 16, 100, 1, |_, j| if j < 8 { 1.0 } else { 0.0 }, 0).unwrap();
    assert_eq!(half.target, 0.5 * full.target);
}

#[test]
fn isometry_z_scores_across_seeds() {
    let (g, dt) = square_lattice();
    let mut large = 0;
    for seed in 0..20 {
        let r = isometry_report(&g, dt, 16, 10_000, 1_000 + seed, |_, _| 1.0, 0).unwrap();
        assert!((r.target - 1.0).abs() < 1e-12);
        if r.z_mean.abs() > 3.0 || r.z_second_moment.abs() > 3.0 {
            large += 1;
        }
    }
    assert!(large <= 1, "{large}");
}
