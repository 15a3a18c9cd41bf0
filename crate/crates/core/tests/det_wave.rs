use blowup_core::bounds::{bound_report, PhysParams, QuadConfig};
use blowup_core::det_wave::{
    comparison_margin, comparison_margin_offset, witness_offset, projection_residual, solve_det, DetProblem, SolveOptions,
};
use blowup_core::spectral::{eigenpair, linear_solution_field, Boundary, Interval, SpatialGrid};
use blowup_core::Profile;
use std::f64::consts::PI;

fn blowup_problem() -> DetProblem {
    let d = Interval::new(PI).unwrap();
    DetProblem::new(d, PhysParams { c1: 0.0, c2: 0.0, kappa: 2.0, r: 2.0 }, Profile::sine(1, 4.0), Profile::sine(1, 1.0))
}

fn free_problem(length: f64, u0: Profile) -> DetProblem {
    let d = Interval::new(length).unwrap();
    DetProblem::new(d, PhysParams { c1: 0.0, c2: 0.0, kappa: 0.0, r: 2.0 }, u0, Profile::Zero)
}

/// Error at `t = J/2`, where the phase error is not masked by `sin(omega t) = 0`.
fn eigenmode_error(nx: usize, length: f64) -> f64 {
    let p = free_problem(length, Profile::sine(1, 1.0));
    let g = SpatialGrid::new(p.domain, nx).unwrap();
    let mut o = SolveOptions::new(0.5 * g.dx(), 0.5 * length, 10.0);
    o.store_fields = true;
    let rec = solve_det(&p, &g, &o).unwrap();
    let h = rec.fields.unwrap();
    let t = *h.times.last().unwrap();
    assert!((t - 0.5 * length).abs() < 1e-9);
    let omega = eigenpair(p.domain).mu1.sqrt();
    h.fields
        .last()
        .unwrap()
        .iter()
        .enumerate()
        .map(|(j, &u)| (u - (omega * t).cos() * (PI * g.node(j) / length).sin()).abs())
        .fold(0.0, f64::max)
}

#[test]
fn eigenmode_converges_at_second_order() {
    let e1 = eigenmode_error(32, 2.0);
    let e2 = eigenmode_error(64, 2.0);
    let e3 = eigenmode_error(128, 2.0);
    assert!(e1 < 1e-2, "{e1}");
    for ratio in [e1 / e2, e2 / e3] {
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn leapfrog_is_exact_at_unit_courant_number() {
    // off-mode data so the image sums actually wrap
    let length = 2.0;
    let u0 = |x: f64| (2.0 * PI * x / length).sin() + 0.3 * (6.0 * PI * x / length).cos();
    let samples: Vec<f64> = (0..=64).map(|j| u0(j as f64 * length / 64.0)).collect();
    let p = free_problem(length, Profile::Tabulated(samples)).with_boundary(Boundary::Periodic);
    let g = SpatialGrid::new(p.domain, 64).unwrap();
    let mut o = SolveOptions::new(g.dx(), length, 10.0);
    o.store_fields = true;
    let h = solve_det(&p, &g, &o).unwrap().fields.unwrap();
    let exact = linear_solution_field(u0, |_| 0.0, length, &g, Boundary::Periodic).unwrap();
    let err = h.fields.last().unwrap().iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-10, "{err}");
}

#[test]
fn blows_up_before_the_bound() {
    let p = blowup_problem();
    let g = SpatialGrid::new(p.domain, 256).unwrap();
    let (u0, v0) = p.initial_samples(&g);
    let rep = bound_report(&u0, &v0, &p.params, &g, &QuadConfig::default()).unwrap();
    let t = rep.t_bound.unwrap();
    let rec = solve_det(&p, &g, &SolveOptions::new(0.5 * g.dx(), t + 1.0, 1e3)).unwrap();
    let sigma = rec.sigma_l.unwrap();
    assert!(rec.blown_up && sigma < t, "{sigma} vs {t}");
    assert!(rec.halvings > 0);
    for w in [1e1, 1e2, 5e2, 1e3].windows(2) {
        assert!(rec.sigma_l_at(w[0]).unwrap() <= rec.sigma_l_at(w[1]).unwrap());
    }
    assert!(rec.phi.iter().zip(&rec.sup_norm).all(|(p, s)| p <= s));
}

#[test]
fn projection_satisfies_the_differential_inequality() {
    let p = blowup_problem();
    let g = SpatialGrid::new(p.domain, 256).unwrap();
    let rec = solve_det(&p, &g, &SolveOptions::new(0.5 * g.dx(), 3.0, 1e3)).unwrap();
    let res = projection_residual(&rec, &p).unwrap();
    let worst = res.iter().filter(|r| r.sup_norm < 1e2).map(|r| r.residual).fold(f64::INFINITY, f64::min);
    assert!(worst >= -1e-3, "{worst}");
}

#[test]
fn linear_mode_has_vanishing_residual() {
    let p = free_problem(PI, Profile::sine(1, 1.0));
    let g = SpatialGrid::new(p.domain, 128).unwrap();
    let rec = solve_det(&p, &g, &SolveOptions::new(0.5 * g.dx(), 2.0, 10.0)).unwrap();
    let res = projection_residual(&rec, &p).unwrap();
    // only the spatial eigenvalue defect mu1 - mu_h = O(dx^2) remains
    assert!(res.iter().all(|r| r.residual.abs() < 1e-3), "{:?}", res.iter().map(|r| r.residual).fold(0.0, f64::max));
}

#[test]
fn comparison_margins() {
    let p = blowup_problem();
    let g = SpatialGrid::new(p.domain, 64).unwrap();
    let sigma = solve_det(&p, &g, &SolveOptions::new(g.dx(), 5.0, 1e3)).unwrap().sigma_l.unwrap();
    let mut o = SolveOptions::new(g.dx(), 0.5 * sigma, 1e3);
    o.store_fields = true;
    o.refine = false;
    let u = solve_det(&p, &g, &o).unwrap().fields.unwrap();

    let own = comparison_margin(&u, &u, &p, &g).unwrap();
    assert_eq!(own.min, 0.0);
    assert!(own.base_defect < 1e-10, "{own:?}");

    let f0 = witness_offset(&u, &p).unwrap();
    let m1 = comparison_margin_offset(&u, &f0, &p, &g).unwrap();
    assert!(m1.min > 0.0, "{m1:?}");
    // the margin never falls below f0 (1 - 1/(A J^2)) with A J^2 > 10 here
    for (level, f) in m1.per_level.iter().zip(&f0.fields) {
        assert!(*level >= 0.9 * f[0]);
    }

    let below = u.map(|_, v| v - 1.0);
    assert!(comparison_margin(&u, &below, &p, &g).unwrap().min < 0.0);
}

#[test]
fn margin_requires_unit_courant_lattice() {
    let p = blowup_problem();
    let g = SpatialGrid::new(p.domain, 32).unwrap();
    let mut o = SolveOptions::new(0.5 * g.dx(), 0.3, 1e3);
    o.store_fields = true;
    let u = solve_det(&p, &g, &o).unwrap().fields.unwrap();
    assert!(comparison_margin(&u, &u, &p, &g).is_err());
    let mut short = u.clone();
    short.times.pop();
    short.fields.pop();
    assert!(comparison_margin(&u, &short, &p, &g).is_err());
}
