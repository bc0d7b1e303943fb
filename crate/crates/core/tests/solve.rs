use ncstokes::assembly::{assemble, compute_errors, interpolate_pressure, QuadratureConfig};
use ncstokes::convergence::run_level;
use ncstokes::mesh::build_cube_mesh;
use ncstokes::problem::{LinearPressure, ManufacturedProblem};
use ncstokes::solver::{solve_stokes, solve_stokes_with, Ordering};
use ncstokes::space::DofMap;
use ncstokes::sparse::norm;

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn linear_pressure_is_reproduced_exactly() {
    for n in [1, 2, 4] {
        let mesh = build_cube_mesh(n).unwrap();
        let dm = DofMap::new(&mesh);
        let sys = assemble(&mesh, &dm, |x| LinearPressure.force(x), &QuadratureConfig::default()).unwrap();
        let sol = solve_stokes(&sys).unwrap();
        let exact = interpolate_pressure(&mesh, &dm, |x| x[0] - 0.5);
        assert!(sol.velocity.iter().all(|v| v.abs() <= 1e-10), "n = {n}");
        assert!(max_abs_diff(&sol.pressure, &exact) <= 1e-10, "n = {n}");
        let e = compute_errors(&mesh, &dm, &sol.velocity, &sol.pressure, &LinearPressure, 10).unwrap();
        assert!(e.l2_velocity <= 1e-10 && e.h1_broken <= 1e-10 && e.l2_pressure <= 1e-10);
    }
}

#[test]
fn reversed_ordering_gives_the_same_solution() {
    let mesh = build_cube_mesh(4).unwrap();
    let dm = DofMap::new(&mesh);
    let p = ManufacturedProblem;
    let sys = assemble(&mesh, &dm, |x| p.force(x), &QuadratureConfig::default()).unwrap();
    let a = solve_stokes_with(&sys, Ordering::Natural).unwrap();
    let b = solve_stokes_with(&sys, Ordering::Reversed).unwrap();
    assert!(max_abs_diff(&a.velocity, &b.velocity) <= 1e-8 * norm(&a.velocity));
    assert!(max_abs_diff(&a.pressure, &b.pressure) <= 1e-8 * norm(&a.pressure));
}

#[test]
fn error_quadrature_degree_is_converged_at_level_3() {
    let base = run_level(3, &QuadratureConfig { matrix_degree: 4, data_degree: 10 }, Ordering::Natural).unwrap();
    let fine = run_level(3, &QuadratureConfig { matrix_degree: 4, data_degree: 12 }, Ordering::Natural).unwrap();
    let rel = |a: f64, b: f64| (a - b).abs() / b;
    assert!(rel(base.errors.l2_velocity, fine.errors.l2_velocity) < 1e-3);
    assert!(rel(base.errors.h1_broken, fine.errors.h1_broken) < 1e-3);
    assert!(rel(base.errors.l2_pressure, fine.errors.l2_pressure) < 1e-3);
}

#[test]
fn solves_are_deterministic() {
    let mesh = build_cube_mesh(2).unwrap();
    let dm = DofMap::new(&mesh);
    let p = ManufacturedProblem;
    let cfg = QuadratureConfig::default();
    let s1 = assemble(&mesh, &dm, |x| p.force(x), &cfg).unwrap();
    let s2 = assemble(&mesh, &dm, |x| p.force(x), &cfg).unwrap();
    assert_eq!(s1.a, s2.a);
    assert_eq!(s1.b, s2.b);
    assert_eq!(s1.load, s2.load);
    let a = solve_stokes(&s1).unwrap();
    let b = solve_stokes(&s2).unwrap();
    assert_eq!(a.velocity, b.velocity);
    assert_eq!(a.pressure, b.pressure);
}

#[test]
fn solution_satisfies_the_invariants() {
    let r = run_level(3, &QuadratureConfig::default(), Ordering::Natural).unwrap();
    assert!(r.stats.momentum_residual <= 1e-9);
    assert!(r.stats.divergence_residual <= 1e-9);
    assert!(r.stats.mean_residual <= 1e-10);
    assert!(r.stats.null_probe <= 1e-6);
}

#[test]
fn zero_discrete_solution_measures_the_exact_norms() {
    let mesh = build_cube_mesh(1).unwrap();
    let dm = DofMap::new(&mesh);
    let u = vec![0.0; dm.num_velocity()];
    let p = vec![0.0; dm.num_pressure()];
    let e = compute_errors(&mesh, &dm, &u, &p, &ManufacturedProblem, 14).unwrap();
    assert!(e.l2_velocity > 0.0 && e.h1_broken > 0.0 && e.l2_pressure > 0.0);
}
