//! Assembly of the discrete Stokes system and broken-norm error evaluation.
//!
//! The discrete problem is: find `u_h ∈ V_h`, `p_h ∈ P_h` with
//!
//! ```text
//! (∇_h u_h, ∇_h v) − (div_h v, p_h) = (f, v)   for all v ∈ V_h
//! (div_h u_h, q)                    = 0        for all q ∈ P_h
//! ```
//!
//! giving the blocks `A_ij = (∇_h φ_j, ∇_h φ_i)` and `B_kj = (div_h φ_j, q_k)`.
//! The pressure basis is nodal P1 per tet, so `q_k = λ_i` on its tet.

use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::Serialize;

use crate::basis::{BarycentricPoint, LocalShapes};
use crate::error::{invalid, Result};
use crate::mesh::{TetMesh, Vec3};
use crate::quadrature::{tet_rule, TetRule};
use crate::space::{DofCounts, DofMap, LocalVelocityBasis};
use crate::sparse::{norm, CsrMatrix};

/// Quadrature degrees used by assembly and error evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct QuadratureConfig {
    /// Bilinear forms (all integrands are polynomials of degree ≤ 4).
    pub matrix_degree: usize,
    /// Load vector and error integrals.
    pub data_degree: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { matrix_degree: 4, data_degree: 10 }
    }
}

/// Assembled saddle-point system.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub counts: DofCounts,
    /// Broken-gradient Gram matrix, `n_u × n_u`.
    pub a: CsrMatrix,
    /// Divergence coupling, `n_p × n_u`.
    pub b: CsrMatrix,
    pub load: Vec<f64>,
    /// `c_k = ∫_Ω q_k`, the pressure-mean functional.
    pub c: Vec<f64>,
}

/// Exact solution used for error measurement.
pub trait ExactSolution: Sync {
    fn velocity(&self, x: &Vec3) -> Vec3;
    /// `G[c][d] = ∂u_c / ∂x_d`
    fn velocity_gradient(&self, x: &Vec3) -> Matrix3<f64>;
    fn pressure(&self, x: &Vec3) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorReport {
    pub level: Option<u32>,
    pub h: f64,
    pub l2_velocity: f64,
    pub h1_broken: f64,
    pub l2_pressure: f64,
}

struct Element {
    basis: LocalVelocityBasis,
    a: Vec<f64>,
    b: Vec<[f64; 4]>,
}

fn element_matrices(mesh: &TetMesh, dofmap: &DofMap, rule: &TetRule, tet: usize) -> Element {
    let geom = &mesh.geometry[tet];
    let basis = dofmap.local_velocity_basis(mesh, tet);
    let n = basis.len();
    let mut a = vec![0.0; n * n];
    let mut b = vec![[0.0; 4]; n];
    for (p, w) in rule.iter() {
        let wt = w * geom.volume;
        let shapes = LocalShapes::eval(&BarycentricPoint(*p), geom);
        let scalars: Vec<_> = basis.functions.iter().map(|f| f.scalar(&shapes)).collect();
        for i in 0..n {
            let fi = &basis.functions[i];
            let div_i = fi.direction.dot(&scalars[i].gradient);
            for k in 0..4 {
                b[i][k] += wt * p[k] * div_i;
            }
            for j in i..n {
                let fj = &basis.functions[j];
                let dd = fi.direction.dot(&fj.direction);
                if dd != 0.0 {
                    a[i * n + j] += wt * dd * scalars[i].gradient.dot(&scalars[j].gradient);
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            a[i * n + j] = a[j * n + i];
        }
    }
    Element { basis, a, b }
}

/// Assembles `A`, `B`, the load `(f, φ_i)` and the pressure-mean vector.
pub fn assemble<F>(mesh: &TetMesh, dofmap: &DofMap, f: F, config: &QuadratureConfig) -> Result<SaddleSystem>
where
    F: Fn(&Vec3) -> Vec3 + Sync,
{
    let matrix_rule = tet_rule(config.matrix_degree)?;
    let data_rule = tet_rule(config.data_degree)?;
    if matrix_rule.degree < 2 {
        return Err(invalid("matrix quadrature must be exact for degree 2"));
    }
    let n_u = dofmap.num_velocity();
    let n_p = dofmap.num_pressure();

    let elements: Vec<(Element, Vec<f64>)> = (0..mesh.num_tets())
        .into_par_iter()
        .map(|t| {
            let el = element_matrices(mesh, dofmap, &matrix_rule, t);
            let geom = &mesh.geometry[t];
            let mut load = vec![0.0; el.basis.len()];
            for (p, w) in data_rule.iter() {
                let lambda = BarycentricPoint(*p);
                let fx = f(&geom.point(p));
                let shapes = LocalShapes::eval(&lambda, geom);
                for (i, func) in el.basis.functions.iter().enumerate() {
                    load[i] += w * geom.volume * fx.dot(&func.value(&shapes));
                }
            }
            (el, load)
        })
        .collect();

    let mut a_trip = Vec::new();
    let mut b_trip = Vec::new();
    let mut load = vec![0.0; n_u];
    let mut c = vec![0.0; n_p];
    for (t, (el, el_load)) in elements.iter().enumerate() {
        let n = el.basis.len();
        for (i, fi) in el.basis.functions.iter().enumerate() {
            for (j, fj) in el.basis.functions.iter().enumerate() {
                let v = el.a[i * n + j];
                if v != 0.0 {
                    a_trip.push((fi.dof, fj.dof, v));
                }
            }
            for k in 0..4 {
                b_trip.push((dofmap.pressure_dof(t, k), fi.dof, el.b[i][k]));
            }
            load[fi.dof] += el_load[i];
        }
        for k in 0..4 {
            c[dofmap.pressure_dof(t, k)] = mesh.geometry[t].volume / 4.0;
        }
    }
    Ok(SaddleSystem {
        counts: dofmap.counts,
        a: CsrMatrix::from_triplets(n_u, n_u, a_trip),
        b: CsrMatrix::from_triplets(n_p, n_u, b_trip),
        load,
        c,
    })
}

/// Velocity mass matrix `(φ_j, φ_i)`.
pub fn velocity_mass(mesh: &TetMesh, dofmap: &DofMap, degree: usize) -> Result<CsrMatrix> {
    let rule = tet_rule(degree.max(4))?;
    let n_u = dofmap.num_velocity();
    let locals: Vec<(LocalVelocityBasis, Vec<f64>)> = (0..mesh.num_tets())
        .into_par_iter()
        .map(|t| {
            let geom = &mesh.geometry[t];
            let basis = dofmap.local_velocity_basis(mesh, t);
            let n = basis.len();
            let mut m = vec![0.0; n * n];
            for (p, w) in rule.iter() {
                let shapes = LocalShapes::eval(&BarycentricPoint(*p), geom);
                let vals: Vec<Vec3> = basis.functions.iter().map(|f| f.value(&shapes)).collect();
                for i in 0..n {
                    for j in 0..n {
                        m[i * n + j] += w * geom.volume * vals[i].dot(&vals[j]);
                    }
                }
            }
            (basis, m)
        })
        .collect();
    let mut trip = Vec::new();
    for (basis, m) in &locals {
        let n = basis.len();
        for (i, fi) in basis.functions.iter().enumerate() {
            for (j, fj) in basis.functions.iter().enumerate() {
                if m[i * n + j] != 0.0 {
                    trip.push((fi.dof, fj.dof, m[i * n + j]));
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(n_u, n_u, trip))
}

/// Block-diagonal pressure mass matrix, exact: `∫_T λ_i λ_j = |T| (1 + δ_ij) / 20`.
pub fn pressure_mass(mesh: &TetMesh, dofmap: &DofMap) -> CsrMatrix {
    let n_p = dofmap.num_pressure();
    let mut trip = Vec::with_capacity(16 * mesh.num_tets());
    for (t, g) in mesh.geometry.iter().enumerate() {
        for i in 0..4 {
            for j in 0..4 {
                let v = g.volume * if i == j { 2.0 } else { 1.0 } / 20.0;
                trip.push((dofmap.pressure_dof(t, i), dofmap.pressure_dof(t, j), v));
            }
        }
    }
    CsrMatrix::from_triplets(n_p, n_p, trip)
}

/// Nodal interpolation of a scalar field into the discontinuous P1 space.
pub fn interpolate_pressure(mesh: &TetMesh, dofmap: &DofMap, p: impl Fn(&Vec3) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; dofmap.num_pressure()];
    for (t, tet) in mesh.tets.iter().enumerate() {
        for (i, &v) in tet.iter().enumerate() {
            out[dofmap.pressure_dof(t, i)] = p(&mesh.vertices[v]);
        }
    }
    out
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(invalid(format!("{what} has length {got}, expected {want}")));
    }
    Ok(())
}

/// `‖u − u_h‖_0`, `‖∇_h(u − u_h)‖_0` and the mean-free `‖p − p_h‖_0`.
///
/// Both pressures have their own mean subtracted before the difference is
/// measured.
pub fn compute_errors<E: ExactSolution>(
    mesh: &TetMesh,
    dofmap: &DofMap,
    velocity: &[f64],
    pressure: &[f64],
    exact: &E,
    degree: usize,
) -> Result<ErrorReport> {
    check_len("velocity vector", velocity.len(), dofmap.num_velocity())?;
    check_len("pressure vector", pressure.len(), dofmap.num_pressure())?;
    let rule = tet_rule(degree)?;

    let discrete_pressure = |t: usize, l: &[f64; 4]| -> f64 {
        (0..4).map(|i| l[i] * pressure[dofmap.pressure_dof(t, i)]).sum()
    };

    // pass 1: velocity errors and pressure means
    let per_tet: Vec<[f64; 4]> = (0..mesh.num_tets())
        .into_par_iter()
        .map(|t| {
            let geom = &mesh.geometry[t];
            let basis = dofmap.local_velocity_basis(mesh, t);
            let mut acc = [0.0; 4];
            for (p, w) in rule.iter() {
                let wt = w * geom.volume;
                let x = geom.point(p);
                let shapes = LocalShapes::eval(&BarycentricPoint(*p), geom);
                let mut uh = Vec3::zeros();
                let mut guh = Matrix3::zeros();
                for f in &basis.functions {
                    let coef = velocity[f.dof];
                    if coef != 0.0 {
                        uh += f.value(&shapes) * coef;
                        guh += f.gradient(&shapes) * coef;
                    }
                }
                acc[0] += wt * (exact.velocity(&x) - uh).norm_squared();
                acc[1] += wt * (exact.velocity_gradient(&x) - guh).norm_squared();
                acc[2] += wt * exact.pressure(&x);
                acc[3] += wt * discrete_pressure(t, p);
            }
            acc
        })
        .collect();
    let mut sums = [0.0; 4];
    for acc in &per_tet {
        for k in 0..4 {
            sums[k] += acc[k];
        }
    }
    let volume = mesh.total_volume();
    let mean_p = sums[2] / volume;
    let mean_ph = sums[3] / volume;

    // pass 2: mean-free pressure error
    let per_tet_p: Vec<f64> = (0..mesh.num_tets())
        .into_par_iter()
        .map(|t| {
            let geom = &mesh.geometry[t];
            rule.integrate(geom.volume, |p| {
                let x = geom.point(p);
                let e = (exact.pressure(&x) - mean_p) - (discrete_pressure(t, p) - mean_ph);
                e * e
            })
        })
        .collect();
    let ep2: f64 = per_tet_p.iter().sum();

    Ok(ErrorReport {
        level: None,
        h: mesh.h(),
        l2_velocity: sums[0].sqrt(),
        h1_broken: sums[1].sqrt(),
        l2_pressure: ep2.sqrt(),
    })
}

/// `‖B u_h‖ / (‖B‖_F ‖u_h‖)`, zero for `u_h = 0`.
pub fn divergence_residual(system: &SaddleSystem, velocity: &[f64]) -> f64 {
    let un = norm(velocity);
    if un == 0.0 {
        return 0.0;
    }
    norm(&system.b.mul_vec(velocity)) / (system.b.frobenius_norm() * un)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_cube_mesh;

    fn setup(n: usize) -> (TetMesh, DofMap) {
        let mesh = build_cube_mesh(n).unwrap();
        let dm = DofMap::new(&mesh);
        (mesh, dm)
    }

    #[test]
    fn zero_force_gives_zero_load() {
        let (mesh, dm) = setup(2);
        let sys = assemble(&mesh, &dm, |_| Vec3::zeros(), &QuadratureConfig::default()).unwrap();
        assert!(sys.load.iter().all(|&v| v == 0.0));
        assert_eq!(sys.a.asymmetry(), 0.0);
        let total: f64 = sys.c.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn lagrange_stiffness_rows_sum_to_zero() {
        // a single tet with every Lagrange node active: partition of unity
        let (mesh, _) = setup(1);
        let geom = &mesh.geometry[0];
        let rule = tet_rule(4).unwrap();
        let mut k = [[0.0; 10]; 10];
        for (p, w) in rule.iter() {
            let s = LocalShapes::eval(&BarycentricPoint(*p), geom);
            for i in 0..10 {
                for j in 0..10 {
                    k[i][j] += w * geom.volume * s.lagrange[i].gradient.dot(&s.lagrange[j].gradient);
                }
            }
        }
        for row in k {
            assert!(row.iter().sum::<f64>().abs() < 1e-13);
        }
    }

    #[test]
    fn constant_pressure_annihilates_central_bubbles() {
        let (mesh, dm) = setup(2);
        let sys = assemble(&mesh, &dm, |_| Vec3::zeros(), &QuadratureConfig::default()).unwrap();
        let ones = vec![1.0; dm.num_pressure()];
        let bt1 = sys.b.transpose_mul_vec(&ones);
        let scale = sys.b.max_abs();
        for t in 0..mesh.num_tets() {
            for m in 0..3 {
                assert!(bt1[dm.central_dof(t, m)].abs() < 1e-14 * scale);
            }
        }
        // and in fact every velocity basis function
        assert!(bt1.iter().all(|v| v.abs() < 1e-13 * scale));
    }

    #[test]
    fn pressure_interpolation_round_trip() {
        struct Linear;
        impl ExactSolution for Linear {
            fn velocity(&self, _: &Vec3) -> Vec3 {
                Vec3::zeros()
            }
            fn velocity_gradient(&self, _: &Vec3) -> Matrix3<f64> {
                Matrix3::zeros()
            }
            fn pressure(&self, x: &Vec3) -> f64 {
                x[0] - 2.0 * x[1] + 0.5 * x[2]
            }
        }
        let (mesh, dm) = setup(2);
        let p = interpolate_pressure(&mesh, &dm, |x| Linear.pressure(x));
        let u = vec![0.0; dm.num_velocity()];
        let e = compute_errors(&mesh, &dm, &u, &p, &Linear, 4).unwrap();
        assert!(e.l2_velocity == 0.0 && e.h1_broken == 0.0);
        assert!(e.l2_pressure < 1e-12);
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let (mesh, dm) = setup(1);
        struct Zero;
        impl ExactSolution for Zero {
            fn velocity(&self, _: &Vec3) -> Vec3 {
                Vec3::zeros()
            }
            fn velocity_gradient(&self, _: &Vec3) -> Matrix3<f64> {
                Matrix3::zeros()
            }
            fn pressure(&self, _: &Vec3) -> f64 {
                0.0
            }
        }
        let r = compute_errors(&mesh, &dm, &[0.0; 3], &vec![0.0; dm.num_pressure()], &Zero, 4);
        assert!(r.is_err());
    }

    #[test]
    fn assembly_is_deterministic() {
        let (mesh, dm) = setup(2);
        let f = |x: &Vec3| Vec3::new(x[1].sin(), x[0] * x[2], 1.0);
        let s1 = assemble(&mesh, &dm, f, &QuadratureConfig::default()).unwrap();
        let s2 = assemble(&mesh, &dm, f, &QuadratureConfig::default()).unwrap();
        assert_eq!(s1.a, s2.a);
        assert_eq!(s1.b, s2.b);
        assert_eq!(s1.load, s2.load);
    }

    #[test]
    fn divergence_residual_edge_cases() {
        let (mesh, dm) = setup(1);
        let sys = assemble(&mesh, &dm, |_| Vec3::zeros(), &QuadratureConfig::default()).unwrap();
        assert_eq!(divergence_residual(&sys, &vec![0.0; dm.num_velocity()]), 0.0);
        let u: Vec<f64> = (0..dm.num_velocity()).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect();
        assert!(divergence_residual(&sys, &u) > 0.0);
    }
}
