//! Numerical estimate of the discrete inf-sup constant.
//!
//! With `N` the Gram matrix of the velocity norm and `M` the pressure mass
//! matrix, the discrete constant satisfies
//!
//! ```text
//! β_h² = min_{p ⊥ 1} (pᵀ B N⁻¹ Bᵀ p) / (pᵀ M p)
//! ```
//!
//! i.e. the smallest eigenvalue of the pencil `(S, M)`, `S = B N⁻¹ Bᵀ`, on
//! mean-zero pressures. The constant pressure direction `z0 = M⁻¹ c` is
//! deflated explicitly rather than by removing an unknown.
//!
//! Two independent routes are provided: a dense one that forms `S` and
//! solves the symmetric eigenproblem `L⁻¹ S L⁻ᵀ` (`M = L Lᵀ`), and a Lanczos
//! iteration on `M⁻¹ S` in the `M` inner product that only needs solves with
//! `N` and `M`.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::{Mat, Side};
use serde::Serialize;

use crate::assembly::{assemble, pressure_mass, velocity_mass, QuadratureConfig};
use crate::error::{Error, Result};
use crate::mesh::{build_cube_mesh, cells_for_level};
use crate::space::DofMap;
use crate::sparse::{dot, CsrMatrix};

/// Velocity norm in the inf-sup quotient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VelocityNorm {
    /// `‖v‖²_{1,h} = ‖v‖²_0 + ‖∇_h v‖²_0`
    #[default]
    Full,
    /// `‖∇_h v‖_0` only.
    Seminorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenMethod {
    Dense,
    Lanczos,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InfSupEstimate {
    pub level: Option<u32>,
    pub beta: f64,
    /// Smallest eigenvalue `β_h²` on mean-zero pressures.
    pub eigenvalue: f64,
    pub method: EigenMethod,
    /// Lanczos steps taken (dimension of the eigenproblem for the dense route).
    pub iterations: usize,
    /// Residual estimate of the returned eigenpair (0 for the dense route).
    pub residual: f64,
}

struct SparseSpd {
    llt: Llt<usize, f64>,
    n: usize,
}

impl SparseSpd {
    fn new(m: &CsrMatrix, what: &str) -> Result<Self> {
        let llt = m
            .to_faer()?
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Matrix(format!("{what} is not symmetric positive definite: {e:?}")))?;
        Ok(Self { llt, n: m.nrows() })
    }

    fn solve_mat(&self, rhs: &mut Mat<f64>) {
        self.llt.solve_in_place(rhs.as_mut());
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut m = Mat::from_fn(self.n, 1, |i, _| b[i]);
        self.solve_mat(&mut m);
        (0..self.n).map(|i| m[(i, 0)]).collect()
    }
}

fn check_shapes(n: &CsrMatrix, b: &CsrMatrix, m_p: &CsrMatrix, c: &[f64]) -> Result<()> {
    let ok = n.nrows() == n.ncols()
        && b.ncols() == n.nrows()
        && m_p.nrows() == b.nrows()
        && m_p.ncols() == b.nrows()
        && c.len() == b.nrows();
    if !ok {
        return Err(Error::InvalidArgument("inf-sup matrices have inconsistent shapes".into()));
    }
    if b.nrows() < 2 {
        return Err(Error::InvalidArgument("need at least two pressure unknowns".into()));
    }
    Ok(())
}

/// Estimates `β_h` from the velocity-norm Gram `norm_gram`, divergence
/// matrix `b`, pressure mass `m_p` and mean vector `c`.
pub fn estimate_infsup(
    norm_gram: &CsrMatrix,
    b: &CsrMatrix,
    m_p: &CsrMatrix,
    c: &[f64],
    method: EigenMethod,
) -> Result<InfSupEstimate> {
    check_shapes(norm_gram, b, m_p, c)?;
    match method {
        EigenMethod::Dense => dense(norm_gram, b, m_p, c),
        EigenMethod::Lanczos => lanczos(norm_gram, b, m_p, c, 1e-12),
    }
}

/// Assembles the operators on the level-`level` cube mesh and estimates `β_h`.
pub fn infsup_for_level(level: u32, norm: VelocityNorm, method: EigenMethod) -> Result<InfSupEstimate> {
    let mesh = build_cube_mesh(cells_for_level(level)?)?;
    let dm = DofMap::new(&mesh);
    let config = QuadratureConfig::default();
    let system = assemble(&mesh, &dm, |_| nalgebra::Vector3::zeros(), &config)?;
    let gram = match norm {
        VelocityNorm::Full => system.a.add(1.0, &velocity_mass(&mesh, &dm, config.matrix_degree)?, 1.0),
        VelocityNorm::Seminorm => system.a.clone(),
    };
    let mut est = estimate_infsup(&gram, &system.b, &pressure_mass(&mesh, &dm), &system.c, method)?;
    est.level = Some(level);
    Ok(est)
}

fn dense(norm_gram: &CsrMatrix, b: &CsrMatrix, m_p: &CsrMatrix, c: &[f64]) -> Result<InfSupEstimate> {
    let n_p = b.nrows();
    let nf = SparseSpd::new(norm_gram, "velocity norm matrix")?;
    // X = N⁻¹ Bᵀ, S = B X
    let mut x = b.transpose().to_dense();
    nf.solve_mat(&mut x);
    let mut s = Mat::<f64>::zeros(n_p, n_p);
    for (r, k, v) in b.triplets() {
        for j in 0..n_p {
            s[(r, j)] += v * x[(k, j)];
        }
    }
    let m = m_p.to_dense();
    let llt = m
        .llt(Side::Lower)
        .map_err(|e| Error::Matrix(format!("pressure mass is not positive definite: {e:?}")))?;
    let l = llt.L();
    // C = L⁻¹ S L⁻ᵀ = L⁻¹ (L⁻¹ S)ᵀ for symmetric S
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l, s.as_mut(), faer::Par::Seq);
    let mut cmat = s.transpose().to_owned();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l, cmat.as_mut(), faer::Par::Seq);
    let cmat = Mat::from_fn(n_p, n_p, |i, j| 0.5 * (cmat[(i, j)] + cmat[(j, i)]));

    // deflate y0 = L⁻¹ c, the image of the constant pressure
    let mut y0 = Mat::from_fn(n_p, 1, |i, _| c[i]);
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l, y0.as_mut(), faer::Par::Seq);
    let y0n = (0..n_p).map(|i| y0[(i, 0)].powi(2)).sum::<f64>().sqrt();
    let yhat: Vec<f64> = (0..n_p).map(|i| y0[(i, 0)] / y0n).collect();
    let shift = (0..n_p).map(|i| cmat[(i, i)]).sum::<f64>() + 1.0;
    // P C P + shift ŷŷᵀ, P = I − ŷŷᵀ
    let cy: Vec<f64> = (0..n_p).map(|i| (0..n_p).map(|j| cmat[(i, j)] * yhat[j]).sum()).collect();
    let ycy = dot(&yhat, &cy);
    let deflated = Mat::from_fn(n_p, n_p, |i, j| {
        cmat[(i, j)] - yhat[i] * cy[j] - cy[i] * yhat[j] + yhat[i] * yhat[j] * (ycy + shift)
    });
    let eig = deflated
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Matrix(format!("dense eigensolver failed: {e:?}")))?;
    let mu = eig[0];
    Ok(InfSupEstimate {
        level: None,
        beta: mu.max(0.0).sqrt(),
        eigenvalue: mu,
        method: EigenMethod::Dense,
        iterations: n_p - 1,
        residual: 0.0,
    })
}

fn lanczos(
    norm_gram: &CsrMatrix,
    b: &CsrMatrix,
    m_p: &CsrMatrix,
    c: &[f64],
    tol: f64,
) -> Result<InfSupEstimate> {
    let n_p = b.nrows();
    let nf = SparseSpd::new(norm_gram, "velocity norm matrix")?;
    let mf = SparseSpd::new(m_p, "pressure mass")?;
    let m_dot = |x: &[f64], y: &[f64]| dot(x, &m_p.mul_vec(y));

    // constant direction in the M inner product
    let mut z0 = mf.solve(c);
    let z0n = m_dot(&z0, &z0).sqrt();
    z0.iter_mut().for_each(|v| *v /= z0n);
    let deflate = |v: &mut Vec<f64>| {
        let a = m_dot(&z0, v);
        v.iter_mut().zip(&z0).for_each(|(x, z)| *x -= a * z);
    };
    let apply = |v: &[f64]| -> Vec<f64> {
        let w = nf.solve(&b.transpose_mul_vec(v));
        mf.solve(&b.mul_vec(&w))
    };

    let dim = n_p - 1;
    let mut q: Vec<f64> = (0..n_p).map(|i| (1.0 + i as f64).sin() + 0.5).collect();
    deflate(&mut q);
    let qn = m_dot(&q, &q).sqrt();
    q.iter_mut().for_each(|v| *v /= qn);

    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut result: (f64, f64);
    loop {
        let k = basis.len();
        let mut w = apply(&basis[k - 1]);
        deflate(&mut w);
        let alpha = m_dot(&basis[k - 1], &w);
        alphas.push(alpha);
        // full reorthogonalization, twice
        for _ in 0..2 {
            for v in &basis {
                let h = m_dot(v, &w);
                w.iter_mut().zip(v).for_each(|(x, y)| *x -= h * y);
            }
            deflate(&mut w);
        }
        let beta = m_dot(&w, &w).sqrt();

        let t = Mat::from_fn(k, k, |i, j| {
            if i == j {
                alphas[i]
            } else if i + 1 == j {
                betas.get(i).copied().unwrap_or(0.0)
            } else if j + 1 == i {
                betas.get(j).copied().unwrap_or(0.0)
            } else {
                0.0
            }
        });
        let evd = t
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Matrix(format!("tridiagonal eigensolver failed: {e:?}")))?;
        let theta = evd.S().column_vector()[0];
        let last = evd.U()[(k - 1, 0)];
        let est = (beta * last).abs();
        result = (theta, est);

        if k >= dim || est <= tol * theta.abs().max(1e-300) || beta <= 1e-14 * alpha.abs().max(1.0) {
            break;
        }
        betas.push(beta);
        w.iter_mut().for_each(|x| *x /= beta);
        basis.push(w);
    }
    let (mu, residual) = result;
    Ok(InfSupEstimate {
        level: None,
        beta: mu.max(0.0).sqrt(),
        eigenvalue: mu,
        method: EigenMethod::Lanczos,
        iterations: alphas.len(),
        residual,
    })
}
