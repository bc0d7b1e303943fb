//! The manufactured Stokes problem on the unit cube.
//!
//! With `q(t) = t²(1−t)²` and `g = 2¹² q(x) q(y) q(z)`,
//!
//! ```text
//! u = (g_y − g_z, −g_x, g_x),   p = g_xy / 9,   f = −Δu + ∇p.
//! ```
//!
//! `u` is divergence free, vanishes with its first derivatives on the cube
//! boundary, and `p` has zero mean. All derivatives are evaluated in closed
//! form from the univariate factors.

use nalgebra::Matrix3;

use crate::assembly::ExactSolution;
use crate::mesh::Vec3;

/// Derivatives `q, q', q'', q'''` of `q(t) = t²(1−t)²`.
fn q_derivs(t: f64) -> [f64; 4] {
    let s = 1.0 - t;
    [
        t * t * s * s,
        2.0 * t * s * (1.0 - 2.0 * t),
        2.0 - 12.0 * t + 12.0 * t * t,
        -12.0 + 24.0 * t,
    ]
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ManufacturedProblem;

struct Factors {
    x: [f64; 4],
    y: [f64; 4],
    z: [f64; 4],
}

impl Factors {
    fn at(p: &Vec3) -> Self {
        Self { x: q_derivs(p[0]), y: q_derivs(p[1]), z: q_derivs(p[2]) }
    }

    /// `∂^{a+b+c} g / ∂x^a ∂y^b ∂z^c`
    fn d(&self, a: usize, b: usize, c: usize) -> f64 {
        4096.0 * self.x[a] * self.y[b] * self.z[c]
    }
}

impl ManufacturedProblem {
    pub fn new() -> Self {
        Self
    }

    pub fn g(&self, p: &Vec3) -> f64 {
        Factors::at(p).d(0, 0, 0)
    }

    pub fn velocity(&self, p: &Vec3) -> Vec3 {
        let f = Factors::at(p);
        let gx = f.d(1, 0, 0);
        Vec3::new(f.d(0, 1, 0) - f.d(0, 0, 1), -gx, gx)
    }

    pub fn velocity_gradient(&self, p: &Vec3) -> Matrix3<f64> {
        let f = Factors::at(p);
        let row_gx = [f.d(2, 0, 0), f.d(1, 1, 0), f.d(1, 0, 1)];
        Matrix3::new(
            f.d(1, 1, 0) - f.d(1, 0, 1),
            f.d(0, 2, 0) - f.d(0, 1, 1),
            f.d(0, 1, 1) - f.d(0, 0, 2),
            -row_gx[0],
            -row_gx[1],
            -row_gx[2],
            row_gx[0],
            row_gx[1],
            row_gx[2],
        )
    }

    pub fn pressure(&self, p: &Vec3) -> f64 {
        Factors::at(p).d(1, 1, 0) / 9.0
    }

    pub fn pressure_gradient(&self, p: &Vec3) -> Vec3 {
        let f = Factors::at(p);
        Vec3::new(f.d(2, 1, 0), f.d(1, 2, 0), f.d(1, 1, 1)) / 9.0
    }

    pub fn velocity_laplacian(&self, p: &Vec3) -> Vec3 {
        let f = Factors::at(p);
        let lap_gy = f.d(2, 1, 0) + f.d(0, 3, 0) + f.d(0, 1, 2);
        let lap_gz = f.d(2, 0, 1) + f.d(0, 2, 1) + f.d(0, 0, 3);
        let lap_gx = f.d(3, 0, 0) + f.d(1, 2, 0) + f.d(1, 0, 2);
        Vec3::new(lap_gy - lap_gz, -lap_gx, lap_gx)
    }

    /// Body force `f = −Δu + ∇p`.
    pub fn force(&self, p: &Vec3) -> Vec3 {
        -self.velocity_laplacian(p) + self.pressure_gradient(p)
    }

    pub fn divergence(&self, p: &Vec3) -> f64 {
        self.velocity_gradient(p).trace()
    }
}

impl ExactSolution for ManufacturedProblem {
    fn velocity(&self, x: &Vec3) -> Vec3 {
        ManufacturedProblem::velocity(self, x)
    }

    fn velocity_gradient(&self, x: &Vec3) -> Matrix3<f64> {
        ManufacturedProblem::velocity_gradient(self, x)
    }

    fn pressure(&self, x: &Vec3) -> f64 {
        ManufacturedProblem::pressure(self, x)
    }
}

/// Exact solution `u = 0`, `p = x − 1/2`, driven by `f = ∇p = (1, 0, 0)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearPressure;

impl LinearPressure {
    pub fn force(&self, _: &Vec3) -> Vec3 {
        Vec3::new(1.0, 0.0, 0.0)
    }
}

impl ExactSolution for LinearPressure {
    fn velocity(&self, _: &Vec3) -> Vec3 {
        Vec3::zeros()
    }

    fn velocity_gradient(&self, _: &Vec3) -> Matrix3<f64> {
        Matrix3::zeros()
    }

    fn pressure(&self, x: &Vec3) -> f64 {
        x[0] - 0.5
    }
}
