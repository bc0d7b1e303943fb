//! Local shape functions on a tetrahedron.
//!
//! Everything is written in barycentric coordinates `λ = (λ0, λ1, λ2, λ3)`.
//! Physical gradients are assembled from the analytic `∂/∂λ_k` and the
//! constant `∇λ_k` of the element.
//!
//! * P2 Lagrange: vertex `i` ↦ `λ_i (2λ_i − 1)`, edge `(i, j)` ↦ `4 λ_i λ_j`,
//!   ordered vertices first, then edges as in [`LOCAL_EDGES`].
//! * Central bubble: `Φ0 = 2 − 4 Σ λ_k²`. Its P1 moments vanish on every face
//!   and `Φ0(barycenter) = 1`.
//! * Face bubble `i` (attached to the face opposite vertex `i`):
//!   `Φ_i = 12 (1 − λ_i)² − 18 Σ_{k≠i} λ_k² − (3/2)³ Φ0`. On its own face every
//!   P1 moment `∫ Φ_i λ_m` equals `|F|`; on the other three faces all P1
//!   moments vanish, and `Φ_i(barycenter) = 0`.

use crate::error::{invalid, Result};
use crate::mesh::{TetGeometry, Vec3, LOCAL_EDGES};

pub const NUM_LAGRANGE: usize = 10;

/// Barycentric coordinates of a point with respect to a tetrahedron.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarycentricPoint(pub [f64; 4]);

impl BarycentricPoint {
    pub fn new(lambda: [f64; 4]) -> Result<Self> {
        let sum: f64 = lambda.iter().sum();
        if (sum - 1.0).abs() > 1e-14 * 4.0 || lambda.iter().any(|l| !l.is_finite()) {
            return Err(invalid(format!("barycentric coordinates {lambda:?} do not sum to 1")));
        }
        Ok(Self(lambda))
    }

    pub fn barycenter() -> Self {
        Self([0.25; 4])
    }

    pub fn vertex(i: usize) -> Self {
        let mut l = [0.0; 4];
        l[i] = 1.0;
        Self(l)
    }

    pub fn edge_midpoint(i: usize, j: usize) -> Self {
        let mut l = [0.0; 4];
        l[i] = 0.5;
        l[j] = 0.5;
        Self(l)
    }

    pub fn is_inside(&self) -> bool {
        self.0.iter().all(|&l| l >= -1e-14)
    }
}

/// Value and physical gradient of a scalar shape function.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ShapeValue {
    pub value: f64,
    pub gradient: Vec3,
}

fn chain(dl: [f64; 4], geom: &TetGeometry) -> Vec3 {
    dl.iter()
        .zip(&geom.grad_lambda)
        .fold(Vec3::zeros(), |acc, (d, g)| acc + g * *d)
}

pub fn eval_p2_lagrange(l: &BarycentricPoint, geom: &TetGeometry) -> [ShapeValue; NUM_LAGRANGE] {
    let l = &l.0;
    let mut out = [ShapeValue::default(); NUM_LAGRANGE];
    for i in 0..4 {
        out[i] = ShapeValue {
            value: l[i] * (2.0 * l[i] - 1.0),
            gradient: geom.grad_lambda[i] * (4.0 * l[i] - 1.0),
        };
    }
    for (k, &(i, j)) in LOCAL_EDGES.iter().enumerate() {
        out[4 + k] = ShapeValue {
            value: 4.0 * l[i] * l[j],
            gradient: (geom.grad_lambda[i] * l[j] + geom.grad_lambda[j] * l[i]) * 4.0,
        };
    }
    out
}

pub fn eval_phi0(l: &BarycentricPoint, geom: &TetGeometry) -> ShapeValue {
    let l = &l.0;
    ShapeValue {
        value: 2.0 - 4.0 * l.iter().map(|x| x * x).sum::<f64>(),
        gradient: chain(l.map(|x| -8.0 * x), geom),
    }
}

/// Face bubble attached to the face opposite local vertex `i` (`0..4`).
pub fn eval_phi_face(i: usize, l: &BarycentricPoint, geom: &TetGeometry) -> ShapeValue {
    assert!(i < 4, "local face index {i} out of range");
    let l = &l.0;
    let sum_sq: f64 = l.iter().map(|x| x * x).sum();
    let phi0 = 2.0 - 4.0 * sum_sq;
    let others = sum_sq - l[i] * l[i];
    let value = 12.0 * (1.0 - l[i]).powi(2) - 18.0 * others - 27.0 / 8.0 * phi0;
    // -(27/8) ∂Φ0/∂λ_k = 27 λ_k
    let mut dl = l.map(|x| -36.0 * x + 27.0 * x);
    dl[i] = -24.0 * (1.0 - l[i]) + 27.0 * l[i];
    ShapeValue { value, gradient: chain(dl, geom) }
}

/// All 15 scalar shape functions of one element at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalShapes {
    pub lagrange: [ShapeValue; NUM_LAGRANGE],
    pub phi0: ShapeValue,
    pub phi_face: [ShapeValue; 4],
}

impl LocalShapes {
    pub fn eval(l: &BarycentricPoint, geom: &TetGeometry) -> Self {
        Self {
            lagrange: eval_p2_lagrange(l, geom),
            phi0: eval_phi0(l, geom),
            phi_face: std::array::from_fn(|i| eval_phi_face(i, l, geom)),
        }
    }

    /// The 15 functions in a fixed order: Lagrange, central, face bubbles.
    pub fn all(&self) -> [ShapeValue; 15] {
        let mut out = [ShapeValue::default(); 15];
        out[..10].copy_from_slice(&self.lagrange);
        out[10] = self.phi0;
        out[11..].copy_from_slice(&self.phi_face);
        out
    }
}
