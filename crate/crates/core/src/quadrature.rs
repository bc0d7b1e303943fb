//! Quadrature on the reference tetrahedron and triangle.
//!
//! Rules are collapsed-coordinate (conical product) Gauss–Legendre rules: the
//! simplex is mapped onto the unit cube by a Duffy transform and the Jacobian
//! factors `(1-a)^2 (1-b)` are folded into the weights, so all weights are
//! positive and any degree is available. Points are stored as barycentric
//! coordinates and weights are normalized to sum to one, so
//! `∫_T f ≈ |T| Σ w_q f(λ_q)`.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

use crate::error::{invalid, Result};

pub const MAX_DEGREE: usize = 30;

/// A quadrature rule on an `N-1` dimensional simplex with barycentric points.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<const N: usize> {
    pub points: Vec<[f64; N]>,
    pub weights: Vec<f64>,
    /// Total polynomial degree integrated exactly.
    pub degree: usize,
}

pub type TetRule = QuadratureRule<4>;
pub type TriangleRule = QuadratureRule<3>;

impl<const N: usize> QuadratureRule<N> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; N], f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }

    /// Integral over a simplex of measure `measure` of a function of the
    /// barycentric coordinates.
    pub fn integrate(&self, measure: f64, mut f: impl FnMut(&[f64; N]) -> f64) -> f64 {
        measure * self.iter().map(|(p, w)| w * f(p)).sum::<f64>()
    }
}

/// Gauss–Legendre nodes and weights on `[0,1]`, exact to degree `2 npts - 1`.
fn legendre_01(npts: usize) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(npts).expect("at least one point"));
    let mut pairs: Vec<(f64, f64)> = rule
        .iter()
        .map(|(t, w)| ((1.0 + t) / 2.0, w / 2.0))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs
}

/// Points needed for a 1D factor of polynomial degree `degree`.
fn points_for(degree: usize) -> usize {
    degree / 2 + 1
}

fn check_degree(degree: usize) -> Result<()> {
    if degree > MAX_DEGREE {
        return Err(invalid(format!(
            "quadrature degree {degree} not supported (max {MAX_DEGREE})"
        )));
    }
    Ok(())
}

/// Tetrahedral rule exact for polynomials of total degree `degree`.
pub fn tet_rule(degree: usize) -> Result<TetRule> {
    check_degree(degree)?;
    // a carries the (1-a)^2 Jacobian factor, b carries (1-b)
    let ra = legendre_01(points_for(degree + 2));
    let rb = legendre_01(points_for(degree + 1));
    let rc = legendre_01(points_for(degree));
    let mut points = Vec::with_capacity(ra.len() * rb.len() * rc.len());
    let mut weights = Vec::with_capacity(points.capacity());
    for &(a, wa) in &ra {
        for &(b, wb) in &rb {
            for &(c, wc) in &rc {
                let l1 = a;
                let l2 = (1.0 - a) * b;
                let l3 = (1.0 - a) * (1.0 - b) * c;
                points.push([1.0 - l1 - l2 - l3, l1, l2, l3]);
                weights.push(6.0 * wa * wb * wc * (1.0 - a).powi(2) * (1.0 - b));
            }
        }
    }
    Ok(TetRule { points, weights, degree: 2 * rc.len() - 1 })
}

/// Triangle rule exact for polynomials of total degree `degree`.
pub fn triangle_rule(degree: usize) -> Result<TriangleRule> {
    check_degree(degree)?;
    let ra = legendre_01(points_for(degree + 1));
    let rb = legendre_01(points_for(degree));
    let mut points = Vec::with_capacity(ra.len() * rb.len());
    let mut weights = Vec::with_capacity(points.capacity());
    for &(a, wa) in &ra {
        for &(b, wb) in &rb {
            let l1 = a;
            let l2 = (1.0 - a) * b;
            points.push([1.0 - l1 - l2, l1, l2]);
            weights.push(2.0 * wa * wb * (1.0 - a));
        }
    }
    Ok(TriangleRule { points, weights, degree: 2 * rb.len() - 1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    /// Normalized simplex moment: (1/|S|) ∫_S Π λ_i^{a_i} = d! Π a_i! / (|a| + d)!
    fn exact_moment(exps: &[usize]) -> f64 {
        let d = exps.len() - 1;
        let total: usize = exps.iter().sum();
        factorial(d) * exps.iter().map(|&a| factorial(a)).product::<f64>() / factorial(total + d)
    }

    fn multi_indices(n: usize, max_total: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for first in 0..=max_total {
            for mut rest in multi_indices(n - 1, max_total - first) {
                rest.insert(0, first);
                out.push(rest);
            }
        }
        out
    }

    #[test]
    fn tet_rules_are_exact_for_barycentric_monomials() {
        for degree in [0, 2, 4, 7, 10, 12, 14] {
            let rule = tet_rule(degree).unwrap();
            assert!(rule.degree >= degree);
            for e in multi_indices(4, degree) {
                let q: f64 = rule
                    .iter()
                    .map(|(p, w)| w * (0..4).map(|i| p[i].powi(e[i] as i32)).product::<f64>())
                    .sum();
                let exact = exact_moment(&e);
                assert!(
                    ((q - exact) / exact).abs() < 1e-13,
                    "degree {degree}, exps {e:?}: {q} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn triangle_rules_are_exact_for_barycentric_monomials() {
        for degree in [0, 1, 3, 4, 6, 10] {
            let rule = triangle_rule(degree).unwrap();
            for e in multi_indices(3, degree) {
                let q: f64 = rule
                    .iter()
                    .map(|(p, w)| w * (0..3).map(|i| p[i].powi(e[i] as i32)).product::<f64>())
                    .sum();
                let exact = exact_moment(&e);
                assert!(((q - exact) / exact).abs() < 1e-13, "exps {e:?}");
            }
        }
    }

    #[test]
    fn named_moments() {
        let t = tet_rule(4).unwrap();
        let vol = 0.37;
        assert!((t.integrate(vol, |_| 1.0) - vol).abs() < 1e-15);
        assert!((t.integrate(vol, |l| l[0] * l[0]) - vol / 10.0).abs() < 1e-15);
        let f = triangle_rule(4).unwrap();
        let area = 1.7;
        assert!((f.integrate(area, |l| l[0] * l[1]) - area / 12.0).abs() < 1e-15);
    }

    #[test]
    fn unsupported_degree() {
        assert!(tet_rule(MAX_DEGREE + 1).is_err());
        assert!(triangle_rule(MAX_DEGREE + 1).is_err());
    }

    #[test]
    fn points_are_inside_and_weights_positive() {
        let rule = tet_rule(10).unwrap();
        for (p, w) in rule.iter() {
            assert!(w > 0.0);
            assert!(p.iter().all(|&l| l >= -1e-14));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }
}
