//! Verification suites: DOF duality of the bubbles, weak continuity of the
//! global basis, unisolvence, and inf-sup stability.
//!
//! Each suite returns a [`SuiteReport`] listing every check with its measured
//! value and tolerance; the CLI prints the failures as JSON.

use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};
use serde::Serialize;

use crate::assembly::{assemble, velocity_mass, QuadratureConfig};
use crate::basis::{eval_phi0, eval_phi_face, BarycentricPoint, LocalShapes};
use crate::error::{invalid, Result};
use crate::infsup::{infsup_for_level, EigenMethod, VelocityNorm};
use crate::mesh::{build_cube_mesh, cells_for_level, local_face_vertices, TetGeometry, Vec3};
use crate::quadrature::{tet_rule, triangle_rule};
use crate::space::{eval_global_on_tet, jump_moments, DofMap};

pub const SEED: u64 = 20_240_601;
pub const RANDOM_TETS: usize = 50;
pub const DUALITY_TOL: f64 = 1e-12;
pub const JUMP_TOL: f64 = 1e-12;
pub const PIVOT_RATIO: f64 = 1e-10;
pub const EIGEN_AGREEMENT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Dofs,
    Jumps,
    Unisolvence,
    Infsup,
}

impl Suite {
    pub fn default_level(self) -> u32 {
        match self {
            Suite::Dofs => 1,
            Suite::Jumps => 2,
            Suite::Unisolvence => 2,
            Suite::Infsup => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    /// Passes when `value ≤ tolerance`.
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, passed: value <= tolerance }
    }

    /// Passes when `value ≥ tolerance`.
    pub fn at_least(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, passed: value >= tolerance }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub level: u32,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    /// Machine-readable summary with the full failure list.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "suite": self.suite,
            "level": self.level,
            "passed": self.passed(),
            "checks": self.checks.len(),
            "failures": self.failures(),
        })
    }
}

pub fn run_suite(suite: Suite, level: u32) -> Result<SuiteReport> {
    let checks = match suite {
        Suite::Dofs => dof_duality(&random_tets(RANDOM_TETS, SEED)?)?,
        Suite::Jumps => weak_continuity(level)?,
        Suite::Unisolvence => unisolvence(level)?,
        Suite::Infsup => infsup_stability(level)?,
    };
    Ok(SuiteReport { suite, level, checks })
}

/// Random tetrahedra in the unit cube, rejecting slivers (smallest height
/// below 5% of the longest edge).
pub fn random_tets(count: usize, seed: u64) -> Result<Vec<TetGeometry>> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut v: [Vec3; 4] = std::array::from_fn(|_| Vec3::new(rng.random(), rng.random(), rng.random()));
        let orient = (v[1] - v[0]).cross(&(v[2] - v[0])).dot(&(v[3] - v[0]));
        if orient < 0.0 {
            v.swap(2, 3);
        }
        let Ok(geom) = TetGeometry::from_vertices(v) else { continue };
        let diam = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .map(|(i, j)| (v[i] - v[j]).norm())
            .fold(0.0, f64::max);
        let hmin = geom.heights.iter().copied().fold(f64::INFINITY, f64::min);
        if hmin >= 0.05 * diam {
            out.push(geom);
        }
    }
    Ok(out)
}

/// Area of the face opposite local vertex `i`.
pub fn face_area(geom: &TetGeometry, i: usize) -> f64 {
    let [a, b, c] = local_face_vertices(i).map(|k| geom.vertices[k]);
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// `∫_{F_i} s λ_m dS` for all four `m`, with `s` given as a function of the
/// tet barycentric coordinates.
pub fn face_moments(geom: &TetGeometry, i: usize, s: impl Fn(&BarycentricPoint) -> f64) -> Result<[f64; 4]> {
    let rule = triangle_rule(4)?;
    let verts = local_face_vertices(i);
    let area = face_area(geom, i);
    let mut out = [0.0; 4];
    for (p, w) in rule.iter() {
        let mut l = [0.0; 4];
        for k in 0..3 {
            l[verts[k]] = p[k];
        }
        let v = s(&BarycentricPoint(l));
        for m in 0..4 {
            out[m] += w * area * v * l[m];
        }
    }
    Ok(out)
}

/// The defining moment conditions of `Φ0` and `Φi` on each tet.
pub fn dof_duality(tets: &[TetGeometry]) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let center = BarycentricPoint::barycenter();
    for (t, geom) in tets.iter().enumerate() {
        let mut worst_phi0: f64 = 0.0;
        let mut worst_face: f64 = 0.0;
        for j in 0..4 {
            let area = face_area(geom, j);
            let m0 = face_moments(geom, j, |l| eval_phi0(l, geom).value)?;
            for m in (0..4).filter(|&m| m != j) {
                worst_phi0 = worst_phi0.max(m0[m].abs() / area);
            }
            for i in 0..4 {
                let mi = face_moments(geom, j, |l| eval_phi_face(i, l, geom).value)?;
                let expected = if i == j { area } else { 0.0 };
                for m in (0..4).filter(|&m| m != j) {
                    worst_face = worst_face.max((mi[m] - expected).abs() / area);
                }
            }
        }
        checks.push(Check::at_most(format!("tet {t}: Phi0 face moments"), worst_phi0, DUALITY_TOL));
        checks.push(Check::at_most(format!("tet {t}: Phi_i face moments"), worst_face, DUALITY_TOL));
        let c0 = (eval_phi0(&center, geom).value - 1.0).abs();
        let ci = (0..4).map(|i| eval_phi_face(i, &center, geom).value.abs()).fold(0.0, f64::max);
        checks.push(Check::at_most(format!("tet {t}: Phi0(e_T) = 1"), c0, DUALITY_TOL));
        checks.push(Check::at_most(format!("tet {t}: Phi_i(e_T) = 0"), ci, DUALITY_TOL));
    }
    if let Some(geom) = tets.first() {
        // the 15 local scalar shapes all lie in P2, so at most 10 are independent
        let rank = local_shape_rank(geom)?;
        checks.push(Check::at_most("local shapes span at most P2 (rank)", rank as f64, 10.0));
    }
    Ok(checks)
}

/// Numerical rank of the L² Gram matrix of the 15 local scalar shapes.
pub fn local_shape_rank(geom: &TetGeometry) -> Result<usize> {
    let rule = tet_rule(4)?;
    let mut g = DMatrix::<f64>::zeros(15, 15);
    for (p, w) in rule.iter() {
        let vals = LocalShapes::eval(&BarycentricPoint(*p), geom).all().map(|s| s.value);
        for i in 0..15 {
            for j in 0..15 {
                g[(i, j)] += w * geom.volume * vals[i] * vals[j];
            }
        }
    }
    Ok(pivoted_cholesky(&g, PIVOT_RATIO).rank)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PivotedCholesky {
    /// Number of pivots accepted before the ratio fell below the threshold.
    pub rank: usize,
    /// Smallest accepted pivot over the largest diagonal entry.
    pub min_ratio: f64,
}

/// Diagonally pivoted Cholesky; stops at the first pivot below
/// `ratio · max diag`.
pub fn pivoted_cholesky(g: &DMatrix<f64>, ratio: f64) -> PivotedCholesky {
    let n = g.nrows();
    let mut a = g.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let dmax = (0..n).map(|i| g[(i, i)]).fold(0.0, f64::max);
    let mut min_ratio = f64::INFINITY;
    for k in 0..n {
        let (p, piv) = (k..n)
            .map(|i| (i, a[(perm[i], perm[i])]))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("non-empty range");
        if !(piv > ratio * dmax) {
            return PivotedCholesky { rank: k, min_ratio: (piv / dmax).min(min_ratio) };
        }
        min_ratio = min_ratio.min(piv / dmax);
        perm.swap(k, p);
        let pk = perm[k];
        let d = piv.sqrt();
        for &pi in &perm[k + 1..] {
            a[(pi, pk)] /= d;
        }
        for (ii, &pi) in perm.iter().enumerate().skip(k + 1) {
            let lik = a[(pi, pk)];
            for &pj in &perm[k + 1..=ii] {
                let v = a[(pi, pj)] - lik * a[(pj, pk)];
                a[(pi, pj)] = v;
                a[(pj, pi)] = v;
            }
        }
    }
    PivotedCholesky { rank: n, min_ratio }
}

fn mesh_for(level: u32) -> Result<(crate::mesh::TetMesh, DofMap)> {
    let mesh = build_cube_mesh(cells_for_level(level)?)?;
    let dm = DofMap::new(&mesh);
    Ok((mesh, dm))
}

/// Largest `|φ|` of basis function `dof` at the face quadrature points, seen
/// from `tet`.
fn trace_scale(mesh: &crate::mesh::TetMesh, dm: &DofMap, dof: usize, face: usize, tet: usize) -> Result<f64> {
    let rule = triangle_rule(4)?;
    let f = &mesh.faces[face];
    let slot: [usize; 3] = f.vertices.map(|v| mesh.tets[tet].iter().position(|&w| w == v).expect("face vertex"));
    let mut s: f64 = 0.0;
    for (p, _) in rule.iter() {
        let mut l = [0.0; 4];
        for k in 0..3 {
            l[slot[k]] = p[k];
        }
        s = s.max(eval_global_on_tet(mesh, dm, dof, tet, &BarycentricPoint(l)).norm());
    }
    Ok(s)
}

/// P1 jump moments of every velocity basis function across every interior
/// face touching its support.
pub fn weak_continuity(level: u32) -> Result<Vec<Check>> {
    let (mesh, dm) = mesh_for(level)?;
    let mut checks = Vec::new();
    let mut worst = [0.0f64; 3];
    let mut pairs = 0usize;
    for dof in 0..dm.num_velocity() {
        let mut faces: Vec<usize> = dm
            .support(&mesh, dof)
            .into_iter()
            .flat_map(|t| mesh.tet_faces[t])
            .filter(|&f| !mesh.faces[f].boundary)
            .collect();
        faces.sort_unstable();
        faces.dedup();
        for face in faces {
            let f = &mesh.faces[face];
            let fs = f
                .adjacent_tets()
                .map(|t| trace_scale(&mesh, &dm, dof, face, t))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            let scale = f.area * fs.max(1.0);
            let jm = jump_moments(&mesh, &dm, dof, face)?;
            let kind = if dof < dm.counts.conforming {
                0
            } else if dof < dm.counts.conforming + dm.counts.central_bubbles {
                1
            } else {
                2
            };
            let v = jm.iter().map(|m| m.amax()).fold(0.0, f64::max) / scale;
            worst[kind] = worst[kind].max(v);
            pairs += 1;
        }
    }
    if pairs == 0 {
        return Err(invalid("mesh has no interior faces"));
    }
    for (kind, name) in ["conforming", "central bubble", "face bubble"].iter().enumerate() {
        checks.push(Check::at_most(format!("{name} jump moments"), worst[kind], JUMP_TOL));
    }
    Ok(checks)
}

/// Pivoted Cholesky of the `‖·‖_{1,h}` Gram matrix of the velocity basis.
pub fn unisolvence(level: u32) -> Result<Vec<Check>> {
    let (mesh, dm) = mesh_for(level)?;
    let config = QuadratureConfig::default();
    let system = assemble(&mesh, &dm, |_| Vec3::zeros(), &config)?;
    let g = system.a.add(1.0, &velocity_mass(&mesh, &dm, config.matrix_degree)?, 1.0);
    let n = g.nrows();
    let mut dense = DMatrix::<f64>::zeros(n, n);
    for (r, c, v) in g.triplets() {
        dense[(r, c)] = v;
    }
    let asym = g.asymmetry() / g.max_abs();
    let chol = pivoted_cholesky(&dense, PIVOT_RATIO);
    Ok(vec![
        Check::at_most("Gram matrix symmetry", asym, 1e-14),
        Check::at_least(format!("Gram rank (of {n})"), chol.rank as f64, n as f64),
        Check::at_least("smallest pivot ratio", chol.min_ratio, PIVOT_RATIO),
    ])
}

/// `β_h > 0` at each level up to `max_level`, agreement of the two
/// eigensolvers at level 1, and no collapse between levels 1 and 3.
pub fn infsup_stability(max_level: u32) -> Result<Vec<Check>> {
    if max_level == 0 {
        return Err(invalid("inf-sup suite needs level ≥ 1"));
    }
    if max_level > 3 {
        return Err(invalid("inf-sup suite supports levels up to 3"));
    }
    let mut checks = Vec::new();
    let mut betas = Vec::new();
    for level in 1..=max_level {
        let est = infsup_for_level(level, VelocityNorm::Full, EigenMethod::Lanczos)?;
        checks.push(Check::at_least(format!("level {level}: beta > 0"), est.beta, f64::MIN_POSITIVE));
        betas.push(est.beta);
        if level == 1 {
            let dense = infsup_for_level(1, VelocityNorm::Full, EigenMethod::Dense)?;
            let rel = (dense.eigenvalue - est.eigenvalue).abs() / dense.eigenvalue.abs();
            checks.push(Check::at_most("level 1: dense vs Lanczos", rel, EIGEN_AGREEMENT));
        }
    }
    if max_level >= 3 {
        checks.push(Check::at_least("beta(3) / beta(1)", betas[2] / betas[0], 0.5));
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_tets_are_reproducible_and_shape_regular() {
        let a = random_tets(5, 7).unwrap();
        let b = random_tets(5, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|g| g.volume > 0.0));
    }

    #[test]
    fn pivoted_cholesky_detects_rank() {
        let v = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 0.0, 2.0]);
        let g = &v * v.transpose();
        assert_eq!(pivoted_cholesky(&g, 1e-10).rank, 2);
        assert_eq!(pivoted_cholesky(&DMatrix::identity(4, 4), 1e-10).rank, 4);
    }

    #[test]
    fn duality_on_reference_tet() {
        let geom = TetGeometry::from_vertices([
            Vec3::zeros(),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ])
        .unwrap();
        assert!(dof_duality(&[geom]).unwrap().iter().all(|c| c.passed));
    }

    #[test]
    fn report_json_lists_failures() {
        let r = SuiteReport {
            suite: Suite::Dofs,
            level: 1,
            checks: vec![Check::at_most("ok", 0.0, 1.0), Check::at_most("bad", 2.0, 1.0)],
        };
        let j = r.to_json();
        assert_eq!(j["passed"], false);
        assert_eq!(j["failures"].as_array().unwrap().len(), 1);
        assert_eq!(j["failures"][0]["name"], "bad");
    }
}
