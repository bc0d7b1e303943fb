//! Tetrahedral meshes.
//!
//! A [`TetMesh`] owns vertex coordinates and positively oriented tetrahedra,
//! plus the derived topology the element needs: edges, faces with their
//! owner/neighbor tets, and a fixed unit normal per face. Interior vertices,
//! edges and faces are classified geometrically: a vertex is interior if it
//! lies in the open domain, an edge if its midpoint does, a face if its
//! barycenter does.
//!
//! Entities are numbered by lexicographic order of their sorted vertex-index
//! tuples, so two builds of the same mesh number everything identically.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};

use crate::error::{invalid, Error, Result};

pub type Vec3 = Vector3<f64>;

/// Local edges of a tetrahedron as pairs of local vertex indices.
pub const LOCAL_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Local vertices of the face opposite local vertex `i`, in increasing order.
pub const fn local_face_vertices(i: usize) -> [usize; 3] {
    match i {
        0 => [1, 2, 3],
        1 => [0, 2, 3],
        2 => [0, 1, 3],
        _ => [0, 1, 2],
    }
}

const INTERIOR_TOL: f64 = 1e-12;

/// Affine geometry of one tetrahedron.
#[derive(Debug, Clone, PartialEq)]
pub struct TetGeometry {
    pub vertices: [Vec3; 4],
    pub volume: f64,
    /// Constant gradients of the barycentric coordinates.
    pub grad_lambda: [Vec3; 4],
    pub barycenter: Vec3,
    /// Distance from vertex `i` to the plane of the opposite face.
    pub heights: [f64; 4],
}

impl TetGeometry {
    /// Computes the geometry of a tetrahedron given in positive orientation.
    pub fn from_vertices(vertices: [Vec3; 4]) -> Result<Self> {
        let [x0, x1, x2, x3] = vertices;
        let jac = Matrix3::from_columns(&[x1 - x0, x2 - x0, x3 - x0]);
        let det = jac.determinant();
        let scale = (x1 - x0).norm().max((x2 - x0).norm()).max((x3 - x0).norm());
        if !(det > 1e-14 * scale.powi(3)) {
            return Err(Error::Mesh(format!(
                "degenerate or negatively oriented tetrahedron (6|T| = {det:e})"
            )));
        }
        let inv = jac
            .try_inverse()
            .ok_or_else(|| Error::Mesh("singular element jacobian".into()))?;
        let g1: Vec3 = inv.row(0).transpose();
        let g2: Vec3 = inv.row(1).transpose();
        let g3: Vec3 = inv.row(2).transpose();
        let grad_lambda = [-(g1 + g2 + g3), g1, g2, g3];
        let heights = grad_lambda.map(|g| 1.0 / g.norm());
        Ok(Self {
            vertices,
            volume: det / 6.0,
            grad_lambda,
            barycenter: (x0 + x1 + x2 + x3) / 4.0,
            heights,
        })
    }

    /// Maps barycentric coordinates to a physical point.
    pub fn point(&self, lambda: &[f64; 4]) -> Vec3 {
        self.vertices
            .iter()
            .zip(lambda)
            .fold(Vec3::zeros(), |acc, (x, &l)| acc + x * l)
    }

    /// Barycentric coordinates of a physical point.
    pub fn barycentric(&self, x: &Vec3) -> [f64; 4] {
        let d = x - self.vertices[0];
        let l1 = self.grad_lambda[1].dot(&d);
        let l2 = self.grad_lambda[2].dot(&d);
        let l3 = self.grad_lambda[3].dot(&d);
        [1.0 - l1 - l2 - l3, l1, l2, l3]
    }
}

/// A triangular face of the mesh.
///
/// `normal` points out of `owner` and into `neighbor`. The owner is always the
/// adjacent tet with the smaller id; boundary faces have no neighbor and their
/// normal points out of the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub vertices: [usize; 3],
    pub owner: usize,
    pub neighbor: Option<usize>,
    pub area: f64,
    pub normal: Vec3,
    pub boundary: bool,
}

impl Face {
    pub fn adjacent_tets(&self) -> impl Iterator<Item = usize> + '_ {
        std::iter::once(self.owner).chain(self.neighbor)
    }
}

#[derive(Debug, Clone)]
pub struct TetMesh {
    pub vertices: Vec<Vec3>,
    pub tets: Vec<[usize; 4]>,
    pub faces: Vec<Face>,
    pub edges: Vec<[usize; 2]>,
    /// `tet_faces[t][i]` is the face opposite local vertex `i`.
    pub tet_faces: Vec<[usize; 4]>,
    /// `tet_edges[t][k]` is the edge joining [`LOCAL_EDGES`]`[k]`.
    pub tet_edges: Vec<[usize; 6]>,
    pub geometry: Vec<TetGeometry>,
    pub interior_vertex_ids: Vec<usize>,
    pub interior_edge_ids: Vec<usize>,
    pub interior_face_ids: Vec<usize>,
}

impl TetMesh {
    /// Builds topology and geometry from raw connectivity.
    ///
    /// Negatively oriented tets are flipped by swapping their last two
    /// vertices. `is_interior` classifies points of the closed domain.
    pub fn new(
        vertices: Vec<Vec3>,
        mut tets: Vec<[usize; 4]>,
        is_interior: impl Fn(&Vec3) -> bool,
    ) -> Result<Self> {
        let nv = vertices.len();
        let mut geometry = Vec::with_capacity(tets.len());
        for (t, tet) in tets.iter_mut().enumerate() {
            if tet.iter().any(|&v| v >= nv) {
                return Err(Error::Mesh(format!("tet {t} references a missing vertex")));
            }
            let x = tet.map(|v| vertices[v]);
            let det = (x[1] - x[0]).cross(&(x[2] - x[0])).dot(&(x[3] - x[0]));
            if det < 0.0 {
                tet.swap(2, 3);
            }
            let g = TetGeometry::from_vertices(tet.map(|v| vertices[v]))
                .map_err(|e| Error::Mesh(format!("tet {t}: {e}")))?;
            geometry.push(g);
        }

        let mut edge_index: BTreeMap<[usize; 2], usize> = BTreeMap::new();
        let mut face_tets: BTreeMap<[usize; 3], Vec<usize>> = BTreeMap::new();
        for (t, tet) in tets.iter().enumerate() {
            for &(a, b) in &LOCAL_EDGES {
                edge_index.insert(sorted2([tet[a], tet[b]]), 0);
            }
            for i in 0..4 {
                let [a, b, c] = local_face_vertices(i);
                face_tets
                    .entry(sorted3([tet[a], tet[b], tet[c]]))
                    .or_default()
                    .push(t);
            }
        }
        for (id, v) in edge_index.values_mut().enumerate() {
            *v = id;
        }
        let edges: Vec<[usize; 2]> = edge_index.keys().copied().collect();

        let mut face_index = BTreeMap::new();
        let mut faces = Vec::with_capacity(face_tets.len());
        for (id, (key, adj)) in face_tets.iter().enumerate() {
            if adj.len() > 2 {
                return Err(Error::Mesh(format!(
                    "face {key:?} is shared by {} tets",
                    adj.len()
                )));
            }
            face_index.insert(*key, id);
            let owner = adj[0].min(*adj.last().unwrap());
            let neighbor = (adj.len() == 2).then(|| adj[0].max(adj[1]));
            let [a, b, c] = key.map(|v| vertices[v]);
            let cross = (b - a).cross(&(c - a));
            let area = 0.5 * cross.norm();
            let mut normal = cross.normalize();
            let centroid = (a + b + c) / 3.0;
            if normal.dot(&(centroid - geometry[owner].barycenter)) < 0.0 {
                normal = -normal;
            }
            faces.push(Face {
                vertices: *key,
                owner,
                neighbor,
                area,
                normal,
                boundary: !is_interior(&centroid),
            });
        }

        let tet_faces = tets
            .iter()
            .map(|tet| {
                std::array::from_fn(|i| {
                    let [a, b, c] = local_face_vertices(i);
                    face_index[&sorted3([tet[a], tet[b], tet[c]])]
                })
            })
            .collect();
        let tet_edges = tets
            .iter()
            .map(|tet| {
                std::array::from_fn(|k| {
                    let (a, b) = LOCAL_EDGES[k];
                    edge_index[&sorted2([tet[a], tet[b]])]
                })
            })
            .collect();

        let interior_vertex_ids = (0..nv).filter(|&v| is_interior(&vertices[v])).collect();
        let interior_edge_ids = edges
            .iter()
            .enumerate()
            .filter(|(_, e)| is_interior(&((vertices[e[0]] + vertices[e[1]]) / 2.0)))
            .map(|(i, _)| i)
            .collect();
        let interior_face_ids = faces
            .iter()
            .enumerate()
            .filter(|(_, f)| !f.boundary)
            .map(|(i, _)| i)
            .collect();

        let mesh = Self {
            vertices,
            tets,
            faces,
            edges,
            tet_faces,
            tet_edges,
            geometry,
            interior_vertex_ids,
            interior_edge_ids,
            interior_face_ids,
        };
        for (i, f) in mesh.faces.iter().enumerate() {
            if !f.boundary && f.neighbor.is_none() {
                return Err(Error::Mesh(format!(
                    "face {i} lies inside the domain but has only one adjacent tet"
                )));
            }
        }
        Ok(mesh)
    }

    pub fn num_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn tet_geometry(&self, tet: usize) -> Result<&TetGeometry> {
        self.geometry
            .get(tet)
            .ok_or_else(|| invalid(format!("tet id {tet} out of range")))
    }

    /// Area, fixed normal and adjacent tets of a face.
    pub fn face_frame(&self, face: usize) -> Result<&Face> {
        self.faces
            .get(face)
            .ok_or_else(|| invalid(format!("face id {face} out of range")))
    }

    /// `+1` if the stored normal of `face` is the outward normal of `tet`,
    /// `-1` if it is inward.
    pub fn outward_sign(&self, face: usize, tet: usize) -> f64 {
        if self.faces[face].owner == tet {
            1.0
        } else {
            -1.0
        }
    }

    /// Longest edge length.
    pub fn h(&self) -> f64 {
        self.edges
            .iter()
            .map(|e| (self.vertices[e[0]] - self.vertices[e[1]]).norm())
            .fold(0.0, f64::max)
    }

    pub fn total_volume(&self) -> f64 {
        self.geometry.iter().map(|g| g.volume).sum()
    }
}

fn sorted2(mut a: [usize; 2]) -> [usize; 2] {
    a.sort_unstable();
    a
}

fn sorted3(mut a: [usize; 3]) -> [usize; 3] {
    a.sort_unstable();
    a
}

/// True for points of the open unit cube.
pub fn in_open_unit_cube(x: &Vec3) -> bool {
    x.iter().all(|&c| c > INTERIOR_TOL && c < 1.0 - INTERIOR_TOL)
}

/// Freudenthal/Kuhn mesh of `(0,1)^3` with `n` cells per direction.
///
/// Each sub-cube is cut into six tets sharing its main diagonal, one per
/// ordering of the three axis steps from the low corner to the high corner.
pub fn build_cube_mesh(n: usize) -> Result<TetMesh> {
    if n == 0 {
        return Err(invalid("cube mesh needs at least one cell per direction"));
    }
    let m = n + 1;
    let index = |i: usize, j: usize, k: usize| i + m * (j + m * k);
    let h = 1.0 / n as f64;
    let mut vertices = Vec::with_capacity(m * m * m);
    for k in 0..m {
        for j in 0..m {
            for i in 0..m {
                vertices.push(Vec3::new(i as f64 * h, j as f64 * h, k as f64 * h));
            }
        }
    }
    const ORDERS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut tets = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for order in &ORDERS {
                    let mut corner = [i, j, k];
                    let mut tet = [index(i, j, k), 0, 0, 0];
                    for (step, &axis) in order.iter().enumerate() {
                        corner[axis] += 1;
                        tet[step + 1] = index(corner[0], corner[1], corner[2]);
                    }
                    tets.push(tet);
                }
            }
        }
    }
    TetMesh::new(vertices, tets, in_open_unit_cube)
}

/// Number of cells per direction for a refinement level (`n = 2^(level-1)`).
pub fn cells_for_level(level: u32) -> Result<usize> {
    if level == 0 || level > 12 {
        return Err(invalid(format!("level must be in 1..=12, got {level}")));
    }
    Ok(1usize << (level - 1))
}
