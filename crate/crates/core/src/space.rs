//! Global degrees of freedom of the velocity and pressure spaces.
//!
//! Velocity unknowns are numbered in blocks:
//!
//! 1. conforming P2: three components per interior vertex and interior edge
//!    midpoint (`n_c = 3 n_v + 3 n_e`), node-major;
//! 2. central bubbles `Φ0 E_m`: three per tet (`n_1 = 3 n_t`);
//! 3. face bubbles `Φ_j n_j`: one per interior face (`n_f`).
//!
//! A face bubble lives on both tets sharing its face. Each side evaluates its
//! own local `Φ_j` times the face's fixed unit normal, with one shared
//! coefficient, which makes every P1 moment of the jump across the face
//! vanish. Boundary vertices, edges and faces carry no unknown.
//!
//! Pressure is discontinuous P1, nodal at the four vertices of each tet:
//! unknown `4 t + i` is the value of `p_h|_T` at local vertex `i`. The
//! zero-mean constraint is imposed by the solver.

use nalgebra::Matrix3;
use serde::Serialize;

use crate::basis::{BarycentricPoint, LocalShapes};
use crate::error::{invalid, Result};
use crate::mesh::{local_face_vertices, TetMesh, Vec3};
use crate::quadrature::triangle_rule;

/// Counts of the discrete spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DofCounts {
    pub conforming: usize,
    pub central_bubbles: usize,
    pub face_bubbles: usize,
    pub pressure: usize,
}

impl DofCounts {
    /// Number of nonconforming bubble unknowns, `n_nc = 3 n_t + n_f`.
    pub fn nonconforming(&self) -> usize {
        self.central_bubbles + self.face_bubbles
    }

    pub fn velocity(&self) -> usize {
        self.conforming + self.nonconforming()
    }
}

#[derive(Debug, Clone)]
pub struct DofMap {
    pub counts: DofCounts,
    /// First dof (component 0) of the P2 node at each vertex, if interior.
    vertex_node: Vec<Option<usize>>,
    /// First dof (component 0) of the P2 node at each edge midpoint, if interior.
    edge_node: Vec<Option<usize>>,
    face_dof: Vec<Option<usize>>,
    /// Per tet: first dof of each of its 10 Lagrange nodes.
    tet_nodes: Vec<[Option<usize>; 10]>,
}

/// Which local scalar shape function a vector basis function is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalShape {
    Lagrange(usize),
    Central,
    Face(usize),
}

/// One vector-valued basis function restricted to one tet: a scalar shape
/// function times a constant direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalVelocityFn {
    pub dof: usize,
    pub shape: LocalShape,
    pub direction: Vec3,
}

impl LocalVelocityFn {
    pub fn scalar(&self, shapes: &LocalShapes) -> crate::basis::ShapeValue {
        match self.shape {
            LocalShape::Lagrange(k) => shapes.lagrange[k],
            LocalShape::Central => shapes.phi0,
            LocalShape::Face(i) => shapes.phi_face[i],
        }
    }

    pub fn value(&self, shapes: &LocalShapes) -> Vec3 {
        self.direction * self.scalar(shapes).value
    }

    /// `G[c][d] = ∂v_c / ∂x_d`.
    pub fn gradient(&self, shapes: &LocalShapes) -> Matrix3<f64> {
        self.direction * self.scalar(shapes).gradient.transpose()
    }

    pub fn divergence(&self, shapes: &LocalShapes) -> f64 {
        self.direction.dot(&self.scalar(shapes).gradient)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalVelocityBasis {
    pub tet: usize,
    pub functions: Vec<LocalVelocityFn>,
}

impl LocalVelocityBasis {
    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }
}

const AXES: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

fn axis(m: usize) -> Vec3 {
    Vec3::from(AXES[m])
}

impl DofMap {
    pub fn new(mesh: &TetMesh) -> Self {
        let mut next = 0;
        let mut vertex_node = vec![None; mesh.vertices.len()];
        for &v in &mesh.interior_vertex_ids {
            vertex_node[v] = Some(next);
            next += 3;
        }
        let mut edge_node = vec![None; mesh.edges.len()];
        for &e in &mesh.interior_edge_ids {
            edge_node[e] = Some(next);
            next += 3;
        }
        let conforming = next;
        let central_bubbles = 3 * mesh.num_tets();
        next += central_bubbles;
        let mut face_dof = vec![None; mesh.faces.len()];
        for &f in &mesh.interior_face_ids {
            face_dof[f] = Some(next);
            next += 1;
        }
        let tet_nodes = mesh
            .tets
            .iter()
            .enumerate()
            .map(|(t, tet)| {
                std::array::from_fn(|k| {
                    if k < 4 {
                        vertex_node[tet[k]]
                    } else {
                        edge_node[mesh.tet_edges[t][k - 4]]
                    }
                })
            })
            .collect();
        Self {
            counts: DofCounts {
                conforming,
                central_bubbles,
                face_bubbles: mesh.interior_face_ids.len(),
                pressure: 4 * mesh.num_tets(),
            },
            vertex_node,
            edge_node,
            face_dof,
            tet_nodes,
        }
    }

    pub fn num_velocity(&self) -> usize {
        self.counts.velocity()
    }

    pub fn num_pressure(&self) -> usize {
        self.counts.pressure
    }

    pub fn vertex_dof(&self, vertex: usize, component: usize) -> Option<usize> {
        self.vertex_node[vertex].map(|d| d + component)
    }

    pub fn edge_dof(&self, edge: usize, component: usize) -> Option<usize> {
        self.edge_node[edge].map(|d| d + component)
    }

    pub fn central_dof(&self, tet: usize, component: usize) -> usize {
        self.counts.conforming + 3 * tet + component
    }

    pub fn face_dof(&self, face: usize) -> Option<usize> {
        self.face_dof[face]
    }

    pub fn pressure_dof(&self, tet: usize, local_vertex: usize) -> usize {
        4 * tet + local_vertex
    }

    /// Vector basis functions that are nonzero on `tet`.
    pub fn local_velocity_basis(&self, mesh: &TetMesh, tet: usize) -> LocalVelocityBasis {
        let mut functions = Vec::with_capacity(37);
        for (k, node) in self.tet_nodes[tet].iter().enumerate() {
            if let Some(base) = node {
                for m in 0..3 {
                    functions.push(LocalVelocityFn {
                        dof: base + m,
                        shape: LocalShape::Lagrange(k),
                        direction: axis(m),
                    });
                }
            }
        }
        for m in 0..3 {
            functions.push(LocalVelocityFn {
                dof: self.central_dof(tet, m),
                shape: LocalShape::Central,
                direction: axis(m),
            });
        }
        for i in 0..4 {
            let face = mesh.tet_faces[tet][i];
            if let Some(dof) = self.face_dof[face] {
                functions.push(LocalVelocityFn {
                    dof,
                    shape: LocalShape::Face(i),
                    direction: mesh.faces[face].normal,
                });
            }
        }
        LocalVelocityBasis { tet, functions }
    }

    /// Tets on which the global velocity basis function `dof` is nonzero.
    pub fn support(&self, mesh: &TetMesh, dof: usize) -> Vec<usize> {
        (0..mesh.num_tets())
            .filter(|&t| self.local_velocity_basis(mesh, t).functions.iter().any(|f| f.dof == dof))
            .collect()
    }
}

/// Value of the global velocity basis function `dof` restricted to `tet`.
pub fn eval_global_on_tet(
    mesh: &TetMesh,
    dofmap: &DofMap,
    dof: usize,
    tet: usize,
    lambda: &BarycentricPoint,
) -> Vec3 {
    let shapes = LocalShapes::eval(lambda, &mesh.geometry[tet]);
    dofmap
        .local_velocity_basis(mesh, tet)
        .functions
        .iter()
        .filter(|f| f.dof == dof)
        .map(|f| f.value(&shapes))
        .sum()
}

/// `∫_F v|_T λ_m dS` for the three vertices `m` of `face` (in the face's
/// vertex order), where `v` is global basis function `dof` seen from `tet`.
pub fn trace_moments(
    mesh: &TetMesh,
    dofmap: &DofMap,
    dof: usize,
    face: usize,
    tet: usize,
) -> Result<[Vec3; 3]> {
    let f = mesh.face_frame(face)?;
    if !f.adjacent_tets().any(|t| t == tet) {
        return Err(invalid(format!("tet {tet} is not adjacent to face {face}")));
    }
    let local = mesh.tet_faces[tet]
        .iter()
        .position(|&g| g == face)
        .expect("adjacent tet lists the face");
    let local_verts = local_face_vertices(local);
    // position of each face vertex among the tet's local vertices
    let slot: [usize; 3] = f.vertices.map(|v| {
        local_verts
            .into_iter()
            .find(|&lv| mesh.tets[tet][lv] == v)
            .expect("face vertex belongs to tet")
    });
    let rule = triangle_rule(4)?;
    let mut out = [Vec3::zeros(); 3];
    for (p, w) in rule.iter() {
        let mut l = [0.0; 4];
        for k in 0..3 {
            l[slot[k]] = p[k];
        }
        let v = eval_global_on_tet(mesh, dofmap, dof, tet, &BarycentricPoint(l));
        for k in 0..3 {
            out[k] += v * (w * p[k] * f.area);
        }
    }
    Ok(out)
}

/// P1 moments of the jump `v|_owner − v|_neighbor` of global velocity basis
/// function `dof` across an interior face.
pub fn jump_moments(mesh: &TetMesh, dofmap: &DofMap, dof: usize, face: usize) -> Result<[Vec3; 3]> {
    let f = mesh.face_frame(face)?;
    let Some(neighbor) = f.neighbor else {
        return Err(invalid(format!("face {face} is on the boundary")));
    };
    if dof >= dofmap.num_velocity() {
        return Err(invalid(format!("velocity dof {dof} out of range")));
    }
    let plus = trace_moments(mesh, dofmap, dof, face, f.owner)?;
    let minus = trace_moments(mesh, dofmap, dof, face, neighbor)?;
    Ok(std::array::from_fn(|k| plus[k] - minus[k]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_cube_mesh;

    #[test]
    fn single_cube_counts() {
        let mesh = build_cube_mesh(1).unwrap();
        let dm = DofMap::new(&mesh);
        assert_eq!(dm.counts.conforming, 3);
        assert_eq!(dm.counts.central_bubbles, 18);
        assert_eq!(dm.counts.nonconforming(), 24);
        assert_eq!(dm.num_velocity(), 27);
        assert_eq!(dm.num_pressure(), 24);
        for (f, face) in mesh.faces.iter().enumerate() {
            assert_eq!(face.boundary, dm.face_dof(f).is_none());
        }
    }

    #[test]
    fn single_cube_local_basis() {
        // every Kuhn tet of one cube has the body diagonal as an edge and two
        // interior faces (the ones containing that diagonal)
        let mesh = build_cube_mesh(1).unwrap();
        let dm = DofMap::new(&mesh);
        for t in 0..6 {
            let b = dm.local_velocity_basis(&mesh, t);
            let count = |pred: fn(&LocalShape) -> bool| b.functions.iter().filter(|f| pred(&f.shape)).count();
            assert_eq!(count(|s| matches!(s, LocalShape::Lagrange(_))), 3);
            assert_eq!(count(|s| matches!(s, LocalShape::Central)), 3);
            assert_eq!(count(|s| matches!(s, LocalShape::Face(_))), 2);
        }
    }

    #[test]
    fn interior_tet_has_full_complement() {
        let mesh = build_cube_mesh(4).unwrap();
        let dm = DofMap::new(&mesh);
        let interior = (0..mesh.num_tets())
            .find(|&t| mesh.tets[t].iter().all(|&v| mesh.interior_vertex_ids.binary_search(&v).is_ok()))
            .unwrap();
        assert_eq!(dm.local_velocity_basis(&mesh, interior).len(), 37);
    }

    #[test]
    fn face_bubbles_are_shared_by_two_tets() {
        let mesh = build_cube_mesh(2).unwrap();
        let dm = DofMap::new(&mesh);
        for &f in &mesh.interior_face_ids {
            let dof = dm.face_dof(f).unwrap();
            let support = dm.support(&mesh, dof);
            let face = &mesh.faces[f];
            assert_eq!(support, vec![face.owner, face.neighbor.unwrap()]);
        }
    }

    #[test]
    fn face_bubble_single_sided_moments() {
        let mesh = build_cube_mesh(2).unwrap();
        let dm = DofMap::new(&mesh);
        let f = mesh.interior_face_ids[3];
        let face = &mesh.faces[f];
        let dof = dm.face_dof(f).unwrap();
        for t in face.adjacent_tets() {
            let m = trace_moments(&mesh, &dm, dof, f, t).unwrap();
            for v in m {
                assert!((v - face.normal * face.area).norm() < 1e-14);
            }
        }
        let jump = jump_moments(&mesh, &dm, dof, f).unwrap();
        assert!(jump.iter().all(|v| v.norm() < 1e-14));
    }

    #[test]
    fn jump_on_boundary_face_is_an_error() {
        let mesh = build_cube_mesh(1).unwrap();
        let dm = DofMap::new(&mesh);
        let b = mesh.faces.iter().position(|f| f.boundary).unwrap();
        assert!(jump_moments(&mesh, &dm, 0, b).is_err());
    }
}
