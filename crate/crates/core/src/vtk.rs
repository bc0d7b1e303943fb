//! Legacy ASCII VTK export of tetrahedral meshes.
//!
//! Layout: `# vtk DataFile Version 3.0` header, a title line, `ASCII`,
//! `DATASET UNSTRUCTURED_GRID`, then `POINTS` (one `x y z` line per vertex,
//! 17 significant digits), `CELLS` (`4 a b c d` per tet), `CELL_TYPES` (all
//! `10`), and a `CELL_DATA` block with the tet volumes as scalar `volume`.

use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::mesh::TetMesh;

pub const VTK_TETRA: u8 = 10;

pub fn write_vtk<W: Write>(mesh: &TetMesh, title: &str, out: &mut W) -> Result<()> {
    let title = title.lines().next().unwrap_or("");
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{title}")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.vertices.len())?;
    for v in &mesh.vertices {
        writeln!(out, "{:.17e} {:.17e} {:.17e}", v[0], v[1], v[2])?;
    }
    let nt = mesh.num_tets();
    writeln!(out, "CELLS {} {}", nt, 5 * nt)?;
    for t in &mesh.tets {
        writeln!(out, "4 {} {} {} {}", t[0], t[1], t[2], t[3])?;
    }
    writeln!(out, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(out, "{VTK_TETRA}")?;
    }
    writeln!(out, "CELL_DATA {nt}")?;
    writeln!(out, "SCALARS volume double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for g in &mesh.geometry {
        writeln!(out, "{:.17e}", g.volume)?;
    }
    Ok(())
}

pub fn write_vtk_file(mesh: &TetMesh, title: &str, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_vtk(mesh, title, &mut f)?;
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_cube_mesh;

    #[test]
    fn single_cube_layout() {
        let mesh = build_cube_mesh(1).unwrap();
        let mut buf = Vec::new();
        write_vtk(&mesh, "cube", &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# vtk DataFile Version 3.0");
        assert_eq!(lines[4], "POINTS 8 double");
        assert_eq!(lines[13], "CELLS 6 30");
        assert_eq!(lines[20], "CELL_TYPES 6");
        assert_eq!(lines.iter().filter(|l| **l == "10").count(), 6);
        assert_eq!(lines.len(), 4 + 9 + 7 + 7 + 3 + 6);
    }
}
