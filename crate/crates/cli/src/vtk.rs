//! Legacy VTK 3.0 ASCII writer for tetrahedral meshes.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;
use twogrid::TetMesh;

/// VTK cell type of a linear tetrahedron.
pub const VTK_TETRA: u8 = 10;

#[derive(Debug, Error)]
pub enum VtkError {
    #[error("field `{name}` has {got} values, expected {expected}")]
    SizeMismatch {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("field name `{0}` must be non-empty and free of whitespace")]
    BadName(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Data attached to a mesh: per-cell scalars and per-node 3-vectors stored
/// flat as `[x0, y0, z0, x1, ...]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct VtkFields<'a> {
    pub cell_scalars: &'a [(&'a str, &'a [f64])],
    pub point_vectors: &'a [(&'a str, &'a [f64])],
}

fn check(name: &str, expected: usize, got: usize) -> Result<(), VtkError> {
    if name.is_empty() || name.contains(char::is_whitespace) {
        return Err(VtkError::BadName(name.to_string()));
    }
    if expected != got {
        return Err(VtkError::SizeMismatch {
            name: name.to_string(),
            expected,
            got,
        });
    }
    Ok(())
}

/// Renders the file contents. Floats carry 17 significant digits so they
/// read back bit-identically.
pub fn vtk_string(mesh: &TetMesh, title: &str, fields: &VtkFields<'_>) -> Result<String, VtkError> {
    let nn = mesh.num_nodes();
    let ne = mesh.num_tets();
    for (name, v) in fields.cell_scalars {
        check(name, ne, v.len())?;
    }
    for (name, v) in fields.point_vectors {
        check(name, 3 * nn, v.len())?;
    }

    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    // The title line must not be empty nor span lines.
    let title = title.lines().next().unwrap_or("").trim();
    let _ = writeln!(s, "{}", if title.is_empty() { "twogrid" } else { title });
    s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {nn} double");
    for p in mesh.nodes() {
        let _ = writeln!(s, "{:.16e} {:.16e} {:.16e}", p.x, p.y, p.z);
    }
    let _ = writeln!(s, "CELLS {ne} {}", 5 * ne);
    for t in mesh.tets() {
        let _ = writeln!(s, "4 {} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    let _ = writeln!(s, "CELL_TYPES {ne}");
    for _ in 0..ne {
        let _ = writeln!(s, "{VTK_TETRA}");
    }
    if !fields.cell_scalars.is_empty() {
        let _ = writeln!(s, "CELL_DATA {ne}");
        for (name, v) in fields.cell_scalars {
            let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for x in *v {
                let _ = writeln!(s, "{x:.16e}");
            }
        }
    }
    if !fields.point_vectors.is_empty() {
        let _ = writeln!(s, "POINT_DATA {nn}");
        for (name, v) in fields.point_vectors {
            let _ = writeln!(s, "VECTORS {name} double");
            for c in v.chunks_exact(3) {
                let _ = writeln!(s, "{:.16e} {:.16e} {:.16e}", c[0], c[1], c[2]);
            }
        }
    }
    Ok(s)
}

pub fn write_vtk(
    mesh: &TetMesh,
    title: &str,
    fields: &VtkFields<'_>,
    path: &Path,
) -> Result<(), VtkError> {
    let text = vtk_string(mesh, title, fields)?;
    std::fs::write(path, text)?;
    Ok(())
}
