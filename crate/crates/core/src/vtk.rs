//! Legacy ASCII VTK output of per-vertex fields.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mesh::SimplicialMesh;

/// VTK cell type for a simplex of the given dimension.
fn cell_type(dim: usize) -> u8 {
    match dim {
        1 => 3,
        2 => 5,
        _ => 10,
    }
}

/// Extends a vector over interior vertices to all vertices, with zero
/// (the Dirichlet value) on the boundary.
pub fn interior_to_vertex_field(mesh: &SimplicialMesh, interior: &[f64]) -> Result<Vec<f64>> {
    if interior.len() != mesh.n_interior() {
        return Err(Error::InvalidInput(format!(
            "{} values for {} interior vertices",
            interior.len(),
            mesh.n_interior()
        )));
    }
    Ok((0..mesh.n_vertices()).map(|v| mesh.interior_index(v).map_or(0.0, |i| interior[i])).collect())
}

/// Unstructured grid with one `SCALARS` block per field.
pub fn to_vtk(mesh: &SimplicialMesh, title: &str, fields: &[(&str, &[f64])]) -> Result<String> {
    for (name, values) in fields {
        if values.len() != mesh.n_vertices() {
            return Err(Error::InvalidInput(format!(
                "field `{name}` has {} values for {} vertices",
                values.len(),
                mesh.n_vertices()
            )));
        }
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::InvalidInput(format!("field name `{name}` is empty or has whitespace")));
        }
    }
    let mut out = String::new();
    let title = title.replace(['\n', '\r'], " ");
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "{}", if title.is_empty() { "eigenfem" } else { &title });
    let _ = writeln!(out, "ASCII");
    let _ = writeln!(out, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(out, "POINTS {} double", mesh.n_vertices());
    for v in 0..mesh.n_vertices() {
        let x = mesh.vertex(v);
        let coords: Vec<String> = (0..3).map(|c| format!("{:?}", x.get(c).copied().unwrap_or(0.0))).collect();
        let _ = writeln!(out, "{}", coords.join(" "));
    }
    let per = mesh.dim() + 1;
    let _ = writeln!(out, "CELLS {} {}", mesh.n_elements(), mesh.n_elements() * (per + 1));
    for k in 0..mesh.n_elements() {
        let ids: Vec<String> = mesh.element(k).iter().map(usize::to_string).collect();
        let _ = writeln!(out, "{per} {}", ids.join(" "));
    }
    let _ = writeln!(out, "CELL_TYPES {}", mesh.n_elements());
    for _ in 0..mesh.n_elements() {
        let _ = writeln!(out, "{}", cell_type(mesh.dim()));
    }
    if !fields.is_empty() {
        let _ = writeln!(out, "POINT_DATA {}", mesh.n_vertices());
        for (name, values) in fields {
            let _ = writeln!(out, "SCALARS {name} double 1");
            let _ = writeln!(out, "LOOKUP_TABLE default");
            for v in *values {
                let _ = writeln!(out, "{v:?}");
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::StructuredKind;

    #[test]
    fn j3_layout() {
        let mesh = SimplicialMesh::generate_structured(StructuredKind::Mesh45, 3).unwrap();
        let field = interior_to_vertex_field(&mesh, &[1.0]).unwrap();
        assert_eq!(field.iter().filter(|&&x| x == 1.0).count(), 1);
        let text = to_vtk(&mesh, "t", &[("u", &field)]).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[4], "POINTS 9 double");
        assert!(text.contains("CELLS 8 32\n"));
        assert!(text.contains("CELL_TYPES 8\n"));
        assert!(text.contains("POINT_DATA 9\nSCALARS u double 1\nLOOKUP_TABLE default\n"));
        // header 5 + points 9 + cells 1+8 + types 1+8 + data 3+9
        assert_eq!(lines.len(), 44);
    }

    #[test]
    fn wrong_lengths_are_rejected() {
        let mesh = SimplicialMesh::generate_structured(StructuredKind::Mesh45, 3).unwrap();
        assert!(interior_to_vertex_field(&mesh, &[1.0, 2.0]).is_err());
        assert!(to_vtk(&mesh, "t", &[("u", &[0.0; 3])]).is_err());
        assert!(to_vtk(&mesh, "t", &[("has space", &[0.0; 9])]).is_err());
    }
}
