//! Legacy ASCII VTK output of active cells with point and cell data.

use std::io::{self, Write};

use super::QuadMesh;

const VTK_QUAD: u8 = 9;

pub fn write_vtk<W: Write>(
    mesh: &QuadMesh,
    point_data: &[(&str, &[f64])],
    cell_data: &[(&str, &[f64])],
    mut w: W,
) -> io::Result<()> {
    let active: Vec<usize> = mesh.active_cells().collect();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "adaptive-kkt mesh")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.n_vertices())?;
    for p in mesh.vertices() {
        writeln!(w, "{} {} 0", p[0], p[1])?;
    }
    writeln!(w, "CELLS {} {}", active.len(), 5 * active.len())?;
    for &c in &active {
        let v = mesh.cell(c).vertices;
        writeln!(w, "4 {} {} {} {}", v[0], v[1], v[2], v[3])?;
    }
    writeln!(w, "CELL_TYPES {}", active.len())?;
    for _ in &active {
        writeln!(w, "{VTK_QUAD}")?;
    }
    if !point_data.is_empty() {
        writeln!(w, "POINT_DATA {}", mesh.n_vertices())?;
        for (name, vals) in point_data {
            check_len(name, vals.len(), mesh.n_vertices())?;
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in vals.iter() {
                writeln!(w, "{v}")?;
            }
        }
    }
    if !cell_data.is_empty() {
        writeln!(w, "CELL_DATA {}", active.len())?;
        for (name, vals) in cell_data {
            check_len(name, vals.len(), active.len())?;
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in vals.iter() {
                writeln!(w, "{v}")?;
            }
        }
    }
    Ok(())
}

fn check_len(name: &str, got: usize, want: usize) -> io::Result<()> {
    if got != want {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            format!("field {name} has {got} values, expected {want}"),
        ));
    }
    Ok(())
}
