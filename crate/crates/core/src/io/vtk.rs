//! Legacy ASCII VTK unstructured-grid snapshots.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::damage::DamageField;
use crate::error::{Error, Result};
use crate::mesh::Mesh;

const VTK_HEXAHEDRON: u8 = 12;

fn write_grid<W: Write>(out: &mut W, mesh: &Mesh, title: &str) -> Result<()> {
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{}", title.replace('\n', " "))?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.node_count())?;
    for x in mesh.nodes() {
        writeln!(out, "{:.16e} {:.16e} {:.16e}", x.x, x.y, x.z)?;
    }
    let ne = mesh.element_count();
    writeln!(out, "CELLS {} {}", ne, ne * 9)?;
    for hex in mesh.elements() {
        write!(out, "8")?;
        for n in hex {
            write!(out, " {n}")?;
        }
        writeln!(out)?;
    }
    writeln!(out, "CELL_TYPES {ne}")?;
    for _ in 0..ne {
        writeln!(out, "{VTK_HEXAHEDRON}")?;
    }
    Ok(())
}

/// Reference mesh only.
pub fn write_mesh(path: &Path, mesh: &Mesh) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_grid(&mut out, mesh, "gedamage mesh")?;
    out.flush()?;
    Ok(())
}

/// Reference mesh with nodal displacement and element damage.
pub fn write_field_snapshot(
    path: &Path,
    mesh: &Mesh,
    displacement: &[f64],
    damage: &DamageField,
    title: &str,
) -> Result<()> {
    let ne = mesh.element_count();
    let nn = mesh.node_count();
    if displacement.len() != 3 * nn || damage.f.len() != ne || damage.eroded.len() != ne {
        return Err(Error::validation(
            "snapshot",
            format!(
                "field sizes ({}, {}) do not match mesh ({} nodes, {} elements)",
                displacement.len(),
                damage.f.len(),
                nn,
                ne
            ),
        ));
    }
    let mut out = BufWriter::new(File::create(path)?);
    write_grid(&mut out, mesh, title)?;
    writeln!(out, "POINT_DATA {nn}")?;
    writeln!(out, "VECTORS displacement double")?;
    for u in displacement.chunks_exact(3) {
        writeln!(out, "{:.16e} {:.16e} {:.16e}", u[0], u[1], u[2])?;
    }
    writeln!(out, "CELL_DATA {ne}")?;
    writeln!(out, "SCALARS D double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for f in &damage.f {
        writeln!(out, "{:.16e}", 1.0 - f)?;
    }
    writeln!(out, "SCALARS eroded int 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for &e in &damage.eroded {
        writeln!(out, "{}", u8::from(e))?;
    }
    out.flush()?;
    Ok(())
}
