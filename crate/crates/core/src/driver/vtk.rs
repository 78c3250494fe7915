//! Legacy ASCII VTK output of the active mesh.

use std::io::{self, Write};

use crate::egspace::DofMap;
use crate::mesh::QuadMesh;

/// Cell-wise data written alongside the mesh; each slice has one value per active cell.
#[derive(Debug, Clone, Copy)]
pub struct CellFields<'a> {
    pub mu_stab: &'a [f64],
    pub indicator: &'a [f64],
    pub permeability: &'a [f64],
}

/// Writes `DATASET UNSTRUCTURED_GRID`: one point per continuous dof, one
/// quad (type 9) per active cell. Point data carries the continuous parts of
/// `P` and `C`, cell data the constant part of `C`, `μ_Stab`, `ER`, level and `K`.
pub fn write_vtk<W: Write>(
    mesh: &QuadMesh,
    map: &DofMap,
    p: &[f64],
    c: &[f64],
    cells: CellFields,
    mut out: W,
) -> io::Result<()> {
    let pts = map.vertex_positions();
    let nc = mesh.n_active();
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "enriched Galerkin miscible displacement")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", pts.len())?;
    for q in pts {
        writeln!(out, "{} {} 0", q[0], q[1])?;
    }
    writeln!(out, "CELLS {} {}", nc, 5 * nc)?;
    for ci in 0..nc {
        // lexicographic corners -> counter-clockwise
        let v = map.cell_vertices(ci);
        writeln!(out, "4 {} {} {} {}", v[0], v[1], v[3], v[2])?;
    }
    writeln!(out, "CELL_TYPES {nc}")?;
    for _ in 0..nc {
        writeln!(out, "9")?;
    }
    writeln!(out, "CELL_DATA {nc}")?;
    let scalar = |out: &mut W, name: &str, vals: &mut dyn Iterator<Item = f64>| -> io::Result<()> {
        writeln!(out, "SCALARS {name} double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for v in vals {
            writeln!(out, "{v}")?;
        }
        Ok(())
    };
    scalar(
        &mut out,
        "C_const",
        &mut (0..nc).map(|ci| c[map.const_dof(ci)]),
    )?;
    scalar(&mut out, "mu_stab", &mut cells.mu_stab.iter().copied())?;
    scalar(&mut out, "ER", &mut cells.indicator.iter().copied())?;
    scalar(
        &mut out,
        "level",
        &mut mesh
            .active_cells()
            .iter()
            .map(|&id| mesh.cell(id).level as f64),
    )?;
    scalar(&mut out, "K", &mut cells.permeability.iter().copied())?;
    writeln!(out, "POINT_DATA {}", pts.len())?;
    scalar(&mut out, "P", &mut p[..pts.len()].iter().copied())?;
    scalar(&mut out, "C", &mut c[..pts.len()].iter().copied())?;
    out.flush()
}
