//! Field output: CSV per field and legacy ASCII VTK structured points.

use std::fmt::Write;

use super::grid::TissueGrid;
use super::network::VesselMesh;

/// CSV with columns `cell,x,y,z,value`.
pub fn field_csv(grid: &TissueGrid, field: &[f64]) -> String {
    let mut out = String::from("cell,x,y,z,value\n");
    for (i, v) in field.iter().enumerate() {
        let c = grid.center(i);
        let _ = writeln!(out, "{i},{:.16e},{:.16e},{:.16e},{:.16e}", c[0], c[1], c[2], v);
    }
    out
}

/// CSV of a per-point vessel field with columns `point,x,y,z,value`.
pub fn vessel_csv(mesh: &VesselMesh, values: &[f64]) -> String {
    let mut out = String::from("point,x,y,z,value\n");
    for (i, (p, v)) in mesh.points.iter().zip(values).enumerate() {
        let _ = writeln!(out, "{i},{:.16e},{:.16e},{:.16e},{:.16e}", p[0], p[1], p[2], v);
    }
    out
}

/// Legacy VTK `STRUCTURED_POINTS` file with one cell-data scalar per field.
pub fn vtk_structured_points(grid: &TissueGrid, title: &str, fields: &[(&str, &[f64])]) -> String {
    let h = grid.spacing();
    let [nx, ny, nz] = grid.cells;
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "{}", title.replace('\n', " "));
    let _ = writeln!(out, "ASCII");
    let _ = writeln!(out, "DATASET STRUCTURED_POINTS");
    let _ = writeln!(out, "DIMENSIONS {} {} {}", nx + 1, ny + 1, nz + 1);
    let _ = writeln!(out, "ORIGIN 0 0 0");
    let _ = writeln!(out, "SPACING {:.16e} {:.16e} {:.16e}", h[0], h[1], h[2]);
    let _ = writeln!(out, "CELL_DATA {}", grid.n_cells());
    for (name, values) in fields {
        let _ = writeln!(out, "SCALARS {name} double 1");
        let _ = writeln!(out, "LOOKUP_TABLE default");
        for v in values.iter() {
            let _ = writeln!(out, "{v:.16e}");
        }
    }
    out
}
