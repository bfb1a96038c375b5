//! Cell-field dumps as CSV and legacy ASCII VTK structured points.
//!
//! Numbers use Rust's `Display` for `f64`, the shortest decimal that
//! round-trips.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::FineGrid;

/// A named per-cell field.
pub type CellField<'a> = (&'a str, &'a [f64]);

fn check(grid: &FineGrid, fields: &[CellField<'_>]) -> Result<()> {
    for (name, v) in fields {
        if v.len() != grid.n_cells() {
            return Err(Error::Contract(format!(
                "field {name} has {} values, grid has {} cells",
                v.len(),
                grid.n_cells()
            )));
        }
        if name.is_empty() || name.contains([',', ' ', '\n']) {
            return Err(Error::Contract(format!("unusable field name {name:?}")));
        }
    }
    Ok(())
}

/// `i,j,x,y,<field>...` with one row per cell.
pub fn cell_csv(grid: &FineGrid, fields: &[CellField<'_>]) -> Result<String> {
    check(grid, fields)?;
    let mut s = String::from("i,j,x,y");
    for (name, _) in fields {
        s.push(',');
        s.push_str(name);
    }
    s.push('\n');
    for c in 0..grid.n_cells() {
        let (i, j) = grid.cell_coords(c);
        let (x, y) = grid.cell_center(c);
        let _ = write!(s, "{i},{j},{x},{y}");
        for (_, v) in fields {
            let _ = write!(s, ",{}", v[c]);
        }
        s.push('\n');
    }
    Ok(s)
}

/// Legacy VTK `STRUCTURED_POINTS` with cell data.
pub fn cell_vtk(grid: &FineGrid, title: &str, fields: &[CellField<'_>]) -> Result<String> {
    check(grid, fields)?;
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "{}", title.replace('\n', " "));
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET STRUCTURED_POINTS");
    let _ = writeln!(s, "DIMENSIONS {} {} 1", grid.nx() + 1, grid.ny() + 1);
    let _ = writeln!(s, "ORIGIN 0 0 0");
    let _ = writeln!(s, "SPACING {} {} 1", grid.hx(), grid.hy());
    let _ = writeln!(s, "CELL_DATA {}", grid.n_cells());
    for (name, v) in fields {
        let _ = writeln!(s, "SCALARS {name} double 1");
        let _ = writeln!(s, "LOOKUP_TABLE default");
        for x in v.iter() {
            let _ = writeln!(s, "{x}");
        }
    }
    Ok(s)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_cell_csv(path: &Path, grid: &FineGrid, fields: &[CellField<'_>]) -> Result<()> {
    write_text(path, &cell_csv(grid, fields)?)
}

pub fn write_cell_vtk(
    path: &Path,
    grid: &FineGrid,
    title: &str,
    fields: &[CellField<'_>],
) -> Result<()> {
    write_text(path, &cell_vtk(grid, title, fields)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trips_values() {
        let g = FineGrid::new(2, 1, 1.0, 1.0).unwrap();
        let p = [0.1 + 0.2, 1e-300];
        let text = cell_csv(&g, &[("pressure", &p)]).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "i,j,x,y,pressure");
        assert_eq!(lines.len(), 3);
        let back: f64 = lines[1].rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(back, 0.1 + 0.2);
        assert!(cell_csv(&g, &[("p", &[1.0])]).is_err());
        assert!(cell_csv(&g, &[("a,b", &p)]).is_err());
    }

    #[test]
    fn vtk_layout() {
        let g = FineGrid::new(3, 2, 3.0, 1.0).unwrap();
        let s = vec![0.5; 6];
        let text = cell_vtk(&g, "run", &[("saturation", &s)]).unwrap();
        assert!(text.contains("DIMENSIONS 4 3 1\n"));
        assert!(text.contains("SPACING 1 0.5 1\n"));
        assert!(text.contains("CELL_DATA 6\nSCALARS saturation double 1\nLOOKUP_TABLE default\n"));
        assert_eq!(text.lines().filter(|l| *l == "0.5").count(), 6);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/out.vtk");
        write_cell_vtk(&path, &g, "run", &[("saturation", &s)]).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), text);
    }
}
