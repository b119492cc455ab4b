//! CSV and JSON output of potential grids.

use super::PotentialGrid;
use std::io::{self, Write};

/// One row per node: coordinates, then the scalar, then vector components.
pub fn write_csv<W: Write>(grid: &PotentialGrid, mut out: W) -> io::Result<()> {
    let mut header: Vec<String> = grid.vars.clone();
    if let Some(name) = &grid.scalar_name {
        header.push(name.clone());
    }
    let width = grid.vector.as_ref().and_then(|v| v.first()).map_or(0, |v| v.len());
    if let Some(name) = &grid.vector_name {
        header.extend((1..=width).map(|i| format!("{name}_{i}")));
    }
    writeln!(out, "{}", header.join(","))?;
    let g = grid.grid();
    for idx in 0..g.len() {
        let mut row: Vec<String> = g.point(idx).iter().map(|x| format!("{x:.17e}")).collect();
        if let Some(s) = &grid.scalar {
            row.push(format!("{:.17e}", s[idx]));
        }
        if let Some(v) = &grid.vector {
            row.extend(v[idx].iter().map(|x| format!("{x:.17e}")));
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_json<W: Write>(grid: &PotentialGrid, out: W) -> io::Result<()> {
    serde_json::to_writer_pretty(out, grid).map_err(io::Error::other)
}
