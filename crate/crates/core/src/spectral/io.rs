//! Field snapshots: flat little-endian binary and CSV.

use std::io::{Read, Write};

use super::field::Field;
use super::grid::Grid;
use crate::error::{Error, Result};

/// Writes `d`, `n` (u64) and `L` (f64) followed by the row-major values,
/// all little-endian.
pub fn write_binary<W: Write>(field: &Field, mut out: W) -> Result<()> {
    let g = field.grid();
    out.write_all(&(g.dim() as u64).to_le_bytes())?;
    out.write_all(&(g.n() as u64).to_le_bytes())?;
    out.write_all(&g.half_length().to_le_bytes())?;
    let mut buf = Vec::with_capacity(8 * g.len());
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_binary<R: Read>(mut input: R) -> Result<Field> {
    let mut word = [0u8; 8];
    input.read_exact(&mut word)?;
    let d = u64::from_le_bytes(word) as usize;
    input.read_exact(&mut word)?;
    let n = u64::from_le_bytes(word) as usize;
    input.read_exact(&mut word)?;
    let half_length = f64::from_le_bytes(word);
    let grid = Grid::new(d, n, half_length)?;
    let mut bytes = vec![0u8; 8 * grid.len()];
    input.read_exact(&mut bytes)?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Field::from_values(grid, values)
}

/// One row per node: coordinates `x0..x{d-1}` then `value`.
pub fn write_csv<W: Write>(field: &Field, out: W) -> Result<()> {
    let g = field.grid();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..g.dim()).map(|a| format!("x{a}")).collect();
    header.push("value".into());
    w.write_record(&header).map_err(csv_err)?;
    for (i, v) in field.values().iter().enumerate() {
        let p = g.point(i);
        let mut row: Vec<String> = p[..g.dim()].iter().map(|c| c.to_string()).collect();
        row.push(v.to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
