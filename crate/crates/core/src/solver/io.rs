//! Field dumps.
//!
//! Binary layout, all little-endian: the 5-byte magic `SPDH1`, `u32` dimension,
//! `u64` time count, `u64` axis length, then the times, the axis and the values as
//! `f64` in `[level][site]` order with the first spatial axis slowest.

use std::io::{Read, Write};

use super::grid::{FieldGrid, GridGeometry};
use super::picard::SolveDiagnostics;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"SPDH1";

pub fn field_csv_header(dim: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=dim).map(|k| format!("x{k}")));
    cols.push("y".into());
    cols.join(",")
}

/// One row `t,x1..,y` per node, levels outermost.
pub fn write_field_csv<W: Write>(field: &FieldGrid, mut w: W) -> Result<()> {
    let g = &field.geometry;
    writeln!(w, "{}", field_csv_header(g.dim))?;
    for (k, &t) in g.times.iter().enumerate() {
        for site in 0..g.sites() {
            let x = g.site(site);
            write!(w, "{t:?}")?;
            for c in &x[..g.dim] {
                write!(w, ",{c:?}")?;
            }
            writeln!(w, ",{:?}", field.get(k, site))?;
        }
    }
    Ok(())
}

pub fn write_field_binary<W: Write>(field: &FieldGrid, mut w: W) -> Result<()> {
    let g = &field.geometry;
    w.write_all(MAGIC)?;
    w.write_all(&(g.dim as u32).to_le_bytes())?;
    w.write_all(&(g.times.len() as u64).to_le_bytes())?;
    w.write_all(&(g.axis.len() as u64).to_le_bytes())?;
    for v in g.times.iter().chain(&g.axis).chain(&field.values) {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Reads a binary dump; `norm_p` is not stored and must be supplied.
pub fn read_field_binary<R: Read>(mut r: R, norm_p: f64) -> Result<FieldGrid> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::GridMismatch("not an SPDH1 field dump".into()));
    }
    let mut d = [0u8; 4];
    r.read_exact(&mut d)?;
    let dim = u32::from_le_bytes(d) as usize;
    let n_times = read_u64(&mut r)? as usize;
    let n_axis = read_u64(&mut r)? as usize;
    let times = read_f64s(&mut r, n_times)?;
    let axis = read_f64s(&mut r, n_axis)?;
    let geometry = GridGeometry { times, axis, dim };
    let values = read_f64s(&mut r, n_times * geometry.sites())?;
    Ok(FieldGrid { geometry, values, norm_p })
}

pub fn write_diagnostics_json<W: Write>(diag: &SolveDiagnostics, w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, diag)?;
    Ok(())
}
