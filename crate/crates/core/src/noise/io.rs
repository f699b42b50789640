//! Atom-cloud dumps: CSV body `t,x1[,x2[,x3]],z` plus a JSON metadata sidecar.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::marks::{Compensation, LevyMarkSpec};
use super::realization::{NoiseRealization, SimulationBox};
use crate::error::Result;

pub const SIDECAR_SCHEMA: u32 = 1;

pub fn csv_header(dim: usize) -> String {
    let mut h = String::from("t");
    for i in 1..=dim {
        h.push_str(&format!(",x{i}"));
    }
    h.push_str(",z");
    h
}

/// Writes the cloud in generation order. Numbers use the shortest round-trip
/// representation, so equal clouds produce equal bytes.
pub fn write_atoms_csv<W: Write>(real: &NoiseRealization, mut out: W) -> Result<()> {
    let dim = real.dim();
    writeln!(out, "{}", csv_header(dim))?;
    for a in &real.atoms {
        write!(out, "{}", a.t)?;
        for c in a.position(dim) {
            write!(out, ",{c}")?;
        }
        writeln!(out, ",{}", a.z)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct AtomSidecar<'a> {
    pub schema_version: u32,
    pub spec: &'a LevyMarkSpec,
    pub window: SimulationBox,
    pub seed: u64,
    pub cutoff: f64,
    pub atom_count: usize,
    pub discarded_moment_bound: f64,
    pub compensation: Compensation,
}

pub fn sidecar<'a>(spec: &'a LevyMarkSpec, real: &NoiseRealization) -> AtomSidecar<'a> {
    AtomSidecar {
        schema_version: SIDECAR_SCHEMA,
        spec,
        window: real.window,
        seed: real.seed,
        cutoff: real.cutoff,
        atom_count: real.len(),
        discarded_moment_bound: real.compensation.discarded_moment,
        compensation: real.compensation,
    }
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn dump_realization(dir: &Path, stem: &str, spec: &LevyMarkSpec, real: &NoiseRealization) -> Result<()> {
    let csv = std::fs::File::create(dir.join(format!("{stem}.csv")))?;
    let mut csv = std::io::BufWriter::new(csv);
    write_atoms_csv(real, &mut csv)?;
    csv.flush()?;
    let json = serde_json::to_string_pretty(&sidecar(spec, real))?;
    std::fs::write(dir.join(format!("{stem}.json")), json + "\n")?;
    Ok(())
}
