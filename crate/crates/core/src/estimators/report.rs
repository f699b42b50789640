use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// An ensemble estimate at one value of the study parameter (`L`, `n`, `R` or `N`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyPoint {
    pub param: f64,
    pub estimate: Estimate,
}

/// One raw per-seed value; `None` stands for the beyond-window sentinel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedValue {
    pub seed: u64,
    pub param: f64,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub schema_version: u32,
    pub study: String,
    /// What `points` estimate.
    pub quantity: String,
    pub points: Vec<StudyPoint>,
    pub verdicts: BTreeMap<String, bool>,
    pub metrics: BTreeMap<String, f64>,
    pub traces: Vec<SeedValue>,
    pub notes: Vec<String>,
}

impl StudyReport {
    pub fn new(study: impl Into<String>, quantity: impl Into<String>) -> Self {
        Self {
            schema_version: REPORT_SCHEMA,
            study: study.into(),
            quantity: quantity.into(),
            points: Vec::new(),
            verdicts: BTreeMap::new(),
            metrics: BTreeMap::new(),
            traces: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn verdict(&self, name: &str) -> Option<bool> {
        self.verdicts.get(name).copied()
    }

    /// Per-seed values at one parameter, in seed order.
    pub fn trace_at(&self, param: f64) -> Vec<&SeedValue> {
        self.traces.iter().filter(|t| t.param == param).collect()
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    /// Long table `study,param,seed,value` of the raw traces; the sentinel is an
    /// empty value.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "study,param,seed,value")?;
        for t in &self.traces {
            match t.value {
                Some(v) => writeln!(w, "{},{:?},{},{:?}", self.study, t.param, t.seed, v)?,
                None => writeln!(w, "{},{:?},{},", self.study, t.param, t.seed)?,
            }
        }
        Ok(())
    }
}
