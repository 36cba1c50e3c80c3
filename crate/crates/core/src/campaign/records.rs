//! Measurement records and their CSV form.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const RECORD_COLUMNS: [&str; 7] = [
    "material",
    "configuration",
    "gamma0_hz",
    "gamma0_err_hz",
    "device",
    "qubit",
    "t_days",
];

/// Per-measurement table of filter-configuration datasets (36 rows).
pub const FILTER_SURVEY_CSV: &str = include_str!("../../data/filter_survey.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Material {
    Nb,
    Ta,
}

impl fmt::Display for Material {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Material::Nb => "Nb",
            Material::Ta => "Ta",
        })
    }
}

impl FromStr for Material {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "Nb" | "nb" | "niobium" => Ok(Material::Nb),
            "Ta" | "ta" | "tantalum" => Ok(Material::Ta),
            other => Err(format!("unknown material `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub material: Material,
    pub configuration: String,
    /// Hz.
    pub gamma0: f64,
    pub gamma0_err: f64,
    pub device: String,
    pub qubit: String,
    /// Days since condensation.
    pub t_days: f64,
}

impl MeasurementRecord {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.gamma0 > 0.0 && self.gamma0.is_finite()) {
            return Err(format!("gamma0_hz must be > 0, got {}", self.gamma0));
        }
        if !(self.gamma0_err >= 0.0) {
            return Err(format!("gamma0_err_hz must be ≥ 0, got {}", self.gamma0_err));
        }
        if !(self.t_days > 0.0) {
            return Err(format!("t_days must be > 0, got {}", self.t_days));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ingested {
    pub records: Vec<MeasurementRecord>,
    pub warnings: Vec<String>,
}

/// Parses and validates records. Any malformed row fails the whole ingest
/// with its 1-based line number.
pub fn ingest_records<R: Read>(source: R) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Ok(Ingested {
            records: Vec::new(),
            warnings: vec!["empty input: no records".to_string()],
        });
    }
    let mut idx = [0usize; 7];
    for (slot, name) in idx.iter_mut().zip(RECORD_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
    }

    let mut out = Ingested::default();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let bad = |reason: String| Error::MalformedRecord { line, reason };
        let num = |i: usize, name: &str| -> Result<f64> {
            row.get(idx[i]).unwrap_or("").parse::<f64>().map_err(|_| {
                bad(format!(
                    "`{name}` is not a number: `{}`",
                    row.get(idx[i]).unwrap_or("")
                ))
            })
        };
        let material = row[idx[0]].parse::<Material>().map_err(bad)?;
        let record = MeasurementRecord {
            material,
            configuration: row[idx[1]].to_string(),
            gamma0: num(2, "gamma0_hz")?,
            gamma0_err: num(3, "gamma0_err_hz")?,
            device: row[idx[4]].to_string(),
            qubit: row[idx[5]].to_string(),
            t_days: num(6, "t_days")?,
        };
        record.validate().map_err(bad)?;
        out.records.push(record);
    }
    if out.records.is_empty() {
        out.warnings.push("no records after header".to_string());
    }
    Ok(out)
}

/// The shipped filter-configuration table.
pub fn filter_survey() -> Vec<MeasurementRecord> {
    ingest_records(FILTER_SURVEY_CSV.as_bytes())
        .expect("shipped fixture is valid")
        .records
}

pub fn write_records<W: Write>(records: &[MeasurementRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_COLUMNS)?;
    for r in records {
        w.write_record(&[
            r.material.to_string(),
            r.configuration.clone(),
            r.gamma0.to_string(),
            r.gamma0_err.to_string(),
            r.device.clone(),
            r.qubit.clone(),
            r.t_days.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
