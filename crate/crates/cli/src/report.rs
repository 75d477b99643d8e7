//! CSV and JSON records. Floats are written in shortest round-trip form, so
//! every emitted number parses back to the same `f64`.

use std::path::Path;

use hdsphere::montecarlo::CellResult;
use hdsphere::sphere::SphericalSample;
use hdsphere::testing::{TestId, TestOutcome};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

/// One (cell, test) row of a simulation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRow {
    pub n: usize,
    pub p: usize,
    pub family: String,
    pub j: Option<u8>,
    pub ell: f64,
    pub test_id: TestId,
    #[serde(rename = "M")]
    pub m: usize,
    pub rejections: usize,
    pub frequency: f64,
    pub se: f64,
    pub asymptotic_power: Option<f64>,
    pub seed: u64,
}

pub fn sim_rows(results: &[CellResult]) -> Vec<SimRow> {
    let mut rows = Vec::new();
    for r in results {
        for t in &r.tallies {
            rows.push(SimRow {
                n: r.cell.n,
                p: r.cell.p,
                family: r.cell.alternative.family().to_string(),
                j: r.cell.alternative.j(),
                ell: r.cell.alternative.ell(),
                test_id: t.test_id,
                m: r.cell.replicates,
                rejections: t.rejections,
                frequency: t.frequency,
                se: t.se,
                asymptotic_power: t.asymptotic_power,
                seed: r.master_seed,
            });
        }
    }
    rows
}

/// Result of a single test on a data file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub test_id: TestId,
    pub n: usize,
    pub p: usize,
    pub statistic: f64,
    pub critical: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
}

impl TestRecord {
    pub fn new(o: &TestOutcome, n: usize, p: usize) -> Self {
        TestRecord {
            test_id: o.test_id,
            n,
            p,
            statistic: o.statistic,
            critical: o.critical,
            p_value: o.p_value,
            reject: o.reject,
            alpha: o.alpha,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub tau: f64,
    pub power: f64,
}

pub fn to_csv_string<T: Serialize>(rows: &[T]) -> Result<String, String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| e.to_string())?;
    }
    let bytes = w.into_inner().map_err(|e| e.to_string())?;
    String::from_utf8(bytes).map_err(|e| e.to_string())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), String> {
    let s = to_csv_string(rows)?;
    std::fs::write(path, s).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, String> {
    let mut r = csv::Reader::from_path(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    r.deserialize().map(|x| x.map_err(|e| e.to_string())).collect()
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    s.push('\n');
    std::fs::write(path, s).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

/// Rows of a sample, one per line, without a header.
pub fn write_sample_csv(path: &Path, sample: &SphericalSample) -> Result<(), String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for row in sample.rows() {
        w.serialize(row).map_err(|e| e.to_string())?;
    }
    let bytes = w.into_inner().map_err(|e| e.to_string())?;
    std::fs::write(path, bytes).map_err(|e| format!("cannot write {}: {e}", path.display()))
}
