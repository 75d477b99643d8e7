//! CSV ingestion: missing-value imputation, centering and projection onto
//! the sphere.

use std::io::Read;
use std::path::Path;

use hdsphere::sphere::{DataMatrix, SphericalSample};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum IngestError {
    #[error("column {column} has no observed values")]
    AllMissingColumn { column: usize },
    #[error("row {row} is the zero vector after preprocessing")]
    ZeroVector { row: usize },
    #[error("malformed CSV: {0}")]
    MalformedCsv(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestOptions {
    pub impute: bool,
    pub center: bool,
    pub project: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            impute: true,
            center: true,
            project: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IngestReport {
    pub n: usize,
    pub p: usize,
    pub header: Option<Vec<String>>,
    pub missing: usize,
    pub imputed: usize,
    /// Column means subtracted; zeros when centering is off.
    pub centering: Vec<f64>,
    /// The data after imputation and centering, before projection.
    pub data: DataMatrix,
    /// Rows projected onto the sphere, when projection is on.
    pub sample: Option<SphericalSample>,
}

fn is_missing(s: &str) -> bool {
    s.is_empty() || s == "NA"
}

fn parse_cell(s: &str, row: usize, col: usize) -> Result<Option<f64>, IngestError> {
    let s = s.trim();
    if is_missing(s) {
        return Ok(None);
    }
    let v: f64 = s
        .parse()
        .map_err(|_| IngestError::MalformedCsv(format!("row {row}, column {col}: cannot parse {s:?}")))?;
    if !v.is_finite() {
        return Err(IngestError::MalformedCsv(format!("row {row}, column {col}: non-finite value")));
    }
    Ok(Some(v))
}

pub fn ingest_csv(path: &Path, opts: IngestOptions) -> Result<IngestReport, IngestError> {
    let file = std::fs::File::open(path).map_err(|e| IngestError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    ingest_reader(file, opts)
}

/// Reads a rectangular CSV. The first record is a header when any of its
/// fields is neither a number nor a missing marker.
pub fn ingest_reader<R: Read>(reader: R, opts: IngestOptions) -> Result<IngestReport, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut header = None;
    let mut cells: Vec<Option<f64>> = Vec::new();
    let mut p = 0;
    let mut n = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| IngestError::MalformedCsv(e.to_string()))?;
        if i == 0 {
            p = rec.len();
            let numeric = rec.iter().all(|f| is_missing(f) || f.parse::<f64>().is_ok());
            if !numeric {
                header = Some(rec.iter().map(str::to_string).collect());
                continue;
            }
        }
        for (j, f) in rec.iter().enumerate() {
            cells.push(parse_cell(f, n, j)?);
        }
        n += 1;
    }
    if n == 0 {
        return Err(IngestError::MalformedCsv("no data rows".into()));
    }
    if p < 2 {
        return Err(IngestError::MalformedCsv(format!("need at least 2 columns, found {p}")));
    }
    let missing = cells.iter().filter(|c| c.is_none()).count();
    let mut values = vec![0.0; n * p];
    let mut imputed = 0;
    if missing > 0 && !opts.impute {
        return Err(IngestError::MalformedCsv(format!(
            "{missing} missing cells and imputation is off"
        )));
    }
    for j in 0..p {
        let observed: Vec<f64> = (0..n).filter_map(|i| cells[i * p + j]).collect();
        if observed.is_empty() {
            return Err(IngestError::AllMissingColumn { column: j });
        }
        let mean = observed.iter().sum::<f64>() / observed.len() as f64;
        for i in 0..n {
            values[i * p + j] = match cells[i * p + j] {
                Some(v) => v,
                None => {
                    imputed += 1;
                    mean
                }
            };
        }
    }
    let mut centering = vec![0.0; p];
    if opts.center {
        for (j, c) in centering.iter_mut().enumerate() {
            *c = (0..n).map(|i| values[i * p + j]).sum::<f64>() / n as f64;
        }
        for row in values.chunks_exact_mut(p) {
            row.iter_mut().zip(&centering).for_each(|(x, c)| *x -= c);
        }
    }
    let data = DataMatrix::new(n, p, values).map_err(|e| IngestError::MalformedCsv(e.to_string()))?;
    let sample = if opts.project {
        if let Some(row) = data.rows().position(|r| r.iter().all(|&x| x == 0.0)) {
            return Err(IngestError::ZeroVector { row });
        }
        Some(
            data.spatial_signs()
                .map_err(|e| IngestError::MalformedCsv(e.to_string()))?,
        )
    } else {
        None
    };
    Ok(IngestReport {
        n,
        p,
        header,
        missing,
        imputed,
        centering,
        data,
        sample,
    })
}
