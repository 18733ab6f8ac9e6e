//! Plot-ready artifacts.

pub mod filter;

pub use filter::{filter_trajectory, StreamFilter};

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::stat::{clopper_pearson, StatError};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("no values")]
    Empty,
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Stat(#[from] StatError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub schema_version: u32,
    pub origin: f64,
    pub width: f64,
    pub counts: Vec<u64>,
    pub total: u64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Copy, Debug)]
pub enum Buckets {
    Count(usize),
    Width(f64),
}

impl Histogram {
    pub fn new(values: &[f64], buckets: Buckets) -> Result<Self, OutputError> {
        if values.is_empty() {
            return Err(OutputError::Empty);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(OutputError::Invalid("non-finite value".into()));
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (origin, width, n) = match buckets {
            Buckets::Count(0) => return Err(OutputError::Invalid("zero buckets".into())),
            Buckets::Count(n) => {
                if max > min {
                    (min, (max - min) / n as f64, n)
                } else {
                    (min, 1.0, 1)
                }
            }
            Buckets::Width(w) => {
                if !(w > 0.0 && w.is_finite()) {
                    return Err(OutputError::Invalid(format!("bucket width {w}")));
                }
                let origin = (min / w).floor() * w;
                (origin, w, ((max - origin) / w).floor() as usize + 1)
            }
        };
        let mut counts = vec![0u64; n];
        for v in values {
            let i = (((v - origin) / width).floor().max(0.0) as usize).min(n - 1);
            counts[i] += 1;
        }
        let ms = crate::stat::mean_std(values)?;
        Ok(Histogram {
            schema_version: SCHEMA_VERSION,
            origin,
            width,
            counts,
            total: values.len() as u64,
            mean: ms.mean,
            std: ms.std,
        })
    }

    /// `(lo, hi, count)` per bucket.
    pub fn rows(&self) -> Vec<(f64, f64, u64)> {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                (
                    self.origin + i as f64 * self.width,
                    self.origin + (i + 1) as f64 * self.width,
                    c,
                )
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), OutputError> {
        let mut wr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        wr.write_record(["bucket_lo", "bucket_hi", "count"])?;
        for (lo, hi, c) in self.rows() {
            wr.write_record([lo.to_string(), hi.to_string(), c.to_string()])?;
        }
        wr.flush().map_err(|e| OutputError::Io {
            path: "<csv>".into(),
            source: e,
        })?;
        Ok(())
    }

    /// Bucket rows back from CSV.
    pub fn read_csv<R: Read>(r: R) -> Result<Vec<(f64, f64, u64)>, OutputError> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["bucket_lo", "bucket_hi", "count"] {
            return Err(OutputError::Invalid(format!("unexpected header {headers:?}")));
        }
        let mut out = Vec::new();
        for rec in rd.deserialize() {
            out.push(rec?);
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub value: f64,
    pub cdf: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub schema_version: u32,
    pub n: u64,
    pub alpha: f64,
    pub points: Vec<CdfPoint>,
}

/// Empirical CDF at each distinct value with a Clopper-Pearson band.
pub fn build_cdf(values: &[f64], alpha: f64) -> Result<Distribution, OutputError> {
    if values.is_empty() {
        return Err(OutputError::Empty);
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len() as u64;
    let mut points = Vec::new();
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[i] {
            j += 1;
        }
        let k = (j + 1) as u64;
        let ci = clopper_pearson(k, n, alpha)?;
        points.push(CdfPoint {
            value: v[i],
            cdf: k as f64 / n as f64,
            lo: ci.lo,
            hi: ci.hi,
        });
        i = j + 1;
    }
    Ok(Distribution {
        schema_version: SCHEMA_VERSION,
        n,
        alpha,
        points,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub schema_version: u32,
    pub expr: String,
    pub resolution: usize,
    pub points: Vec<(f64, f64)>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), OutputError> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|source| OutputError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, OutputError> {
    let text = std::fs::read_to_string(path).map_err(|source| OutputError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_histogram_csv(path: &Path, h: &Histogram) -> Result<(), OutputError> {
    let f = std::fs::File::create(path).map_err(|source| OutputError::Io {
        path: path.display().to_string(),
        source,
    })?;
    h.write_csv(std::io::BufWriter::new(f))
}
