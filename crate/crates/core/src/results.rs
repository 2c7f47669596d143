//! Recorded waveforms, CSV persistence and comparison metrics.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum SeriesData {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl SeriesData {
    pub fn len(&self) -> usize {
        match self {
            SeriesData::Real(v) => v.len(),
            SeriesData::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn complex_at(&self, i: usize) -> Complex64 {
        match self {
            SeriesData::Real(v) => Complex64::new(v[i], 0.0),
            SeriesData::Complex(v) => v[i],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    /// Strictly increasing.
    pub t: Vec<f64>,
    pub data: SeriesData,
}

impl Series {
    pub fn real(name: &str, t: Vec<f64>, values: Vec<f64>) -> Self {
        Self { name: name.to_string(), t, data: SeriesData::Real(values) }
    }

    pub fn as_real(&self) -> Option<&[f64]> {
        match &self.data {
            SeriesData::Real(v) => Some(v),
            SeriesData::Complex(_) => None,
        }
    }

    pub fn as_complex(&self) -> Option<&[Complex64]> {
        match &self.data {
            SeriesData::Complex(v) => Some(v),
            SeriesData::Real(_) => None,
        }
    }

    /// Linear interpolation at `t`; `None` outside the recorded span.
    fn sample(&self, t: f64) -> Option<Complex64> {
        let n = self.t.len();
        if n == 0 || t < self.t[0] || t > self.t[n - 1] {
            return None;
        }
        let j = self.t.partition_point(|&x| x <= t);
        if j == 0 {
            return Some(self.data.complex_at(0));
        }
        let i = j - 1;
        if i + 1 >= n || self.t[i] == t {
            return Some(self.data.complex_at(i));
        }
        let w = (t - self.t[i]) / (self.t[i + 1] - self.t[i]);
        Some(self.data.complex_at(i) * (1.0 - w) + self.data.complex_at(i + 1) * w)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultSet {
    pub series: Vec<Series>,
    /// Run description (scenario digest, configuration echo).
    pub metadata: Vec<(String, String)>,
}

impl ResultSet {
    pub fn get(&self, name: &str) -> Result<&Series> {
        self.series.iter().find(|s| s.name == name).ok_or_else(|| Error::MissingSignal(name.to_string()))
    }

    pub fn names(&self) -> Vec<&str> {
        self.series.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

fn fmt(x: f64) -> String {
    format!("{x:e}")
}

/// Writes one CSV per series (`<dir>/<name>.csv`) and `metadata.txt`.
/// Returns the CSV paths in series order.
pub fn write_results(rs: &ResultSet, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(rs.series.len());
    for s in &rs.series {
        let path = dir.join(format!("{}.csv", s.name));
        write_series(s, &path)?;
        paths.push(path);
    }
    let meta: String = rs.metadata.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    fs::write(dir.join("metadata.txt"), meta)?;
    Ok(paths)
}

pub fn write_series(s: &Series, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    match &s.data {
        SeriesData::Real(v) => {
            w.write_record(["t", s.name.as_str()])?;
            for (t, x) in s.t.iter().zip(v) {
                w.write_record([fmt(*t), fmt(*x)])?;
            }
        }
        SeriesData::Complex(v) => {
            w.write_record(["t".to_string(), format!("{}_re", s.name), format!("{}_im", s.name)])?;
            for (t, x) in s.t.iter().zip(v) {
                w.write_record([fmt(*t), fmt(x.re), fmt(x.im)])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV whose first column is `t`; every other column becomes a real
/// series named after its header.
pub fn read_csv(path: &Path) -> Result<ResultSet> {
    let mut r = csv::Reader::from_path(path)?;
    let headers: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if headers.first().map(String::as_str) != Some("t") {
        return Err(Error::InvalidParameter {
            name: path.display().to_string(),
            reason: "first column must be `t`".into(),
        });
    }
    let mut t = Vec::new();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); headers.len() - 1];
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            let field = rec.get(i).unwrap_or("").trim();
            field.parse().map_err(|_| Error::InvalidParameter {
                name: format!("{}:{}", path.display(), row + 2),
                reason: format!("column {} value {field:?} is not a number", headers[i]),
            })
        };
        t.push(parse(0)?);
        for (k, col) in cols.iter_mut().enumerate() {
            col.push(parse(k + 1)?);
        }
    }
    if t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter {
            name: path.display().to_string(),
            reason: "time stamps must be strictly increasing".into(),
        });
    }
    let series = headers[1..].iter().zip(cols).map(|(h, v)| Series::real(h, t.clone(), v)).collect();
    Ok(ResultSet { series, metadata: Vec::new() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub rmse: f64,
    pub rmse_relative: f64,
    pub max_abs_error: f64,
    /// Reference samples inside the overlap.
    pub samples: usize,
}

/// Error of `test` against `reference` on the reference time base, with
/// `test` linearly interpolated; only the overlapping span counts.
pub fn compare_series(reference: &Series, test: &Series) -> Result<Metrics> {
    let mut sq = 0.0;
    let mut ref_sq = 0.0;
    let mut max_abs: f64 = 0.0;
    let mut n = 0usize;
    for (i, &t) in reference.t.iter().enumerate() {
        let Some(y) = test.sample(t) else { continue };
        let x = reference.data.complex_at(i);
        let e = (x - y).norm();
        sq += e * e;
        ref_sq += x.norm_sqr();
        max_abs = max_abs.max(e);
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyOverlap);
    }
    let rmse = (sq / n as f64).sqrt();
    let rms_ref = (ref_sq / n as f64).sqrt();
    let rmse_relative = if rms_ref > 0.0 {
        rmse / rms_ref
    } else if rmse == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(Metrics { rmse, rmse_relative, max_abs_error: max_abs, samples: n })
}

pub fn compare(reference: &ResultSet, test: &ResultSet, name: &str) -> Result<Metrics> {
    compare_series(reference.get(name)?, test.get(name)?)
}
