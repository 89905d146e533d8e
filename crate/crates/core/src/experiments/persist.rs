//! CSV tables: exact headers, shortest round-trip formatting for reals, an
//! optional leading `#` comment row, and atomic writes.

use std::io::Write;
use std::path::Path;

use csv::StringRecord;

use super::{
    BoundaryPoint, DenoiseRow, EnsembleKind, RateRow, SensitivityRow, SweepCell, TimingIterRow, TimingRow,
};
use crate::error::{Error, Result};

/// A row type with a fixed CSV layout.
pub trait CsvRow: Sized {
    const HEADER: &'static [&'static str];
    fn to_fields(&self) -> Vec<String>;
    fn from_fields(fields: &StringRecord, line: usize) -> Result<Self>;
}

fn field<T: std::str::FromStr>(fields: &StringRecord, idx: usize, line: usize) -> Result<T> {
    let raw = fields.get(idx).unwrap_or("");
    raw.parse().map_err(|_| Error::Parse { line, msg: format!("cannot parse `{raw}` in column {}", idx + 1) })
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn to_csv_string<R: CsvRow>(rows: &[R], comment: Option<&str>) -> Result<String> {
    let mut out = Vec::new();
    if let Some(c) = comment {
        for line in c.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(R::HEADER)?;
        for r in rows {
            w.write_record(r.to_fields())?;
        }
        w.flush()?;
    }
    String::from_utf8(out).map_err(|e| Error::Parse { line: 0, msg: e.to_string() })
}

pub fn save<R: CsvRow>(path: &Path, rows: &[R], comment: Option<&str>) -> Result<()> {
    write_atomic(path, to_csv_string(rows, comment)?.as_bytes())
}

pub fn parse_csv<R: CsvRow>(text: &str) -> Result<Vec<R>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    for (i, expected) in R::HEADER.iter().enumerate() {
        let found = header.get(i).unwrap_or("");
        if found != *expected {
            return Err(Error::MalformedHeader { expected: expected.to_string(), found: found.to_string() });
        }
    }
    if header.len() > R::HEADER.len() {
        return Err(Error::MalformedHeader {
            expected: "<end of header>".into(),
            found: header.get(R::HEADER.len()).unwrap_or("").to_string(),
        });
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        rows.push(R::from_fields(&rec, line)?);
    }
    Ok(rows)
}

pub fn load<R: CsvRow>(path: &Path) -> Result<Vec<R>> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    parse_csv(&text)
}

impl CsvRow for SweepCell {
    const HEADER: &'static [&'static str] = &["s", "m", "trials", "successes", "mean_final_err"];
    fn to_fields(&self) -> Vec<String> {
        vec![
            self.s.to_string(),
            self.m.to_string(),
            self.trials.to_string(),
            self.successes.to_string(),
            self.mean_final_err.to_string(),
        ]
    }
    fn from_fields(f: &StringRecord, line: usize) -> Result<Self> {
        Ok(Self {
            s: field(f, 0, line)?,
            m: field(f, 1, line)?,
            trials: field(f, 2, line)?,
            successes: field(f, 3, line)?,
            mean_final_err: field(f, 4, line)?,
        })
    }
}

impl CsvRow for BoundaryPoint {
    const HEADER: &'static [&'static str] = &["s", "m_star"];
    fn to_fields(&self) -> Vec<String> {
        vec![self.s.to_string(), self.m_star.to_string()]
    }
    fn from_fields(f: &StringRecord, line: usize) -> Result<Self> {
        Ok(Self { s: field(f, 0, line)?, m_star: field(f, 1, line)? })
    }
}

impl CsvRow for RateRow {
    const HEADER: &'static [&'static str] = &["s", "m", "iter", "median_rel_err", "normalized_err"];
    fn to_fields(&self) -> Vec<String> {
        vec![
            self.s.to_string(),
            self.m.to_string(),
            self.iter.to_string(),
            self.median_rel_err.to_string(),
            self.normalized_err.to_string(),
        ]
    }
    fn from_fields(f: &StringRecord, line: usize) -> Result<Self> {
        Ok(Self {
            s: field(f, 0, line)?,
            m: field(f, 1, line)?,
            iter: field(f, 2, line)?,
            median_rel_err: field(f, 3, line)?,
            normalized_err: field(f, 4, line)?,
        })
    }
}

fn ensemble_field(f: &StringRecord, line: usize) -> Result<EnsembleKind> {
    let raw = f.get(0).unwrap_or("");
    raw.parse().map_err(|_| Error::Parse { line, msg: format!("unknown ensemble `{raw}`") })
}

impl CsvRow for TimingRow {
    const HEADER: &'static [&'static str] = &["ensemble", "m", "median_ms"];
    fn to_fields(&self) -> Vec<String> {
        vec![self.ensemble.name().to_string(), self.m.to_string(), self.median_ms.to_string()]
    }
    fn from_fields(f: &StringRecord, line: usize) -> Result<Self> {
        Ok(Self { ensemble: ensemble_field(f, line)?, m: field(f, 1, line)?, median_ms: field(f, 2, line)? })
    }
}

impl CsvRow for TimingIterRow {
    const HEADER: &'static [&'static str] = &["ensemble", "m", "median_iters", "successes"];
    fn to_fields(&self) -> Vec<String> {
        vec![
            self.ensemble.name().to_string(),
            self.m.to_string(),
            self.median_iters.to_string(),
            self.successes.to_string(),
        ]
    }
    fn from_fields(f: &StringRecord, line: usize) -> Result<Self> {
        Ok(Self {
            ensemble: ensemble_field(f, line)?,
            m: field(f, 1, line)?,
            median_iters: field(f, 2, line)?,
            successes: field(f, 3, line)?,
        })
    }
}

impl CsvRow for SensitivityRow {
    const HEADER: &'static [&'static str] = &["ratio", "plateau_err", "bound"];
    fn to_fields(&self) -> Vec<String> {
        vec![self.ratio.to_string(), self.plateau_err.to_string(), self.bound.to_string()]
    }
    fn from_fields(f: &StringRecord, line: usize) -> Result<Self> {
        Ok(Self { ratio: field(f, 0, line)?, plateau_err: field(f, 1, line)?, bound: field(f, 2, line)? })
    }
}

impl CsvRow for DenoiseRow {
    const HEADER: &'static [&'static str] = &["sigma", "ratio_estimate", "stderr", "bound"];
    fn to_fields(&self) -> Vec<String> {
        vec![
            self.sigma.to_string(),
            self.ratio_estimate.to_string(),
            self.stderr.to_string(),
            self.bound.to_string(),
        ]
    }
    fn from_fields(f: &StringRecord, line: usize) -> Result<Self> {
        Ok(Self {
            sigma: field(f, 0, line)?,
            ratio_estimate: field(f, 1, line)?,
            stderr: field(f, 2, line)?,
            bound: field(f, 3, line)?,
        })
    }
}
