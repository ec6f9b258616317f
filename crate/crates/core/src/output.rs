//! CSV and report emission with atomic writes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

/// One CSV field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// Formats a number with 13 significant digits in exponent notation.
pub fn format_number(v: f64) -> String {
    format!("{v:.12e}")
}

pub fn render_csv(header: &[&str], rows: &[Vec<Cell>]) -> Result<String> {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Dimension(format!("row has {} fields, header has {}", row.len(), header.len())));
        }
        for (k, cell) in row.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            match cell {
                Cell::Num(v) => out.push_str(&format_number(*v)),
                Cell::Int(v) => {
                    let _ = write!(out, "{v}");
                }
                Cell::Text(s) => {
                    if s.contains([',', '\n', '"']) {
                        return Err(Error::Argument(format!("text field {s:?} needs quoting")));
                    }
                    out.push_str(s);
                }
            }
        }
        out.push('\n');
    }
    Ok(out)
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error.to_string()))?;
    Ok(())
}

/// Summary written next to the data files of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub subcommand: String,
    pub config_digest: String,
    pub seed: u64,
    pub files: Vec<String>,
    pub metrics: BTreeMap<String, Value>,
}

impl RunReport {
    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).and_then(Value::as_f64)
    }

    pub fn flag(&self, key: &str) -> Option<bool> {
        self.metrics.get(key).and_then(Value::as_bool)
    }

    pub fn file_name(&self) -> String {
        format!("{}.report.json", self.subcommand)
    }
}

/// Collects the files of one run and produces its report.
pub struct Emitter {
    dir: PathBuf,
    report: RunReport,
}

impl Emitter {
    pub fn new(dir: &Path, subcommand: &str, config_digest: String, seed: u64) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            report: RunReport {
                subcommand: subcommand.to_string(),
                config_digest,
                seed,
                files: Vec::new(),
                metrics: BTreeMap::new(),
            },
        })
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<Cell>]) -> Result<()> {
        write_atomic(&self.dir.join(name), render_csv(header, rows)?.as_bytes())?;
        self.report.files.push(name.to_string());
        Ok(())
    }

    pub fn metric(&mut self, key: &str, value: impl Into<Value>) {
        self.report.metrics.insert(key.to_string(), value.into());
    }

    /// Stores a float, writing non-finite values as strings.
    pub fn number(&mut self, key: &str, value: f64) {
        let v =
            serde_json::Number::from_f64(value).map(Value::Number).unwrap_or_else(|| Value::String(value.to_string()));
        self.report.metrics.insert(key.to_string(), v);
    }

    pub fn finish(self) -> Result<RunReport> {
        let mut json = serde_json::to_string_pretty(&self.report).map_err(|e| Error::Io(e.to_string()))?;
        json.push('\n');
        write_atomic(&self.dir.join(self.report.file_name()), json.as_bytes())?;
        Ok(self.report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_keeps_precision() {
        let s = format_number(std::f64::consts::PI);
        assert_eq!(s, "3.141592653590e0");
        assert!((s.parse::<f64>().unwrap() - std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(format_number(-0.25), "-2.500000000000e-1");
    }

    #[test]
    fn csv_layout() {
        let csv = render_csv(&["a", "b"], &[vec![1.0.into(), "x".into()], vec![Cell::Int(3), 0.5.into()]]).unwrap();
        assert_eq!(csv, "a,b\n1.000000000000e0,x\n3,5.000000000000e-1\n");
        assert!(render_csv(&["a"], &[vec![]]).is_err());
        assert!(render_csv(&["a"], &[vec!["x,y".into()]]).is_err());
    }

    #[test]
    fn emitter_lists_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut em = Emitter::new(dir.path(), "demo", "abc".into(), 4).unwrap();
        em.csv("t.csv", &["x"], &[vec![1.0.into()]]).unwrap();
        em.number("inf", f64::INFINITY);
        let report = em.finish().unwrap();
        assert_eq!(report.files, vec!["t.csv"]);
        assert!(dir.path().join("demo.report.json").exists());
        assert_eq!(std::fs::read_to_string(dir.path().join("t.csv")).unwrap(), "x\n1.000000000000e0\n");
    }
}
