//! Versioned CSV and JSON writers shared by the CLI and the experiment reports.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::FORMAT_VERSION;

/// JSON envelope carrying the format version next to the payload.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Versioned<T> {
    pub format_version: u32,
    #[serde(flatten)]
    pub data: T,
}

impl<T> Versioned<T> {
    pub fn new(data: T) -> Self {
        Versioned { format_version: FORMAT_VERSION, data }
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(&Versioned::new(value))?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json_string(value)? + "\n")?;
    Ok(())
}

/// CSV text with a `# format_version=N` comment line, then header and rows.
pub fn csv_string<S: AsRef<str>>(header: &[S], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(header.iter().map(|s| s.as_ref()))?;
    for r in rows {
        if r.len() != header.len() {
            return Err(invalid(format!("row has {} fields, header {}", r.len(), header.len())));
        }
        w.write_record(r)?;
    }
    let body = w.into_inner().map_err(|e| invalid(e.to_string()))?;
    Ok(format!("# format_version={FORMAT_VERSION}\n{}", String::from_utf8_lossy(&body)))
}

pub fn write_csv<S: AsRef<str>>(path: &Path, header: &[S], rows: &[Vec<String>]) -> Result<()> {
    std::fs::write(path, csv_string(header, rows)?)?;
    Ok(())
}

/// Formats a float so that it round-trips exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

/// Reads a headerless numeric matrix; `#` lines are comments.
pub fn read_matrix_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    parse_matrix_csv(&std::fs::read_to_string(path)?)
}

pub fn parse_matrix_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| invalid(format!("not a number: {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_roundtrip() {
        let m = parse_matrix_csv("# w\n0, 0.5\n1,0\n").unwrap();
        assert_eq!(m, vec![vec![0.0, 0.5], vec![1.0, 0.0]]);
        assert!(parse_matrix_csv("a,b\n").is_err());
    }

    #[test]
    fn csv_has_version() {
        let s = csv_string(&["a", "b"], &[vec![fmt_f64(0.1), "x".into()]]).unwrap();
        assert!(s.starts_with("# format_version=1\na,b\n"));
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
        assert!(csv_string(&["a"], &[vec![]]).is_err());
    }

    #[test]
    fn json_envelope() {
        #[derive(Serialize)]
        struct S {
            c: f64,
        }
        let s = to_json_string(&S { c: 0.5 }).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["format_version"], 1);
        assert_eq!(v["c"], 0.5);
    }
}
