//! Rectangular result tables and their CSV / JSON encodings.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::invalid(format!("unknown output format '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub values: Vec<f64>,
    pub error: Option<String>,
}

impl Row {
    pub fn ok(values: Vec<f64>) -> Self {
        Self {
            values,
            error: None,
        }
    }
}

/// Ordered rows under a fixed header.
///
/// When `error_column` is set the encodings carry a trailing `error` column that is
/// empty for rows that evaluated cleanly.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub header: Vec<String>,
    pub rows: Vec<Row>,
    pub error_column: bool,
}

impl SweepTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
            error_column: false,
        }
    }

    pub fn with_error_column(mut self) -> Self {
        self.error_column = true;
        self
    }

    pub fn push(&mut self, row: Row) -> Result<()> {
        if row.values.len() != self.header.len() {
            return Err(Error::invalid(format!(
                "row has {} values, header has {} columns",
                row.values.len(),
                self.header.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r.values[k]).collect())
    }

    pub fn error_count(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    fn full_header(&self) -> Vec<&str> {
        let mut h: Vec<&str> = self.header.iter().map(String::as_str).collect();
        if self.error_column {
            h.push("error");
        }
        h
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::invalid(format!("CSV encoding failed: {e}"));
        w.write_record(self.full_header()).map_err(csv_err)?;
        for row in &self.rows {
            let mut rec: Vec<String> = row.values.iter().map(|v| format_float(*v)).collect();
            if self.error_column {
                rec.push(row.error.clone().unwrap_or_default());
            }
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.into_inner()
            .map_err(|e| Error::invalid(format!("CSV encoding failed: {e}")))
    }

    /// JSON array of row objects. Numbers keep 17 significant digits; non-finite values become `null`.
    pub fn to_json(&self) -> String {
        let header = self.full_header();
        let mut out = String::from("[");
        for (i, row) in self.rows.iter().enumerate() {
            out.push_str(if i == 0 { "\n  {" } else { ",\n  {" });
            for (k, name) in header.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                let key = serde_json::to_string(name).expect("string keys serialize");
                let val = if k < row.values.len() {
                    let v = row.values[k];
                    if v.is_finite() {
                        format_float(v)
                    } else {
                        "null".to_string()
                    }
                } else {
                    match &row.error {
                        Some(e) => serde_json::to_string(e).expect("strings serialize"),
                        None => "null".to_string(),
                    }
                };
                let _ = write!(out, "{key}: {val}");
            }
            out.push('}');
        }
        out.push_str(if self.rows.is_empty() { "]\n" } else { "\n]\n" });
        out
    }

    pub fn encode(&self, format: OutputFormat) -> Result<Vec<u8>> {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => Ok(self.to_json().into_bytes()),
        }
    }

    /// Parses CSV produced by [`SweepTable::to_csv`].
    pub fn from_csv(bytes: &[u8]) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().from_reader(bytes);
        let parse_err = |e: csv::Error| Error::invalid(format!("CSV parse failed: {e}"));
        let mut header: Vec<String> = r
            .headers()
            .map_err(parse_err)?
            .iter()
            .map(String::from)
            .collect();
        let error_column = header.last().map(|h| h == "error").unwrap_or(false);
        if error_column {
            header.pop();
        }
        let mut table = SweepTable {
            header,
            rows: Vec::new(),
            error_column,
        };
        for rec in r.records() {
            let rec = rec.map_err(parse_err)?;
            let mut fields: Vec<&str> = rec.iter().collect();
            let error = if error_column {
                let e = fields.pop().unwrap_or("");
                (!e.is_empty()).then(|| e.to_string())
            } else {
                None
            };
            let values = fields
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|e| Error::invalid(format!("bad number '{f}': {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            table.push(Row { values, error })?;
        }
        Ok(table)
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// Writes `table` to `path` atomically.
pub fn emit(table: &SweepTable, format: OutputFormat, path: &Path) -> Result<()> {
    write_atomic(path, &table.encode(format)?)
}

/// Writes `bytes` to a temporary sibling of `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io_err = |source: std::io::Error| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.flush().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_is_header_only() {
        let t = SweepTable::new(["tau", "v"]);
        assert_eq!(t.to_csv().unwrap(), b"tau,v\n");
        assert_eq!(t.to_json(), "[]\n");
    }

    #[test]
    fn one_row_round_trips() {
        let mut t = SweepTable::new(["a", "b"]).with_error_column();
        t.push(Row::ok(vec![0.1 + 0.2, -1.0 / 3.0])).unwrap();
        t.push(Row {
            values: vec![f64::NAN, 2.0],
            error: Some("quadrature did not converge, \"x\"".into()),
        })
        .unwrap();
        let back = SweepTable::from_csv(&t.to_csv().unwrap()).unwrap();
        assert_eq!(back.header, t.header);
        assert_eq!(back.rows[0], t.rows[0]);
        assert!(back.rows[1].values[0].is_nan());
        assert_eq!(back.rows[1].error, t.rows[1].error);
    }

    #[test]
    fn json_layout() {
        let mut t = SweepTable::new(["x"]).with_error_column();
        t.push(Row::ok(vec![1.5])).unwrap();
        let j = t.to_json();
        assert_eq!(
            j,
            "[\n  {\"x\": 1.5000000000000000e0, \"error\": null}\n]\n"
        );
        let parsed: serde_json::Value = serde_json::from_str(&j).unwrap();
        assert_eq!(parsed[0]["x"].as_f64(), Some(1.5));
    }

    #[test]
    fn rejects_ragged_rows() {
        let mut t = SweepTable::new(["a", "b"]);
        assert!(t.push(Row::ok(vec![1.0])).is_err());
    }

    #[test]
    fn emit_reports_path_on_failure() {
        let t = SweepTable::new(["a"]);
        let err = emit(&t, OutputFormat::Csv, Path::new("/nonexistent-dir/x.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.csv"));
    }
}
