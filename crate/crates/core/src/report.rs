//! Tabular reports with CSV and JSON emitters.
//!
//! A report is an ordered list of rows, each a label plus ordered named
//! numeric fields. A field is either a finite number or `None` for "not
//! applicable"; JSON writes `null` and CSV writes `NA` for the latter.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde_json::{Map, Value};

use crate::error::{Result, TlsError};
use crate::io::fmt_f64;

const NOT_APPLICABLE: &str = "NA";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = TlsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(TlsError::InvalidArgument(format!("unknown report format '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReportRow {
    pub label: String,
    pub fields: Vec<(String, Option<f64>)>,
}

impl ReportRow {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            fields: Vec::new(),
        }
    }

    pub fn with(mut self, name: &str, value: Option<f64>) -> Self {
        self.push(name, value);
        self
    }

    pub fn push(&mut self, name: &str, value: Option<f64>) {
        self.fields.push((name.to_string(), value));
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.fields
            .iter()
            .find(|(k, _)| k == name)
            .and_then(|(_, v)| *v)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReportDocument {
    pub metadata: Map<String, Value>,
    pub rows: Vec<ReportRow>,
}

impl ReportDocument {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_meta(&mut self, key: &str, value: impl Into<Value>) {
        self.metadata.insert(key.to_string(), value.into());
    }

    fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(TlsError::InvalidArgument("report has no rows".into()));
        }
        let columns: Vec<&str> = self.rows[0].fields.iter().map(|(k, _)| k.as_str()).collect();
        for row in &self.rows {
            let names: Vec<&str> = row.fields.iter().map(|(k, _)| k.as_str()).collect();
            if names != columns {
                return Err(TlsError::InvalidArgument(format!(
                    "row '{}' has a different column set",
                    row.label
                )));
            }
            if let Some((k, _)) = row
                .fields
                .iter()
                .find(|(_, v)| v.is_some_and(|v| !v.is_finite()))
            {
                return Err(TlsError::InvalidArgument(format!(
                    "row '{}' field '{k}' is not finite",
                    row.label
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        self.validate()?;
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = Map::new();
                obj.insert("label".into(), Value::String(row.label.clone()));
                for (k, v) in &row.fields {
                    obj.insert(k.clone(), v.map_or(Value::Null, Value::from));
                }
                Value::Object(obj)
            })
            .collect();
        let mut doc = Map::new();
        doc.insert("metadata".into(), Value::Object(self.metadata.clone()));
        doc.insert("rows".into(), Value::Array(rows));
        serde_json::to_string_pretty(&Value::Object(doc))
            .map_err(|e| TlsError::InvalidArgument(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text).map_err(|e| TlsError::Parse(e.to_string()))?;
        let metadata = doc
            .get("metadata")
            .and_then(Value::as_object)
            .cloned()
            .unwrap_or_default();
        let rows = doc
            .get("rows")
            .and_then(Value::as_array)
            .ok_or_else(|| TlsError::Parse("missing 'rows' array".into()))?;
        let mut out = Vec::with_capacity(rows.len());
        for row in rows {
            let obj = row
                .as_object()
                .ok_or_else(|| TlsError::Parse("row is not an object".into()))?;
            let mut r = ReportRow::new(obj.get("label").and_then(Value::as_str).unwrap_or_default());
            for (k, v) in obj.iter().filter(|(k, _)| k.as_str() != "label") {
                let value = match v {
                    Value::Null => None,
                    Value::Number(n) => n.as_f64(),
                    _ => return Err(TlsError::Parse(format!("field '{k}' is not numeric"))),
                };
                r.push(k, value);
            }
            out.push(r);
        }
        Ok(Self { metadata, rows: out })
    }

    /// Metadata goes into leading `# key=value` comment lines (JSON-encoded
    /// values), followed by the header and one line per row.
    pub fn to_csv(&self) -> Result<String> {
        self.validate()?;
        let mut out = String::new();
        for (k, v) in &self.metadata {
            out.push_str(&format!("# {k}={v}\n"));
        }
        let mut writer = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["label".to_string()];
        header.extend(self.rows[0].fields.iter().map(|(k, _)| k.clone()));
        writer
            .write_record(&header)
            .map_err(|e| TlsError::InvalidArgument(e.to_string()))?;
        for row in &self.rows {
            let mut rec = vec![row.label.clone()];
            rec.extend(
                row.fields
                    .iter()
                    .map(|(_, v)| v.map_or_else(|| NOT_APPLICABLE.to_string(), fmt_f64)),
            );
            writer
                .write_record(&rec)
                .map_err(|e| TlsError::InvalidArgument(e.to_string()))?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| TlsError::InvalidArgument(e.to_string()))?;
        out.push_str(&String::from_utf8_lossy(&bytes));
        Ok(out)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut metadata = Map::new();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            if let Some((k, v)) = line.trim_start_matches('#').trim().split_once('=') {
                let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
                metadata.insert(k.to_string(), value);
            }
        }
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| TlsError::Parse(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if header.first().map(String::as_str) != Some("label") {
            return Err(TlsError::Parse("first CSV column must be 'label'".into()));
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| TlsError::Parse(e.to_string()))?;
            let mut row = ReportRow::new(&record[0]);
            for (name, field) in header.iter().zip(record.iter()).skip(1) {
                let value = if field == NOT_APPLICABLE || field.is_empty() {
                    None
                } else {
                    Some(
                        field
                            .parse::<f64>()
                            .map_err(|_| TlsError::Parse(format!("bad number '{field}'")))?,
                    )
                };
                row.push(name, value);
            }
            rows.push(row);
        }
        Ok(Self { metadata, rows })
    }
}

pub fn save_report(report: &ReportDocument, path: &Path, format: ReportFormat) -> Result<()> {
    let text = match format {
        ReportFormat::Csv => report.to_csv()?,
        ReportFormat::Json => report.to_json()?,
    };
    fs::write(path, text)?;
    Ok(())
}

pub fn load_report(path: &Path, format: ReportFormat) -> Result<ReportDocument> {
    let text = fs::read_to_string(path)?;
    match format {
        ReportFormat::Csv => ReportDocument::from_csv(&text),
        ReportFormat::Json => ReportDocument::from_json(&text),
    }
}
