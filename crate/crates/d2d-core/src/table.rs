//! CSV ingestion into an untyped row/column table.
//!
//! Cells keep their original text; null markers are flagged, never erased,
//! so later stages can re-serialize the table byte-for-byte.

use serde::{Deserialize, Serialize};
use std::io::Read;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io error reading table: {0}")]
    Io(String),
    #[error("data row {row} has {got} fields, expected {expected}")]
    MalformedRow { row: usize, got: usize, expected: usize },
    #[error("table has a header row but no data rows")]
    EmptyTable,
}

impl From<std::io::Error> for IngestError {
    fn from(e: std::io::Error) -> Self {
        IngestError::Io(e.to_string())
    }
}

/// One cell: original text plus whether it matched a null marker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawCell {
    pub text: String,
    pub is_null: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<RawCell>>,
}

impl RawTable {
    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn column_count(&self) -> usize {
        self.headers.len()
    }

    /// Cells of one column, in row order.
    pub fn column(&self, idx: usize) -> Vec<&RawCell> {
        self.rows.iter().map(|r| &r[idx]).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    /// Matched case-insensitively against trimmed cell text.
    pub null_markers: Vec<String>,
    pub delimiter: u8,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            null_markers: ["", "NA", "N/A", "null"].iter().map(|s| s.to_string()).collect(),
            delimiter: b',',
        }
    }
}

impl IngestOptions {
    fn is_null(&self, text: &str) -> bool {
        let t = text.trim();
        self.null_markers.iter().any(|m| m.eq_ignore_ascii_case(t))
    }
}

/// Duplicate headers get a numeric suffix: "col", "col_2", "col_3", ...
fn disambiguate_headers(raw: Vec<String>) -> Vec<String> {
    let mut seen: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    let mut out = Vec::with_capacity(raw.len());
    for h in raw {
        let n = seen.entry(h.clone()).or_insert(0);
        *n += 1;
        if *n == 1 {
            out.push(h);
        } else {
            out.push(format!("{}_{}", h, n));
        }
    }
    out
}

pub fn load_table(path: &Path, options: &IngestOptions) -> Result<RawTable, IngestError> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    load_table_from_bytes(&buf, options)
}

pub fn load_table_from_bytes(bytes: &[u8], options: &IngestOptions) -> Result<RawTable, IngestError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| IngestError::Io(format!("input is not valid UTF-8: {e}")))?;

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .delimiter(options.delimiter)
        .flexible(true)
        .from_reader(text.as_bytes());

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| IngestError::Io(e.to_string()))?
        .iter()
        .map(|h| h.to_string())
        .collect();
    if headers.is_empty() {
        return Err(IngestError::EmptyTable);
    }
    let headers = disambiguate_headers(headers);
    let expected = headers.len();

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| IngestError::Io(e.to_string()))?;
        if record.len() != expected {
            return Err(IngestError::MalformedRow { row: i, got: record.len(), expected });
        }
        let row: Vec<RawCell> = record
            .iter()
            .map(|cell| RawCell { text: cell.to_string(), is_null: options.is_null(cell) })
            .collect();
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(IngestError::EmptyTable);
    }
    Ok(RawTable { headers, rows })
}

/// RFC-4180 serialization of the original cell text; `load ∘ serialize` is the
/// identity on any loaded table.
pub fn to_csv_string(table: &RawTable) -> String {
    let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
    writer.write_record(&table.headers).expect("in-memory write");
    for row in &table.rows {
        writer
            .write_record(row.iter().map(|c| c.text.as_str()))
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}
