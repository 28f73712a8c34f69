//! Result tables and their CSV serialization.
//!
//! Every run produces one table: a header row, provenance comment lines
//! prefixed with `#` (config hash, tool version, optional timestamp), then
//! the data rows.  Numbers print with 17 significant digits so the text
//! round-trips to the exact binary value; lines end with a bare LF.

use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Real(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Debug, Clone)]
pub struct ResultTable {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

impl ResultTable {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row arity does not match the header"
        );
        self.rows.push(row);
    }

    /// Serializes header, provenance comments, and data rows.
    pub fn to_csv(&self, provenance: &Provenance) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        out.push_str(&format!("# config_hash={}\n", provenance.config_hash));
        out.push_str(&format!("# tool_version={}\n", provenance.tool_version));
        if let Some(ts) = provenance.timestamp {
            out.push_str(&format!("# timestamp={ts}\n"));
        }
        for row in &self.rows {
            let fields: Vec<String> = row.iter().map(format_cell).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}

/// Comment-line metadata identifying a run.
#[derive(Debug, Clone)]
pub struct Provenance {
    /// SHA-256 hex digest of the effective config JSON (after command-line
    /// overrides).
    pub config_hash: String,
    pub tool_version: String,
    /// Seconds since the Unix epoch; `None` suppresses the line so byte
    /// comparisons across runs make sense.
    pub timestamp: Option<u64>,
}

impl Provenance {
    pub fn new(effective_config_json: &str, timestamp: Option<u64>) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(effective_config_json.as_bytes());
        let config_hash = hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect::<String>();
        Self {
            config_hash,
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            timestamp,
        }
    }
}

/// 17 significant digits: enough for the decimal text to parse back to the
/// identical `f64`.
pub fn format_real(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_owned()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".to_owned() } else { "-inf".to_owned() }
    } else {
        format!("{v:.16e}")
    }
}

fn format_cell(cell: &Cell) -> String {
    match cell {
        Cell::Real(v) => format_real(*v),
        Cell::Text(s) => {
            if s.contains(',') || s.contains('"') || s.contains('\n') {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.clone()
            }
        }
    }
}
