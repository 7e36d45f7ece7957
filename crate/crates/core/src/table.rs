//! Delimiter-separated table reading shared by every file format in the crate.
//!
//! All tables are UTF-8, comma-delimited, with a header row. Lines starting
//! with `#` are comments. Line numbers reported in errors are 1-based and
//! count comment lines, so they point at the physical line in the file.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("missing header column `{0}`")]
    MissingColumn(String),
    #[error("empty table: no header row")]
    NoHeader,
}

/// One data row together with the physical line it came from.
#[derive(Debug, Clone)]
pub struct Row {
    pub line: u64,
    pub fields: Vec<String>,
}

impl Row {
    pub fn get(&self, idx: usize) -> &str {
        self.fields.get(idx).map(String::as_str).unwrap_or("")
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Row>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Self, TableError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        // csv's own line counter skips blank lines; derive lines from byte offsets
        let newlines: Vec<usize> = text
            .bytes()
            .enumerate()
            .filter(|(_, b)| *b == b'\n')
            .map(|(i, _)| i)
            .collect();
        let line_of = |pos: Option<&csv::Position>| -> u64 {
            pos.map(|p| {
                // a record's position can point at blank lines preceding it
                let mut at = p.byte() as usize;
                while matches!(text.as_bytes().get(at), Some(b'\n' | b'\r')) {
                    at += 1;
                }
                newlines.partition_point(|&nl| nl < at) as u64 + 1
            })
            .unwrap_or(0)
        };
        let mut header = None;
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| TableError::Parse {
                line: line_of(e.position()),
                message: e.to_string(),
            })?;
            let line = line_of(rec.position());
            let fields: Vec<String> = rec.iter().map(str::to_owned).collect();
            if fields.iter().all(String::is_empty) {
                continue;
            }
            if header.is_none() {
                header = Some(fields);
            } else {
                rows.push(Row { line, fields });
            }
        }
        let header = header.ok_or(TableError::NoHeader)?;
        Ok(Self { header, rows })
    }

    pub fn read(path: &Path) -> Result<Self, TableError> {
        let text = std::fs::read_to_string(path).map_err(|source| TableError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn column(&self, name: &str) -> Result<usize, TableError> {
        self.header
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| TableError::MissingColumn(name.to_owned()))
    }
}

pub(crate) fn parse_f64(row: &Row, idx: usize, what: &str) -> Result<f64, TableError> {
    let raw = row.get(idx);
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| TableError::Parse {
            line: row.line,
            message: format!("{what}: `{raw}` is not a finite number"),
        })
}

/// Fixed-point rendering used by every numeric export. `None` keeps full
/// round-trip precision.
pub fn format_value(value: f64, decimals: Option<usize>) -> String {
    match decimals {
        Some(d) => {
            let s = format!("{value:.d$}");
            // avoid "-0.0000"
            if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
                s[1..].to_owned()
            } else {
                s
            }
        }
        None => format!("{value:?}"),
    }
}

/// Writes rows as CSV text with `\n` line endings.
pub fn write_csv<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut out = Vec::new();
    {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(&mut out);
        w.write_record(header).expect("write to memory");
        for r in rows {
            let r: Vec<String> = r.into_iter().collect();
            w.write_record(&r).expect("write to memory");
        }
        w.flush().expect("write to memory");
    }
    String::from_utf8(out).expect("csv output is utf-8")
}

/// Renders a labelled matrix (first column = row key) as CSV.
pub fn write_matrix(key: &str, columns: &[String], rows: &[(String, Vec<f64>)], decimals: Option<usize>) -> String {
    let mut header: Vec<&str> = vec![key];
    header.extend(columns.iter().map(String::as_str));
    write_csv(
        &header,
        rows.iter().map(|(label, vals)| {
            std::iter::once(label.clone())
                .chain(vals.iter().map(|v| format_value(*v, decimals)))
                .collect::<Vec<_>>()
        }),
    )
}
