use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

impl FileDigest {
    fn of(path: &Path, data: &[u8]) -> Self {
        Self {
            path: path.display().to_string(),
            bytes: data.len() as u64,
            sha256: hex_digest(data),
        }
    }
}

pub fn hex_digest(data: &[u8]) -> String {
    Sha256::digest(data).iter().map(|b| format!("{b:02x}")).collect()
}

/// Machine-readable record of one run. Contains no timestamps so that
/// identical runs produce identical manifests.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub parameters: BTreeMap<String, Value>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

/// Reads input files and remembers their digests for the manifest.
#[derive(Debug, Default)]
pub struct Inputs {
    digests: Vec<FileDigest>,
}

impl Inputs {
    pub fn read(&mut self, path: &Path) -> Result<String, CliError> {
        let data = std::fs::read(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
        self.digests.push(FileDigest::of(path, &data));
        String::from_utf8(data).map_err(|_| CliError::input(format!("{}: not valid UTF-8", path.display())))
    }

    /// Records a file that was read through some other route.
    pub fn record(&mut self, path: &Path) -> Result<(), CliError> {
        self.read(path).map(|_| ())
    }
}

/// Files produced by a command, plus where their manifests go.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
    stdout: String,
    /// One manifest per output file unless set.
    shared_manifest: Option<PathBuf>,
}

impl Outputs {
    /// Routes `content` to `path`, or to stdout when no path is given.
    pub fn emit(&mut self, path: Option<&Path>, content: String) {
        match path {
            Some(p) => self.files.push((p.to_owned(), content.into_bytes())),
            None => self.stdout.push_str(&content),
        }
    }

    pub fn file(&mut self, path: PathBuf, content: Vec<u8>) {
        self.files.push((path, content));
    }

    pub fn shared_manifest(&mut self, path: PathBuf) {
        self.shared_manifest = Some(path);
    }

    /// Writes every file, then the manifests. Nothing is written before all
    /// content has been computed.
    pub fn commit(
        self,
        command: &str,
        parameters: BTreeMap<String, Value>,
        inputs: Inputs,
    ) -> Result<String, CliError> {
        if self.files.is_empty() {
            return Ok(self.stdout);
        }
        let manifest = Manifest {
            tool: "occexpo",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_owned(),
            parameters,
            inputs: inputs.digests,
            outputs: self.files.iter().map(|(p, d)| FileDigest::of(p, d)).collect(),
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        for (path, data) in &self.files {
            write_atomic(path, data)?;
            log::info!("wrote {}", path.display());
        }
        match self.shared_manifest {
            Some(p) => write_atomic(&p, text.as_bytes())?,
            None => {
                for (path, _) in &self.files {
                    write_atomic(&manifest_path(path), text.as_bytes())?;
                }
            }
        }
        Ok(self.stdout)
    }
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

/// Writes `data` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, data: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let fail = |e: std::io::Error| CliError::config(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(data).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

/// Rounds every non-integer number to `decimals` places; p-values keep
/// `decimals` significant digits instead so tiny values stay readable.
pub fn round_json(value: Value, decimals: Option<usize>) -> Value {
    let Some(d) = decimals else { return value };
    round_inner(value, d, false)
}

fn round_inner(value: Value, d: usize, significant: bool) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            let r = if significant {
                round_significant(x, d)
            } else {
                round_places(x, d)
            };
            serde_json::Number::from_f64(r)
                .map(Value::Number)
                .unwrap_or(Value::Null)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(|v| round_inner(v, d, significant)).collect()),
        Value::Object(o) => Value::Object(
            o.into_iter()
                .map(|(k, v)| {
                    let sig = k == "p_value";
                    (k, round_inner(v, d, sig))
                })
                .collect(),
        ),
        other => other,
    }
}

fn round_places(x: f64, d: usize) -> f64 {
    let r: f64 = format!("{x:.d$}").parse().expect("formatted float parses");
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn round_significant(x: f64, d: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", d.saturating_sub(1), x)
        .parse()
        .expect("formatted float parses")
}

pub fn to_json_text<T: Serialize>(value: &T, decimals: Option<usize>) -> String {
    let v = serde_json::to_value(value).expect("report serializes");
    let mut s = serde_json::to_string_pretty(&round_json(v, decimals)).expect("json serializes");
    s.push('\n');
    s
}
