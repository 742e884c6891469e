//! Files and envelopes: the canonical CSV schemas, and the JSON envelope
//! printed for every run.

use crate::error::{CliError, CliResult};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use tlsres::ComplexTrace;

pub const TRACE_SCHEMA: &str = "tlsres.trace/v1";
pub const POWER_SERIES_SCHEMA: &str = "tlsres.power_series/v1";
pub const MC_SCHEMA: &str = "tlsres.mc_curves/v1";

pub const TRACE_HEADER: &str = "freq_hz,re,im";
pub const POWER_SERIES_HEADER: &str = "p_opt_w,inv_q,dfrac_freq";

/// Where a command writes its files.
pub struct Context {
    pub out_dir: PathBuf,
}

impl Context {
    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

/// What a command hands back: the result payload and the files it wrote.
pub struct Output {
    pub result: Value,
    pub files: Vec<PathBuf>,
}

/// Shortest round-trip text for a number; exponent form outside
/// [1e-4, 1e7).
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 {
        "0".into()
    } else if (1e-4..1e7).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Builds a CSV body: `# key = value` metadata lines, a header, then rows.
pub struct CsvText(String);

impl CsvText {
    pub fn new(schema: &str, metadata: &[(&str, String)], header: &str) -> Self {
        let mut s = format!("# schema = {schema}\n");
        for (k, v) in metadata {
            let _ = writeln!(s, "# {k} = {v}");
        }
        s.push_str(header);
        s.push('\n');
        Self(s)
    }

    pub fn row(&mut self, fields: &[String]) {
        self.0.push_str(&fields.join(","));
        self.0.push('\n');
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, &self.0).map_err(|e| CliError::io(path, e))
    }
}

#[derive(Deserialize)]
struct TraceRow {
    freq_hz: f64,
    re: f64,
    im: f64,
}

/// Reads a trace CSV (`freq_hz,re,im`, `#` comments).
pub fn read_trace(path: &Path) -> CliResult<ComplexTrace> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != TRACE_HEADER.split(',').collect::<Vec<_>>() {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: header.position().map_or(1, |p| p.line()),
            reason: format!("expected header `{TRACE_HEADER}`"),
        });
    }
    let (mut f, mut z) = (Vec::new(), Vec::new());
    for row in rdr.deserialize::<TraceRow>() {
        let row = row.map_err(|e| csv_error(path, e))?;
        f.push(row.freq_hz);
        z.push(Complex64::new(row.re, row.im));
    }
    Ok(ComplexTrace::new(f, z)?)
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    if let csv::ErrorKind::Io(_) = e.kind() {
        let csv::ErrorKind::Io(io) = e.into_kind() else {
            unreachable!()
        };
        return CliError::io(path, io);
    }
    CliError::Parse {
        path: path.to_path_buf(),
        line: e.position().map_or(0, |p| p.line()),
        reason: e.to_string(),
    }
}

pub fn trace_csv(trace: &ComplexTrace, metadata: &[(&str, String)]) -> CsvText {
    let mut out = CsvText::new(TRACE_SCHEMA, metadata, TRACE_HEADER);
    for (f, z) in trace.frequencies.iter().zip(&trace.values) {
        out.row(&[num(*f), num(z.re), num(z.im)]);
    }
    out
}

#[derive(Serialize)]
pub struct Envelope<'a, C: Serialize> {
    pub command: &'a str,
    pub schema: String,
    pub config: &'a C,
    pub result: Value,
    pub outputs: Vec<String>,
    pub duration_s: f64,
}

pub fn schema_tag(command: &str) -> String {
    format!("tlsres.{command}/v1")
}

/// `key = value` lines for `--format text`, nested keys joined by dots.
pub fn flatten(value: &Value) -> String {
    fn walk(prefix: &str, v: &Value, out: &mut String) {
        match v {
            Value::Object(map) => {
                for (k, x) in map {
                    let key = if prefix.is_empty() {
                        k.clone()
                    } else {
                        format!("{prefix}.{k}")
                    };
                    walk(&key, x, out);
                }
            }
            Value::Array(items) if items.iter().any(|x| x.is_object()) => {
                for (i, x) in items.iter().enumerate() {
                    walk(&format!("{prefix}[{i}]"), x, out);
                }
            }
            _ => {
                let _ = writeln!(out, "{prefix} = {v}");
            }
        }
    }
    let mut out = String::new();
    walk("", value, &mut out);
    out
}
