//! Output sinks. Files are written to a temporary sibling and renamed into
//! place, so a failed run never leaves a partial file.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::args::{Format, OutArgs};
use crate::CliError;

pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

/// Write to `path`, or to stdout when absent.
pub fn emit(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_atomic(p, contents),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(contents.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Invalid(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Two-column `key,value` CSV of a JSON value; nested keys are joined with
/// dots and array elements are indexed.
pub fn to_key_value_csv(value: &Value) -> String {
    fn walk(prefix: &str, v: &Value, rows: &mut Vec<(String, String)>) {
        let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
        match v {
            Value::Object(m) => {
                for (k, x) in m {
                    walk(&key(k), x, rows);
                }
            }
            Value::Array(a) => {
                for (i, x) in a.iter().enumerate() {
                    walk(&key(&i.to_string()), x, rows);
                }
            }
            Value::String(s) => rows.push((prefix.to_string(), quote(s))),
            Value::Null => rows.push((prefix.to_string(), String::new())),
            other => rows.push((prefix.to_string(), other.to_string())),
        }
    }
    fn quote(s: &str) -> String {
        if s.contains([',', '"', '\n']) {
            format!("\"{}\"", s.replace('"', "\"\""))
        } else {
            s.to_string()
        }
    }
    let mut rows = Vec::new();
    walk("", value, &mut rows);
    let mut out = String::from("key,value\n");
    for (k, v) in rows {
        out.push_str(&quote(&k));
        out.push(',');
        out.push_str(&v);
        out.push('\n');
    }
    out
}

/// Emit a report in the requested format.
pub fn emit_report<T: Serialize>(out: &OutArgs, value: &T) -> Result<(), CliError> {
    let text = match out.format {
        Format::Json => to_json(value)?,
        Format::Csv => {
            let v = serde_json::to_value(value).map_err(|e| CliError::Invalid(e.to_string()))?;
            to_key_value_csv(&v)
        }
    };
    emit(out.out.as_deref(), &text)
}
