use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::CliError;
use crate::sim::SimTrace;

pub const SCHEMA_VERSION: u32 = 1;

pub const TRACE_HEADER: &str =
    "t,d,backlog,gamma,c,budget_exact,budget_conservative,queue,clamped_low,clamped_high";

/// `out.csv` → `out.<suffix>`.
pub fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    out.with_extension(suffix)
}

/// Writes to a temporary file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(path, e))?;
    tmp.write_all(contents).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output types serialise");
    s.push('\n');
    s
}

fn flag(b: bool) -> u8 {
    u8::from(b)
}

pub fn trace_csv(trace: &SimTrace) -> String {
    let mut s = String::with_capacity(64 * (trace.records.len() + 1));
    s.push_str(TRACE_HEADER);
    s.push('\n');
    for r in &trace.records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.demand,
            r.backlog,
            r.gamma,
            r.consumption,
            r.budget_exact,
            r.budget_conservative,
            r.queue,
            flag(r.clamped_low),
            flag(r.clamped_high)
        );
    }
    s
}

/// Renders `rows` as CSV through serde, one header row, LF line endings.
pub fn table_csv<T: Serialize>(rows: &[T]) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for row in rows {
        w.serialize(row)
            .map_err(|e| CliError::Usage(format!("csv encoding: {e}")))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Usage(format!("csv encoding: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Reads the `c` column of a trace CSV.
pub fn read_consumption(path: &Path) -> Result<Vec<f64>, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::MalformedTrace(format!("{}: {other:?}", path.display())),
    })?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::MalformedTrace(format!("{}: header: {e}", path.display())))?
        .clone();
    let col = headers.iter().position(|h| h.trim() == "c").ok_or_else(|| {
        CliError::MalformedTrace(format!("{}: no `c` column in header", path.display()))
    })?;

    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        // header is line 1
        let line = i + 2;
        let record = record.map_err(|e| {
            CliError::MalformedTrace(format!("{}: row {line}: {e}", path.display()))
        })?;
        let field = record.get(col).ok_or_else(|| {
            CliError::MalformedTrace(format!(
                "{}: row {line}, column {}: missing field",
                path.display(),
                col + 1
            ))
        })?;
        let value: f64 = field.trim().parse().map_err(|_| {
            CliError::MalformedTrace(format!(
                "{}: row {line}, column {} (c): {field:?} is not a number",
                path.display(),
                col + 1
            ))
        })?;
        if !(value.is_finite() && value >= 0.0) {
            return Err(CliError::MalformedTrace(format!(
                "{}: row {line}, column {} (c): consumption must be finite and nonnegative",
                path.display(),
                col + 1
            )));
        }
        values.push(value);
    }
    if values.is_empty() {
        return Err(CliError::MalformedTrace(format!(
            "{}: trace has no rows",
            path.display()
        )));
    }
    Ok(values)
}
