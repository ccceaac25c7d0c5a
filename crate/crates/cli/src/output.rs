//! Atomic CSV and JSON writers.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, CliResult};

/// 17 significant digits, locale-free; `NaN` for missing values.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    fmt_float(v.unwrap_or(f64::NAN))
}

fn temp_beside(path: &Path) -> CliResult<tempfile::NamedTempFile> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(path, e))
}

fn persist(tmp: tempfile::NamedTempFile, path: &Path) -> CliResult<()> {
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// Writes to a temporary file in the target directory, then renames.
pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> CliResult<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let tmp = temp_beside(path)?;
    let mut w = csv::Writer::from_writer(tmp.as_file());
    let wrap = |e: csv::Error| CliError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e.to_string()),
    };
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    drop(w);
    persist(tmp, path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let tmp = temp_beside(path)?;
    {
        let mut f = tmp.as_file();
        serde_json::to_writer_pretty(&mut f, value)
            .map_err(|e| CliError::io(path, std::io::Error::other(e.to_string())))?;
        f.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    }
    persist(tmp, path)
}
