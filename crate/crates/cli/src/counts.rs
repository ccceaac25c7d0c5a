//! Per-repetition photon-count files.
//!
//! Header `rep,window,n1[,n_total][,epsilon][,d_a]`: the optional columns
//! keep that order, and a file either labels every row with `(epsilon, d_a)`
//! or none. `window` is a free-form label for the integration window.

use std::path::Path;

use spade_core::simulate::{Provenance, TrialBatch};

use crate::error::{CliError, CliResult};
use crate::output::{fmt_float, write_csv};

#[derive(Debug, Clone, PartialEq)]
pub struct CountsRecord {
    pub rep: u64,
    pub window: String,
    pub n1: u64,
    pub n_total: Option<u64>,
    pub label: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountsFile {
    pub records: Vec<CountsRecord>,
    pub has_total: bool,
    pub has_labels: bool,
}

/// Rows sharing a `(epsilon, d_a)` label, in order of first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelGroup {
    pub label: Option<(f64, f64)>,
    pub rows: Vec<usize>,
}

impl CountsFile {
    pub fn n1(&self) -> Vec<u64> {
        self.records.iter().map(|r| r.n1).collect()
    }

    pub fn groups(&self) -> Vec<LabelGroup> {
        let mut groups: Vec<LabelGroup> = Vec::new();
        let key = |l: Option<(f64, f64)>| l.map(|(e, d)| (e.to_bits(), d.to_bits()));
        for (i, r) in self.records.iter().enumerate() {
            match groups.iter_mut().find(|g| key(g.label) == key(r.label)) {
                Some(g) => g.rows.push(i),
                None => groups.push(LabelGroup {
                    label: r.label,
                    rows: vec![i],
                }),
            }
        }
        groups
    }

    pub fn to_batch(&self, source: &Path) -> CliResult<TrialBatch> {
        let totals = self
            .has_total
            .then(|| self.records.iter().map(|r| r.n_total.unwrap_or(0)).collect());
        Ok(TrialBatch::new(
            self.n1(),
            totals,
            Provenance::Ingested {
                source: source.display().to_string(),
            },
        )?)
    }
}

fn parse_err(path: &Path, row: u64, msg: impl Into<String>) -> CliError {
    CliError::Parse {
        path: path.display().to_string(),
        row,
        msg: msg.into(),
    }
}

pub fn read_counts(path: &Path) -> CliResult<CountsFile> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(path, io),
            other => parse_err(path, 1, format!("{other:?}")),
        })?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let (has_total, has_labels) = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["rep", "window", "n1"] => (false, false),
        ["rep", "window", "n1", "n_total"] => (true, false),
        ["rep", "window", "n1", "epsilon", "d_a"] => (false, true),
        ["rep", "window", "n1", "n_total", "epsilon", "d_a"] => (true, true),
        _ => {
            return Err(parse_err(
                path,
                1,
                format!("header must be rep,window,n1[,n_total][,epsilon][,d_a], got {}", header.join(",")),
            ))
        }
    };
    let mut records = Vec::new();
    for result in reader.records() {
        let rec = result.map_err(|e| {
            let row = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(path, row, e.to_string())
        })?;
        let row = rec.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize, name: &str| -> CliResult<&str> {
            rec.get(i)
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .ok_or_else(|| parse_err(path, row, format!("missing {name}")))
        };
        let int = |i: usize, name: &str| -> CliResult<u64> {
            let s = field(i, name)?;
            s.parse()
                .map_err(|_| parse_err(path, row, format!("{name} = {s:?} is not a nonnegative integer")))
        };
        let float = |i: usize, name: &str| -> CliResult<f64> {
            let s = field(i, name)?;
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(path, row, format!("{name} = {s:?} is not a finite number")))
        };
        let n1 = int(2, "n1")?;
        let n_total = if has_total { Some(int(3, "n_total")?) } else { None };
        if let Some(t) = n_total {
            if n1 > t {
                return Err(parse_err(path, row, format!("n1 = {n1} exceeds n_total = {t}")));
            }
        }
        let offset = if has_total { 4 } else { 3 };
        let label = if has_labels {
            Some((float(offset, "epsilon")?, float(offset + 1, "d_a")?))
        } else {
            None
        };
        records.push(CountsRecord {
            rep: int(0, "rep")?,
            window: field(1, "window")?.to_string(),
            n1,
            n_total,
            label,
        });
    }
    Ok(CountsFile {
        records,
        has_total,
        has_labels,
    })
}

pub fn write_counts(path: &Path, file: &CountsFile) -> CliResult<()> {
    let mut header = vec!["rep", "window", "n1"];
    if file.has_total {
        header.push("n_total");
    }
    if file.has_labels {
        header.extend(["epsilon", "d_a"]);
    }
    let rows = file.records.iter().map(|r| {
        let mut row = vec![r.rep.to_string(), r.window.clone(), r.n1.to_string()];
        if file.has_total {
            row.push(r.n_total.map(|t| t.to_string()).unwrap_or_default());
        }
        if let (true, Some((e, d))) = (file.has_labels, r.label) {
            row.push(fmt_float(e));
            row.push(fmt_float(d));
        }
        row
    });
    write_csv(path, &header, rows)
}
