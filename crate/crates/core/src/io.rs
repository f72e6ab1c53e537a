//! Matrix and trace files.
//!
//! A matrix file is CSV. The header row holds the context label followed by
//! the `N` context values. Each of the `N` data rows holds the source context
//! value followed by its `N` transfer entries. Numbers are written with nine
//! significant digits. A JSON sidecar `<file>.meta.json` records the name and
//! the normalization mode.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::context::ContextSpace;
use crate::engine::RunTrace;
use crate::error::{Error, Result};
use crate::matrix::{Normalization, TransferMatrix};

/// Significant digits used for every number written.
pub const SIGNIFICANT_DIGITS: usize = 9;

/// Columns of a trace file, in order.
pub const TRACE_COLUMNS: [&str; 10] = [
    "k",
    "chosen_context",
    "J_obs",
    "V",
    "r_k",
    "R_k",
    "beta_k",
    "gamma_k",
    "bound",
    "largest_segment_frac",
];

/// Round to [`SIGNIFICANT_DIGITS`] and print the shortest form that parses
/// back to the rounded value.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .expect("scientific notation parses");
    format!("{rounded}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixMeta {
    pub name: String,
    pub label: String,
    pub normalized: bool,
    pub normalization: Normalization,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".meta.json");
    PathBuf::from(os)
}

/// Write the CSV and its sidecar.
pub fn write_matrix(matrix: &TransferMatrix, path: &Path, name: &str) -> Result<()> {
    fs::write(path, matrix_to_csv(matrix))?;
    let meta = MatrixMeta {
        name: name.to_string(),
        label: matrix.space().label().to_string(),
        normalized: matrix.is_normalized(),
        normalization: matrix.normalization(),
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

pub fn matrix_to_csv(matrix: &TransferMatrix) -> String {
    let space = matrix.space();
    let mut out = String::new();
    out.push_str(&csv_cell(space.label()));
    for &v in space.values() {
        out.push(',');
        out.push_str(&fmt_num(v));
    }
    out.push('\n');
    for (s, row) in matrix.rows().enumerate() {
        out.push_str(&fmt_num(space.value(s)));
        for &u in row {
            out.push(',');
            out.push_str(&fmt_num(u));
        }
        out.push('\n');
    }
    out
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Read a matrix file. Without a sidecar the matrix counts as already
/// normalized when every entry lies in `[0, 1]`, and as raw otherwise.
pub fn read_matrix(path: &Path) -> Result<(TransferMatrix, Option<MatrixMeta>)> {
    let text = fs::read_to_string(path)?;
    let side = sidecar_path(path);
    let meta: Option<MatrixMeta> = if side.exists() {
        Some(serde_json::from_str(&fs::read_to_string(side)?)?)
    } else {
        None
    };
    let matrix = parse_matrix_csv(&text, meta.as_ref().map(|m| m.normalization))?;
    Ok((matrix, meta))
}

pub fn parse_matrix_csv(text: &str, normalization: Option<Normalization>) -> Result<TransferMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = reader.records();

    let header = records.next().ok_or(Error::Parse {
        line: 1,
        message: "empty file".into(),
    })??;
    let line_of = |r: &csv::StringRecord| r.position().map_or(0, |p| p.line() as usize);
    let header_line = line_of(&header);
    let label = header.get(0).unwrap_or("").to_string();
    let values: Vec<f64> = header
        .iter()
        .skip(1)
        .map(|c| parse_cell(c, header_line))
        .collect::<Result<_>>()?;
    for w in values.windows(2) {
        if w[1] == w[0] {
            return Err(Error::Parse {
                line: header_line,
                message: format!("duplicate context value {}", w[0]),
            });
        }
        if w[1] < w[0] {
            return Err(Error::Parse {
                line: header_line,
                message: format!("context values must increase, found {} after {}", w[1], w[0]),
            });
        }
    }
    let n = values.len();
    if n < 2 {
        return Err(Error::Parse {
            line: header_line,
            message: format!("need at least 2 contexts, found {n}"),
        });
    }

    let mut flat = Vec::with_capacity(n * n);
    let mut rows = 0;
    for record in records {
        let record = record?;
        let line = line_of(&record);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != n + 1 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} cells, found {}", n + 1, record.len()),
            });
        }
        if rows == n {
            return Err(Error::Parse {
                line,
                message: format!("more than {n} data rows"),
            });
        }
        let source = parse_cell(&record[0], line)?;
        if source != values[rows] {
            return Err(Error::Parse {
                line,
                message: format!("row context {source} does not match header value {}", values[rows]),
            });
        }
        for cell in record.iter().skip(1) {
            flat.push(parse_cell(cell, line)?);
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::Parse {
            line: header_line,
            message: format!("expected {n} data rows, found {rows}"),
        });
    }

    let normalization = normalization.unwrap_or_else(|| {
        if flat.iter().all(|u| (0.0..=1.0).contains(u)) {
            Normalization::Native
        } else {
            Normalization::Raw
        }
    });
    let space = ContextSpace::new(values, label)?;
    TransferMatrix::from_flat(space, flat, normalization)
}

fn parse_cell(cell: &str, line: usize) -> Result<f64> {
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            line,
            message: format!("not a finite number: '{cell}'"),
        }),
    }
}

/// Trace CSV with the [`TRACE_COLUMNS`]; `bound` is the full-space bound.
pub fn trace_to_csv(trace: &RunTrace) -> String {
    let mut out = TRACE_COLUMNS.join(",");
    out.push('\n');
    for s in &trace.steps {
        let cells = [
            s.k.to_string(),
            fmt_num(s.chosen_context),
            fmt_num(s.j_obs),
            fmt_num(s.v),
            fmt_num(s.regret.r_k),
            fmt_num(s.regret.cumulative),
            fmt_num(s.regret.beta_k),
            fmt_num(s.regret.gamma_k),
            fmt_num(s.regret.bound_thm1),
            fmt_num(s.regret.largest_segment_frac),
        ];
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

/// Read a `task,score` CSV of externally measured multitask results.
pub fn read_score_vector(path: &Path) -> Result<Vec<(String, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected task,score, found {} cells", record.len()),
            });
        }
        out.push((record[0].to_string(), parse_cell(&record[1], line)?));
    }
    Ok(out)
}
