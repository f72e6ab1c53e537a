//! Summary tables: one row per task, one column per strategy, final `V` as
//! `mean(std)` across seeds, and an average row.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::engine::{aggregate, Aggregate, RunTrace, Stat};
use crate::error::{Error, Result};
use crate::io::fmt_num;

pub const RANDOM: &str = "Random";
pub const EXHAUSTIVE: &str = "Exhaustive";
pub const MULTITASK: &str = "Multitask";
pub const ORACLE: &str = "Oracle Transfer";

/// Fixed column order; columns with no data in any row are dropped.
pub const COLUMN_ORDER: [&str; 7] = [
    RANDOM, EXHAUSTIVE, MULTITASK, "MBTL-GS", "MBTL-ES", "MBTL-GP", ORACLE,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub task: String,
    pub context_variation: String,
    pub cells: BTreeMap<String, Stat>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
}

/// Everything measured on one task.
#[derive(Debug, Clone)]
pub struct TaskResult {
    pub task: String,
    pub context_variation: String,
    pub oracle_value: f64,
    pub exhaustive_value: f64,
    pub multitask: Option<f64>,
    /// Per strategy display name, every seed's trace.
    pub runs: Vec<(String, Vec<RunTrace>)>,
}

impl TaskResult {
    pub fn aggregates(&self) -> Result<Vec<(String, Aggregate)>> {
        self.runs
            .iter()
            .map(|(name, traces)| Ok((name.clone(), aggregate(traces)?)))
            .collect()
    }

    pub fn summary_row(&self) -> Result<SummaryRow> {
        let mut cells = BTreeMap::new();
        let exact = |v: f64| Stat { mean: v, std: 0.0, n: 1 };
        cells.insert(EXHAUSTIVE.to_string(), exact(self.exhaustive_value));
        cells.insert(ORACLE.to_string(), exact(self.oracle_value));
        if let Some(m) = self.multitask {
            cells.insert(MULTITASK.to_string(), exact(m));
        }
        for (name, traces) in &self.runs {
            let finals: Vec<f64> = traces.iter().filter_map(RunTrace::final_v).collect();
            if finals.is_empty() {
                return Err(Error::State(format!("no completed steps for {name}")));
            }
            cells.insert(name.clone(), Stat::of(&finals));
        }
        Ok(SummaryRow {
            task: self.task.clone(),
            context_variation: self.context_variation.clone(),
            cells,
        })
    }
}

impl SummaryTable {
    pub fn from_results(results: &[TaskResult]) -> Result<Self> {
        Ok(Self {
            rows: results.iter().map(TaskResult::summary_row).collect::<Result<_>>()?,
        })
    }

    /// Columns present in at least one row: the fixed order first, then any
    /// other names alphabetically.
    pub fn columns(&self) -> Vec<String> {
        let present: std::collections::BTreeSet<&String> =
            self.rows.iter().flat_map(|r| r.cells.keys()).collect();
        let mut cols: Vec<String> = COLUMN_ORDER
            .iter()
            .filter(|c| present.iter().any(|p| p == c))
            .map(|c| c.to_string())
            .collect();
        for p in present {
            if !COLUMN_ORDER.contains(&p.as_str()) {
                cols.push(p.clone());
            }
        }
        cols
    }

    /// Mean over rows of each column's mean, over the rows that have it.
    pub fn average(&self) -> BTreeMap<String, f64> {
        self.columns()
            .into_iter()
            .filter_map(|c| {
                let means: Vec<f64> = self
                    .rows
                    .iter()
                    .filter_map(|r| r.cells.get(&c).map(|s| s.mean))
                    .collect();
                (!means.is_empty()).then(|| (c, means.iter().sum::<f64>() / means.len() as f64))
            })
            .collect()
    }

    /// Concatenate tables (later rows replace earlier ones with the same task
    /// name).
    pub fn merge(tables: &[SummaryTable]) -> Self {
        let mut rows: Vec<SummaryRow> = Vec::new();
        for row in tables.iter().flat_map(|t| &t.rows) {
            match rows.iter_mut().find(|r| r.task == row.task) {
                Some(existing) => *existing = row.clone(),
                None => rows.push(row.clone()),
            }
        }
        Self { rows }
    }

    /// Fill the multitask column from `(task, score)` pairs. Unknown task
    /// names are returned.
    pub fn attach_multitask(&mut self, scores: &[(String, f64)]) -> Vec<String> {
        let mut unmatched = Vec::new();
        for (task, score) in scores {
            match self.rows.iter_mut().find(|r| &r.task == task) {
                Some(r) => {
                    r.cells.insert(
                        MULTITASK.to_string(),
                        Stat {
                            mean: *score,
                            std: 0.0,
                            n: 1,
                        },
                    );
                }
                None => unmatched.push(task.clone()),
            }
        }
        unmatched
    }

    pub fn to_csv(&self) -> String {
        let cols = self.columns();
        let mut out = String::from("Task,Context Variation");
        for c in &cols {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{},{}", csv_escape(&r.task), csv_escape(&r.context_variation));
            for c in &cols {
                out.push(',');
                if let Some(s) = r.cells.get(c) {
                    let _ = write!(out, "{}({})", fmt_num(s.mean), fmt_num(s.std));
                }
            }
            out.push('\n');
        }
        let avg = self.average();
        out.push_str("Average,");
        for c in &cols {
            out.push(',');
            if let Some(v) = avg.get(c) {
                out.push_str(&fmt_num(*v));
            }
        }
        out.push('\n');
        out
    }

    /// Parse a table written by [`SummaryTable::to_csv`]; the average row is
    /// recomputed, not read.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        if headers.len() < 2 || &headers[0] != "Task" || &headers[1] != "Context Variation" {
            return Err(Error::Parse {
                line: 1,
                message: "expected 'Task,Context Variation,...' header".into(),
            });
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            if &record[0] == "Average" {
                continue;
            }
            let mut cells = BTreeMap::new();
            for (h, cell) in headers.iter().zip(record.iter()).skip(2) {
                if cell.is_empty() {
                    continue;
                }
                cells.insert(h.to_string(), parse_stat(cell, line)?);
            }
            rows.push(SummaryRow {
                task: record[0].to_string(),
                context_variation: record.get(1).unwrap_or("").to_string(),
                cells,
            });
        }
        Ok(Self { rows })
    }

    /// Fixed-width rendering for terminals, four decimals.
    pub fn render(&self) -> String {
        let cols = self.columns();
        let mut grid: Vec<Vec<String>> = Vec::new();
        let mut head = vec!["Task".to_string(), "Context Variation".to_string()];
        head.extend(cols.iter().cloned());
        grid.push(head);
        for r in &self.rows {
            let mut line = vec![r.task.clone(), r.context_variation.clone()];
            for c in &cols {
                line.push(match r.cells.get(c) {
                    Some(s) if s.n > 1 => format!("{:.4} ({:.4})", s.mean, s.std),
                    Some(s) => format!("{:.4}", s.mean),
                    None => "-".into(),
                });
            }
            grid.push(line);
        }
        let avg = self.average();
        let mut line = vec!["Average".to_string(), String::new()];
        for c in &cols {
            line.push(avg.get(c).map_or("-".into(), |v| format!("{v:.4}")));
        }
        grid.push(line);

        let widths: Vec<usize> = (0..grid[0].len())
            .map(|j| grid.iter().map(|r| r[j].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, r) in grid.iter().enumerate() {
            let cells: Vec<String> = r
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(j, (c, w))| if j < 2 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
            if i == 0 || i == grid.len() - 2 {
                out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
                out.push('\n');
            }
        }
        out
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn parse_stat(cell: &str, line: usize) -> Result<Stat> {
    let bad = || Error::Parse {
        line,
        message: format!("expected mean(std) or a number, found '{cell}'"),
    };
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    match cell.split_once('(') {
        Some((m, rest)) => {
            let s = rest.strip_suffix(')').ok_or_else(bad)?;
            // the seed count is not stored; any spread means several seeds
            let std = num(s)?;
            Ok(Stat {
                mean: num(m)?,
                std,
                n: if std > 0.0 { 2 } else { 1 },
            })
        }
        None => Ok(Stat {
            mean: num(cell)?,
            std: 0.0,
            n: 1,
        }),
    }
}

/// Per-step aggregate CSV for `compare`: one line per (task, strategy, k).
pub fn aggregates_to_csv(results: &[TaskResult]) -> Result<String> {
    let mut out = String::from("task,strategy,k,n,V_mean,V_std,R_mean,R_std\n");
    for r in results {
        for (name, agg) in r.aggregates()? {
            for s in &agg.steps {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    csv_escape(&r.task),
                    name,
                    s.k,
                    s.v.n,
                    fmt_num(s.v.mean),
                    fmt_num(s.v.std),
                    fmt_num(s.cumulative_regret.mean),
                    fmt_num(s.cumulative_regret.std),
                );
            }
        }
    }
    Ok(out)
}
