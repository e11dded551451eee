use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::{RunRecord, RunTimings};
use crate::error::{Error, Result};
use crate::metrics::{Metric, Target};

pub const SCHEMA_VERSION: u32 = 1;

/// Mean and spread of one metric column over seeds. `std` is the sample
/// standard deviation and is absent for a single value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub count: usize,
}

impl Cell {
    /// Statistics of `values`, summed in sorted order so the result does
    /// not depend on seed order.
    pub fn from_values(values: &[f64]) -> Self {
        let mut values = values.to_vec();
        values.sort_by(f64::total_cmp);
        let count = values.len();
        if count == 0 {
            return Self {
                mean: None,
                std: None,
                count,
            };
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let std = (count > 1).then(|| {
            let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (count - 1) as f64).sqrt()
        });
        Self {
            mean: Some(mean),
            std,
            count,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub label: String,
    /// Seeds in which this row completed.
    pub n_seeds: usize,
    pub cells: Vec<Cell>,
    /// Mean unlearning wall time; not part of the deterministic report.
    #[serde(skip)]
    pub wall_time_s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub columns: Vec<(Metric, Target)>,
    pub rows: Vec<TableRow>,
}

impl ReportTable {
    pub fn row(&self, label: &str) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn cell(&self, label: &str, metric: Metric, target: Target) -> Option<&Cell> {
        let col = self.columns.iter().position(|&c| c == (metric, target))?;
        self.row(label).map(|r| &r.cells[col])
    }
}

fn columns_of(record: &RunRecord) -> Vec<(Metric, Target)> {
    record
        .rows
        .iter()
        .find(|r| r.is_ok())
        .map(|r| r.metrics.iter().map(|m| (m.metric, m.target)).collect())
        .unwrap_or_default()
}

/// Aggregates per-seed records into a method-by-metric table. All records
/// must share the test, the row labels and the metric columns.
pub fn aggregate(records: &[RunRecord]) -> Result<ReportTable> {
    let first = records
        .first()
        .ok_or_else(|| Error::Aggregation("no records to aggregate".into()))?;
    let labels: Vec<&str> = first.rows.iter().map(|r| r.label.as_str()).collect();
    let columns = records
        .iter()
        .map(columns_of)
        .find(|c| !c.is_empty())
        .unwrap_or_default();
    for rec in records {
        if rec.test != first.test || rec.n != first.n {
            return Err(Error::Aggregation(format!(
                "seed {} ran {} n={} but seed {} ran {} n={}",
                rec.seed, rec.test, rec.n, first.seed, first.test, first.n
            )));
        }
        let these: Vec<&str> = rec.rows.iter().map(|r| r.label.as_str()).collect();
        if these != labels {
            return Err(Error::Aggregation(format!(
                "seed {} has rows {these:?}, expected {labels:?}",
                rec.seed
            )));
        }
        for row in rec.rows.iter().filter(|r| r.is_ok()) {
            let cols: Vec<_> = row.metrics.iter().map(|m| (m.metric, m.target)).collect();
            if cols != columns {
                return Err(Error::Aggregation(format!(
                    "seed {} row {} has metric columns {cols:?}, expected {columns:?}",
                    rec.seed, row.label
                )));
            }
        }
    }

    let mut rows = Vec::with_capacity(labels.len());
    for (i, label) in labels.iter().enumerate() {
        let ok: Vec<_> = records
            .iter()
            .map(|r| &r.rows[i])
            .filter(|r| r.is_ok())
            .collect();
        let cells = (0..columns.len())
            .map(|c| Cell::from_values(&ok.iter().map(|r| r.metrics[c].value).collect::<Vec<_>>()))
            .collect();
        let times: Vec<f64> = records
            .iter()
            .filter_map(|r| {
                if i == 0 {
                    Some(r.timings.original_train_s)
                } else {
                    r.timings
                        .methods
                        .iter()
                        .find(|m| m.label == *label)
                        .map(|m| m.wall_time_s)
                }
            })
            .collect();
        rows.push(TableRow {
            label: label.to_string(),
            n_seeds: ok.len(),
            cells,
            wall_time_s: Cell::from_values(&times).mean,
        });
    }
    Ok(ReportTable { columns, rows })
}

#[derive(Serialize, Deserialize)]
struct ReportFile {
    schema_version: u32,
    config: std::collections::BTreeMap<String, String>,
    records: Vec<RunRecord>,
    table: ReportTable,
}

#[derive(Serialize, Deserialize)]
struct TimingsFile {
    schema_version: u32,
    runs: Vec<RunTimings>,
}

fn column_name(metric: Metric, target: Target) -> String {
    match metric {
        Metric::Utility => "utility".to_string(),
        _ => format!("{}_{}", metric.name(), target.short()),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// CSV with one row per method: `method,n_seeds` then `<col>_mean,<col>_std`
/// per metric column. Missing values are empty fields.
pub fn table_csv(table: &ReportTable) -> String {
    let mut out = String::from("method,n_seeds");
    for &(m, t) in &table.columns {
        let name = column_name(m, t);
        let _ = write!(out, ",{name}_mean,{name}_std");
    }
    out.push('\n');
    for row in &table.rows {
        let _ = write!(out, "{},{}", row.label, row.n_seeds);
        for cell in &row.cells {
            let _ = write!(out, ",{},{}", fmt_opt(cell.mean), fmt_opt(cell.std));
        }
        out.push('\n');
    }
    out
}

fn fmt_cell(cell: &Cell, metric: Metric, clamp_comi: bool) -> String {
    let Some(mean) = cell.mean else {
        return "failed".to_string();
    };
    if clamp_comi && metric == Metric::Comi && mean < 50.0 {
        return "<50".to_string();
    }
    let digits = if metric == Metric::Fgt { 1 } else { 2 };
    match cell.std {
        Some(sd) => format!("{mean:.digits$} ± {sd:.digits$}"),
        None => format!("{mean:.digits$}"),
    }
}

/// Fixed-width text table for reading in a terminal.
pub fn table_text(table: &ReportTable, records: &[RunRecord], clamp_comi: bool) -> String {
    let mut header = vec!["Method".to_string()];
    header.extend(table.columns.iter().map(|&(m, t)| match m {
        Metric::Utility => "Utility Err".to_string(),
        Metric::Comi => "CoMI mem".to_string(),
        _ => format!(
            "{} {}",
            if m == Metric::Err { "Err" } else { "Fgt" },
            t.short()
        ),
    }));
    header.push("Time (s)".to_string());
    let mut lines = vec![header];
    for row in &table.rows {
        let mut line = vec![format!("{} ({})", row.label, row.n_seeds)];
        line.extend(
            row.cells
                .iter()
                .zip(&table.columns)
                .map(|(c, &(m, _))| fmt_cell(c, m, clamp_comi)),
        );
        line.push(
            row.wall_time_s
                .map(|t| format!("{t:.2}"))
                .unwrap_or_default(),
        );
        lines.push(line);
    }
    let widths: Vec<usize> = (0..lines[0].len())
        .map(|i| {
            lines
                .iter()
                .map(|l| l[i].chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();

    let mut out = String::new();
    if let Some(first) = records.first() {
        let seeds: Vec<String> = records.iter().map(|r| r.seed.to_string()).collect();
        let _ = writeln!(
            out,
            "test {} n={} classes {:?} arch {} seeds [{}]",
            first.test,
            first.n,
            first.affected_classes,
            first.arch_id,
            seeds.join(", ")
        );
    }
    for (i, line) in lines.iter().enumerate() {
        let cells: Vec<String> = line
            .iter()
            .zip(&widths)
            .map(|(s, &w)| format!("{s:<w$}"))
            .collect();
        let _ = writeln!(out, "{}", cells.join(" | ").trim_end());
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
            let _ = writeln!(out, "{}", rule.join("-+-"));
        }
    }
    out
}

/// Deterministic JSON report: identical bytes for identical records.
pub fn report_json(
    config: &ExperimentConfig,
    records: &[RunRecord],
    table: &ReportTable,
) -> Result<String> {
    let file = ReportFile {
        schema_version: SCHEMA_VERSION,
        config: config.values.clone(),
        records: records.to_vec(),
        table: table.clone(),
    };
    let mut s = serde_json::to_string_pretty(&file)?;
    s.push('\n');
    Ok(s)
}

fn timings_json(records: &[RunRecord]) -> Result<String> {
    let file = TimingsFile {
        schema_version: SCHEMA_VERSION,
        runs: records.iter().map(|r| r.timings.clone()).collect(),
    };
    let mut s = serde_json::to_string_pretty(&file)?;
    s.push('\n');
    Ok(s)
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::file(dir, e))?;
    tmp.write_all(contents).map_err(|e| Error::file(path, e))?;
    tmp.persist(path).map_err(|e| Error::file(path, e.error))?;
    Ok(())
}

pub const REPORT_FILE: &str = "report.json";
pub const TIMINGS_FILE: &str = "timings.json";
pub const TABLE_CSV: &str = "table.csv";
pub const TABLE_TXT: &str = "table.txt";

/// Aggregates `records` and writes `report.json`, `timings.json`,
/// `table.csv` and `table.txt` into `dir`.
pub fn export(config: &ExperimentConfig, records: &[RunRecord], dir: &Path) -> Result<ReportTable> {
    let table = aggregate(records)?;
    let report = report_json(config, records, &table)?;
    let timings = timings_json(records)?;
    let csv = table_csv(&table);
    let text = table_text(&table, records, config.clamp_comi);
    std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    write_atomic(&dir.join(REPORT_FILE), report.as_bytes())?;
    write_atomic(&dir.join(TIMINGS_FILE), timings.as_bytes())?;
    write_atomic(&dir.join(TABLE_CSV), csv.as_bytes())?;
    write_atomic(&dir.join(TABLE_TXT), text.as_bytes())?;
    Ok(table)
}

/// Reads the records of an exported report, with timings reattached when
/// `timings.json` is present.
pub fn load_report(dir: &Path) -> Result<Vec<RunRecord>> {
    let path = dir.join(REPORT_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::file(&path, e))?;
    let file: ReportFile = serde_json::from_str(&text)?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::config(format!(
            "{}: schema version {} is not supported",
            path.display(),
            file.schema_version
        )));
    }
    let mut records = file.records;
    let tpath = dir.join(TIMINGS_FILE);
    if tpath.exists() {
        let text = std::fs::read_to_string(&tpath).map_err(|e| Error::file(&tpath, e))?;
        let timings: TimingsFile = serde_json::from_str(&text)?;
        for t in timings.runs {
            if let Some(r) = records.iter_mut().find(|r| r.seed == t.seed) {
                r.timings = t;
            }
        }
    }
    Ok(records)
}
