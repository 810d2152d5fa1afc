//! Machine-readable campaign output: a summary table plus long-format series.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use super::run::AggregateReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(Error::Parse(format!("unknown format `{s}` (csv or json)"))),
        }
    }
}

pub const SUMMARY_COLUMNS: &[&str] = &[
    "method",
    "benchmark",
    "d",
    "N",
    "init",
    "rate",
    "sol_err",
    "fun_err",
    "mean_iters",
    "mean_evals",
    "diverged",
    "train_err",
    "test_err",
];

pub const SERIES_COLUMNS: &[&str] = &["config", "run", "k", "diameter", "W_k", "best_f"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: String,
    pub benchmark: String,
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub init: String,
    pub rate: Option<f64>,
    pub sol_err: Option<f64>,
    pub fun_err: Option<f64>,
    pub mean_iters: f64,
    pub mean_evals: f64,
    pub diverged: usize,
    pub train_err: Option<f64>,
    pub test_err: Option<f64>,
}

impl SummaryRow {
    pub fn from_report(r: &AggregateReport) -> Self {
        Self {
            method: r.config.method.name().to_string(),
            benchmark: r.config.target.label(),
            d: r.config.dim(),
            n: r.config.particles,
            init: r.config.init.to_string(),
            rate: r.rate,
            sol_err: r.sol_err,
            fun_err: r.fun_err,
            mean_iters: r.mean_iters,
            mean_evals: r.mean_evals,
            diverged: r.diverged,
            train_err: r.median_train_err,
            test_err: r.median_test_err,
        }
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.method.clone(),
            self.benchmark.clone(),
            self.d.to_string(),
            self.n.to_string(),
            self.init.clone(),
            opt(self.rate),
            opt(self.sol_err),
            opt(self.fun_err),
            num(self.mean_iters),
            num(self.mean_evals),
            self.diverged.to_string(),
            opt(self.train_err),
            opt(self.test_err),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesRow {
    pub config: usize,
    pub run: usize,
    pub k: usize,
    pub diameter: f64,
    #[serde(rename = "W_k")]
    pub w_k: Option<f64>,
    pub best_f: f64,
}

impl SeriesRow {
    fn fields(&self) -> Vec<String> {
        vec![
            self.config.to_string(),
            self.run.to_string(),
            self.k.to_string(),
            num(self.diameter),
            opt(self.w_k),
            num(self.best_f),
        ]
    }
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn summary_rows(reports: &[AggregateReport]) -> Vec<SummaryRow> {
    reports.iter().map(SummaryRow::from_report).collect()
}

pub fn series_rows(reports: &[AggregateReport]) -> Vec<SeriesRow> {
    let mut rows = Vec::new();
    for (c, rep) in reports.iter().enumerate() {
        for (run, rec) in rep.records.iter().enumerate() {
            for cp in &rec.series {
                rows.push(SeriesRow {
                    config: c,
                    run,
                    k: cp.k,
                    diameter: cp.diameter,
                    w_k: cp.w_k,
                    best_f: cp.best_f,
                });
            }
        }
    }
    rows
}

/// `out.csv` → `out.series.csv`.
pub fn series_path(path: &Path, format: Format) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.series.{}", format.extension()))
}

/// Write the summary to `path` and the series next to it; returns the series path.
pub fn emit_report(reports: &[AggregateReport], format: Format, path: &Path) -> Result<PathBuf> {
    let summary = summary_rows(reports);
    let series = series_rows(reports);
    let spath = series_path(path, format);
    match format {
        Format::Csv => {
            write_csv(path, SUMMARY_COLUMNS, summary.iter().map(SummaryRow::fields))?;
            write_csv(&spath, SERIES_COLUMNS, series.iter().map(SeriesRow::fields))?;
        }
        Format::Json => {
            write_json(path, &summary)?;
            write_json(&spath, &series)?;
        }
    }
    Ok(spath)
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Fixed-width text table for the terminal.
pub fn render_table(reports: &[AggregateReport]) -> String {
    let mut out = format!(
        "{:<8} {:<16} {:>4} {:>5} {:<16} {:>6} {:>10} {:>10} {:>9} {:>11}\n",
        "method", "benchmark", "d", "N", "init", "rate", "sol_err", "fun_err", "iters", "evals"
    );
    for r in summary_rows(reports) {
        let e = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2e}"));
        let rate = r.rate.map_or("-".to_string(), |x| format!("{:.0}%", 100.0 * x));
        out.push_str(&format!(
            "{:<8} {:<16} {:>4} {:>5} {:<16} {:>6} {:>10} {:>10} {:>9.1} {:>11.0}\n",
            r.method,
            r.benchmark,
            r.d,
            r.n,
            r.init,
            rate,
            e(r.sol_err),
            e(r.fun_err),
            r.mean_iters,
            r.mean_evals
        ));
        if r.train_err.is_some() {
            out.push_str(&format!(
                "         TrainErr {}  TestErr {}\n",
                e(r.train_err),
                e(r.test_err)
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ExperimentConfig;
    use crate::harness::run::run_many;

    fn small() -> AggregateReport {
        run_many(&ExperimentConfig {
            runs: 1,
            max_iters: 30,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn empty_campaign_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        let spath = emit_report(&[], Format::Csv, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap().trim(), SUMMARY_COLUMNS.join(","));
        assert_eq!(std::fs::read_to_string(spath).unwrap().trim(), SERIES_COLUMNS.join(","));
    }

    #[test]
    fn one_run_one_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        let rep = small();
        emit_report(std::slice::from_ref(&rep), Format::Csv, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().nth(1).unwrap().starts_with("escbo,rastrigin,2,20,uniform:-5:5,"));
        let series = std::fs::read_to_string(series_path(&path, Format::Csv)).unwrap();
        assert_eq!(series.lines().count(), 1 + rep.records[0].series.len());
    }

    #[test]
    fn re_emit_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let rep = small();
        for format in [Format::Csv, Format::Json] {
            let a = dir.path().join(format!("a.{}", format.extension()));
            let b = dir.path().join(format!("b.{}", format.extension()));
            emit_report(std::slice::from_ref(&rep), format, &a).unwrap();
            emit_report(std::slice::from_ref(&rep), format, &b).unwrap();
            assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
            assert_eq!(
                std::fs::read(series_path(&a, format)).unwrap(),
                std::fs::read(series_path(&b, format)).unwrap()
            );
        }
    }

    #[test]
    fn json_summary_parses() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.json");
        emit_report(&[small()], Format::Json, &path).unwrap();
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(v[0]["benchmark"], "rastrigin");
        assert_eq!(v[0]["N"], 20);
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let err = emit_report(&[], Format::Csv, Path::new("/nonexistent-dir/x/out.csv")).unwrap_err();
        assert!(matches!(err, Error::Csv(_) | Error::Io(_)));
    }

    #[test]
    fn series_path_naming() {
        assert_eq!(series_path(Path::new("r/out.csv"), Format::Csv), PathBuf::from("r/out.series.csv"));
        assert!("xml".parse::<Format>().is_err());
    }
}
