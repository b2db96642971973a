//! Text renderings of benchmark results.

use std::fmt::Write;
use std::str::FromStr;

use super::BenchResult;
use crate::error::{Error, Result};

const COLUMNS: [&str; 7] = ["method", "M", "M0", "T_train", "nnz_F", "mean_error", "std_error"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Table,
    Curves,
    Timing,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "table" => Ok(ReportFormat::Table),
            "curves" => Ok(ReportFormat::Curves),
            "timing" => Ok(ReportFormat::Timing),
            other => Err(Error::InvalidParameter(format!("unknown report format '{other}'"))),
        }
    }
}

impl ReportFormat {
    pub fn render(self, results: &[BenchResult]) -> String {
        match self {
            ReportFormat::Csv => results_csv(results),
            ReportFormat::Table => results_table(results),
            ReportFormat::Curves => curves_csv(results),
            ReportFormat::Timing => timing_csv(results),
        }
    }
}

fn cells(r: &BenchResult) -> [String; 7] {
    [
        r.method.clone(),
        r.m.to_string(),
        r.m0.to_string(),
        format!("{:.4}", r.t_train()),
        format!("{:.0}", r.nnz_f),
        format!("{:.6}", r.mean_error),
        format!("{:.6}", r.std_error),
    ]
}

pub fn results_csv(results: &[BenchResult]) -> String {
    let mut out = COLUMNS.join(",");
    out.push('\n');
    for r in results {
        out.push_str(&cells(r).join(","));
        out.push('\n');
    }
    out
}

/// Aligned table; the error column reads `mean ± std`. Cells with failed
/// runs are listed below the table.
pub fn results_table(results: &[BenchResult]) -> String {
    let header = ["method", "M", "M0", "T_train", "nnz_F", "error"];
    let rows: Vec<[String; 6]> = results
        .iter()
        .map(|r| {
            let c = cells(r);
            [c[0].clone(), c[1].clone(), c[2].clone(), c[3].clone(), c[4].clone(), format!("{} ± {}", c[5], c[6])]
        })
        .collect();
    let mut widths = header.map(|h| h.chars().count());
    for row in &rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cols: &[String]| {
        let parts: Vec<String> = cols
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(i, (c, w))| {
                let pad = w - c.chars().count();
                if i == 0 {
                    format!("{c}{}", " ".repeat(pad))
                } else {
                    format!("{}{c}", " ".repeat(pad))
                }
            })
            .collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(&header.map(String::from));
    for row in &rows {
        line(row);
    }
    for r in results.iter().filter(|r| r.failed > 0) {
        let _ = writeln!(out, "failed runs: {} M={} {}/{}", r.method, r.m, r.failed, r.failed + r.errors.len());
    }
    out
}

/// Error against `M` per method, for plotting.
pub fn curves_csv(results: &[BenchResult]) -> String {
    let mut out = String::from("method,M,mean_error,std_error\n");
    for r in results {
        let _ = writeln!(out, "{},{},{:.6},{:.6}", r.method, r.m, r.mean_error, r.std_error);
    }
    out
}

/// Feature-construction and solve times, reported separately.
pub fn timing_csv(results: &[BenchResult]) -> String {
    let mut out = String::from("method,M,T_features,T_solve,T_train\n");
    for r in results {
        let _ = writeln!(out, "{},{},{:.6},{:.6},{:.6}", r.method, r.m, r.t_features, r.t_solve, r.t_train());
    }
    out
}
