//! Bench report serialization.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::harness::io::fmt_f64;
use crate::path::BenchRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Markdown,
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "markdown" | "md" => Ok(Format::Markdown),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

pub const CSV_HEADER: [&str; 14] = [
    "label",
    "p",
    "q",
    "n",
    "reps",
    "t_f_mean_ms",
    "t_f_var_ms2",
    "t_s_mean_ms",
    "t_s_var_ms2",
    "speedup_mean",
    "speedup_var",
    "safety_ok",
    "max_objective_gap",
    "max_solution_gap",
];

fn csv_report(records: &[BenchRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::Parse { path: "<report>".into(), msg: e.to_string() };
    w.write_record(CSV_HEADER).map_err(to_err)?;
    for r in records {
        w.write_record([
            r.label.clone(),
            r.p.to_string(),
            r.q.to_string(),
            r.n.to_string(),
            r.reps.to_string(),
            fmt_f64(r.t_f.mean),
            fmt_f64(r.t_f.var),
            fmt_f64(r.t_s.mean),
            fmt_f64(r.t_s.var),
            fmt_f64(r.speedup.mean),
            fmt_f64(r.speedup.var),
            r.safety_ok.to_string(),
            fmt_f64(r.max_objective_gap),
            fmt_f64(r.max_solution_gap),
        ])
        .map_err(to_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse { path: "<report>".into(), msg: e.to_string() })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Times in seconds as `mean(variance)`; rows sharing a dimension are
/// grouped under one label.
fn markdown_report(records: &[BenchRecord]) -> String {
    let mut out = String::from("| Dimension | Sample size | T_f (s) | T_s (s) | Speedup |\n|---|---|---|---|---|\n");
    let mut prev: Option<(usize, usize)> = None;
    for r in records {
        let dim = if prev == Some((r.p, r.q)) { String::new() } else { format!("{}×{}", r.p, r.q) };
        prev = Some((r.p, r.q));
        out.push_str(&format!(
            "| {} | {} | {:.3}({:.3}) | {:.3}({:.3}) | {:.3}({:.3}) |\n",
            dim,
            r.n,
            r.t_f.mean / 1e3,
            r.t_f.var / 1e6,
            r.t_s.mean / 1e3,
            r.t_s.var / 1e6,
            r.speedup.mean,
            r.speedup.var
        ));
    }
    out
}

pub fn report(records: &[BenchRecord], format: Format) -> Result<String> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to report".into()));
    }
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(records)? + "\n"),
        Format::Csv => csv_report(records),
        Format::Markdown => Ok(markdown_report(records)),
    }
}
