//! Manifest + CSV storage for problems.
//!
//! `manifest.json` holds `{ "n", "p", "q", "y": "y.csv", "X": "X.csv" }`
//! with paths relative to the manifest. `y.csv` has one value per line,
//! `X.csv` one row of p·q values per sample in column-stacking order.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_problem, unvec, TraceRegressionProblem};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub y: String,
    #[serde(rename = "X")]
    pub x: String,
}

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Parse { path: path.display().to_string(), msg: e.to_string() }
}

/// Write `manifest.json`, `y.csv` and `X.csv` into `dir`.
pub fn save_problem(problem: &TraceRegressionProblem, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let ypath = dir.join("y.csv");
    let xpath = dir.join("X.csv");
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(&ypath).map_err(|e| csv_err(&ypath, e))?;
    for v in problem.y().iter() {
        w.write_record([fmt_f64(*v)]).map_err(|e| csv_err(&ypath, e))?;
    }
    w.flush().map_err(io_err(&ypath))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(&xpath).map_err(|e| csv_err(&xpath, e))?;
    for row in problem.design().row_iter() {
        w.write_record(row.iter().map(|v| fmt_f64(*v))).map_err(|e| csv_err(&xpath, e))?;
    }
    w.flush().map_err(io_err(&xpath))?;
    let manifest = Manifest { n: problem.n(), p: problem.p(), q: problem.q(), y: "y.csv".into(), x: "X.csv".into() };
    let mpath = dir.join("manifest.json");
    fs::write(&mpath, serde_json::to_string_pretty(&manifest)?).map_err(io_err(&mpath))?;
    Ok(mpath)
}

fn read_rows(path: &Path, width: usize) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.len() != width {
            return Err(Error::Parse {
                path: path.display().to_string(),
                msg: format!("row {} has {} values, expected {width}", i + 1, rec.len()),
            });
        }
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, cell)| {
                cell.parse::<f64>().map_err(|_| Error::Parse {
                    path: path.display().to_string(),
                    msg: format!("row {} column {}: cannot parse `{cell}`", i + 1, j + 1),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn load_problem(manifest_path: &Path) -> Result<TraceRegressionProblem> {
    let text = fs::read_to_string(manifest_path).map_err(io_err(manifest_path))?;
    let m: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::Parse { path: manifest_path.display().to_string(), msg: e.to_string() })?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let ypath = base.join(&m.y);
    let xpath = base.join(&m.x);
    let yrows = read_rows(&ypath, 1)?;
    let xrows = read_rows(&xpath, m.p * m.q)?;
    if yrows.len() != m.n || xrows.len() != m.n {
        return Err(Error::Dimension(format!(
            "manifest says n={} but y.csv has {} rows and X.csv has {}",
            m.n,
            yrows.len(),
            xrows.len()
        )));
    }
    let y = DVector::from_iterator(m.n, yrows.into_iter().map(|r| r[0]));
    let x: Vec<DMatrix<f64>> = xrows.iter().map(|r| unvec(r, m.p, m.q)).collect();
    build_problem(x, y)
}
