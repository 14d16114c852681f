use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numkernel::io::{format_f64, parse_f64};
use crate::region::RegionSpec;
use crate::solver::SolveReport;

/// Samples per boundary curve in `boundary.csv`.
const BOUNDARY_POINTS: usize = 400;

#[derive(Debug, Clone)]
pub struct PlotFiles {
    pub history: PathBuf,
    pub eigenvalues: PathBuf,
    pub boundary: PathBuf,
}

/// Writes `history.csv` (iteration, objective), `eigenvalues.csv`
/// (re, im, label with labels `input` / `output`) and `boundary.csv`
/// (re, im) into `dir`, creating it if needed.
pub fn emit_plot_data(report: &SolveReport, region: &RegionSpec, dir: &Path) -> Result<PlotFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = PlotFiles {
        history: dir.join("history.csv"),
        eigenvalues: dir.join("eigenvalues.csv"),
        boundary: dir.join("boundary.csv"),
    };

    let mut s = String::from("iteration,objective\n");
    for (k, v) in report.objective_history.iter().enumerate() {
        s.push_str(&format!("{},{}\n", k + 1, format_f64(*v)));
    }
    write(&files.history, &s)?;

    let mut s = String::from("re,im,label\n");
    for (label, zs) in [
        ("input", report.complex_input_eigenvalues()),
        ("output", report.complex_eigenvalues()),
    ] {
        for z in zs {
            s.push_str(&format!("{},{},{label}\n", format_f64(z.re), format_f64(z.im)));
        }
    }
    write(&files.eigenvalues, &s)?;

    let mut s = String::from("re,im\n");
    for z in region.boundary_samples(BOUNDARY_POINTS)? {
        s.push_str(&format!("{},{}\n", format_f64(z.re), format_f64(z.im)));
    }
    write(&files.boundary, &s)?;
    Ok(files)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn data_lines(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(|f| f.trim().to_string()).collect())
        .collect())
}

/// Objective values from a `history.csv`.
pub fn read_history_csv(path: &Path) -> Result<Vec<f64>> {
    data_lines(path)?
        .iter()
        .map(|f| {
            f.get(1)
                .ok_or_else(|| Error::Parse(format!("{}: short row", path.display())))
                .and_then(|v| parse_f64(v))
        })
        .collect()
}

/// Points (and labels, when present) from `eigenvalues.csv` or `boundary.csv`.
pub fn read_points_csv(path: &Path) -> Result<Vec<(Complex64, Option<String>)>> {
    data_lines(path)?
        .into_iter()
        .map(|f| {
            if f.len() < 2 {
                return Err(Error::Parse(format!("{}: short row", path.display())));
            }
            Ok((Complex64::new(parse_f64(&f[0])?, parse_f64(&f[1])?), f.get(2).cloned()))
        })
        .collect()
}
