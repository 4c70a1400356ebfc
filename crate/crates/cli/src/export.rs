//! Gnuplot-ready column files from a finished run directory.
//!
//! Each file has a `#` header line followed by one line per stored time:
//! `t` and then one column per series, `NaN` where a value is undefined.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::run::{Series, MANIFEST, SERIES};

pub const PLOT_DIR: &str = "plot";

type Columns = Vec<Vec<Option<f64>>>;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("{dir} is not a finished run directory: missing {missing:?}")]
    MissingArtifacts { dir: PathBuf, missing: Vec<&'static str> },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

fn column_file(times: &[f64], header: &[String], columns: &[Vec<Option<f64>>]) -> String {
    let mut out = format!("# t {}\n", header.join(" "));
    for (k, t) in times.iter().enumerate() {
        let _ = write!(out, "{t:.16e}");
        for col in columns {
            match col.get(k).copied().flatten() {
                Some(v) => {
                    let _ = write!(out, " {v:.16e}");
                }
                None => out.push_str(" NaN"),
            }
        }
        out.push('\n');
    }
    out
}

fn some(v: &[f64]) -> Vec<Option<f64>> {
    v.iter().map(|x| Some(*x).filter(|x| x.is_finite())).collect()
}

/// Writes `min_f.dat`, `residuals.dat` and, for runs with the potential,
/// `F.dat`, `dFdt.dat` and `frak_F.dat` under `<run_dir>/plot`. Returns the
/// paths written.
pub fn export_plotdata(run_dir: &Path) -> Result<Vec<PathBuf>, ExportError> {
    let missing: Vec<&'static str> = [MANIFEST, SERIES].into_iter().filter(|f| !run_dir.join(f).is_file()).collect();
    if !missing.is_empty() {
        return Err(ExportError::MissingArtifacts { dir: run_dir.to_path_buf(), missing });
    }
    let path = run_dir.join(SERIES);
    let src = std::fs::read_to_string(&path).map_err(|source| ExportError::Io { path: path.clone(), source })?;
    let series: Series = serde_json::from_str(&src).map_err(|source| ExportError::Json { path, source })?;

    let mut files: Vec<(&str, Vec<String>, Columns)> = vec![(
        "min_f.dat",
        (1..=series.min_f.len()).map(|i| format!("min_f{i}")).collect(),
        series.min_f.iter().map(|f| some(f)).collect(),
    )];
    let mut residual_header = vec!["flow".to_string()];
    let mut residuals = vec![series.flow_residual.clone()];
    if let Some(p) = &series.perelman {
        residual_header.push("modified_flow".into());
        residuals.push(p.mrf_residual.clone());
        files.push(("F.dat", vec!["F".into()], vec![some(&p.f_values)]));
        files.push((
            "dFdt.dat",
            vec!["finite_difference".into(), "formula".into(), "general_formula".into()],
            vec![p.df_dt_fd.clone(), some(&p.df_dt_formula), some(&p.general_formula_rhs)],
        ));
        files.push(("frak_F.dat", vec!["end0".into(), "end1".into()], p.frak_f.iter().map(|f| some(f)).collect()));
    }
    files.insert(1, ("residuals.dat", residual_header, residuals));

    let dir = run_dir.join(PLOT_DIR);
    std::fs::create_dir_all(&dir).map_err(|source| ExportError::Io { path: dir.clone(), source })?;
    let mut written = Vec::with_capacity(files.len());
    for (name, header, columns) in files {
        let path = dir.join(name);
        std::fs::write(&path, column_file(&series.times, &header, &columns))
            .map_err(|source| ExportError::Io { path: path.clone(), source })?;
        written.push(path);
    }
    Ok(written)
}
