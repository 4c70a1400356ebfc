//! Pipeline orchestration and artifact writing.
//!
//! A run directory holds
//!
//! * `trajectory.csv`: one row per stored `(t, r)` pair with `h`, `f1..fn`
//!   and, when computed, `phi`, `psi`, `ptilde` and `p`;
//! * `series.json`: scalar time series aligned with the stored times;
//! * `report.json`: identities, compatibility, residuals and the
//!   monotonicity report;
//! * `manifest.json`: written last, so its presence marks a finished run.
//!
//! Every file is written to a temporary name and renamed into place. No
//! timestamps or host data are recorded, so identical configs give
//! identical bytes.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use symflow::algebra::IdentityReport;
use symflow::bc::CompatibilityReport;
use symflow::deturck::{ricci_flow_residual, DeturckError, DeturckSystem, FlowResidual, Trajectory};
use symflow::perelman::{build_mrf, monotonicity_report, mrf_residual, MonotonicityReport, MrfPair, MrfResidual};
use symflow::{fd, HomogeneousSpaceData};
use thiserror::Error;

use crate::config::{Format, Prepared, RunConfig};

pub const TRAJECTORY: &str = "trajectory.csv";
pub const SERIES: &str = "series.json";
pub const REPORT: &str = "report.json";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum RunError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Completed,
    /// A scale function reached the positivity floor before `t_end`; the
    /// trajectory up to that point is still written.
    Singular,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n_cells: usize,
    pub dr: f64,
    pub snapshots: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub flow_residual_max: Option<f64>,
    pub mrf_residual_max: Option<f64>,
    /// Smallest `frak_F` value over both ends and all stored times.
    pub min_frak_f: Option<f64>,
    pub max_abs_frak_f: Option<f64>,
    pub monotone: Option<bool>,
    pub hypothesis_violated: Option<bool>,
    pub formula_mismatch: Option<f64>,
    /// `min_r f_i` at the last stored time.
    pub final_min_f: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub version: String,
    pub grid: Grid,
    pub status: RunStatus,
    pub singular_time: Option<f64>,
    pub error: Option<String>,
    pub exit_code: i32,
    pub files: Vec<String>,
    pub summary: Summary,
    pub notes: Vec<String>,
}

/// Scalar series, one entry per stored time. `None` marks values that are
/// undefined there, e.g. residuals at the first and last time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub times: Vec<f64>,
    /// `min_r f_i`, one series per summand.
    pub min_f: Vec<Vec<f64>>,
    pub flow_residual: Vec<Option<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perelman: Option<PerelmanSeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerelmanSeries {
    pub mrf_residual: Vec<Option<f64>>,
    pub f_values: Vec<f64>,
    pub df_dt_fd: Vec<Option<f64>>,
    pub df_dt_formula: Vec<f64>,
    pub general_formula_rhs: Vec<f64>,
    pub frak_f: [Vec<f64>; 2],
}

#[derive(Debug, Serialize)]
struct Report<'a> {
    space: &'a HomogeneousSpaceData,
    identities: &'a IdentityReport,
    compatibility: &'a CompatibilityReport,
    flow_residual: Option<&'a FlowResidual>,
    mrf_residual: Option<&'a MrfResidual>,
    monotonicity: Option<&'a MonotonicityReport>,
}

/// Everything a pipeline produced, including partial results of a failed
/// run.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub trajectory: Option<Trajectory>,
    pub flow_residual: Option<FlowResidual>,
    pub pair: Option<MrfPair>,
    pub mrf_residual: Option<MrfResidual>,
    pub monotonicity: Option<MonotonicityReport>,
    pub notes: Vec<String>,
    failure: Option<(String, i32)>,
}

impl Artifacts {
    fn fail(&mut self, e: impl std::fmt::Display, code: i32) {
        self.failure = Some((e.to_string(), code));
    }
}

fn deturck_exit(e: &DeturckError) -> i32 {
    match e {
        DeturckError::IncompatibleData(_) => 3,
        DeturckError::Config(_) => 2,
        _ => 4,
    }
}

/// Runs the stages selected in the config without touching the disk.
pub fn execute(prepared: &Prepared) -> Artifacts {
    let cfg = &prepared.config;
    let mut out = Artifacts::default();
    let sys = match DeturckSystem::new(&prepared.space, &prepared.bc, &prepared.init, cfg.solver.n_cells) {
        Ok(sys) => sys,
        Err(e) => {
            out.fail(&e, deturck_exit(&e));
            return out;
        }
    };
    let traj = match sys.solve(&cfg.solver) {
        Ok(traj) => traj,
        Err(e) => {
            out.fail(&e, deturck_exit(&e));
            return out;
        }
    };
    let traj = if cfg.pipeline.gauge {
        match sys.solve_gauge(&traj) {
            Ok(recovered) => recovered,
            Err(e) => {
                out.trajectory = Some(traj);
                out.fail(format!("gauge recovery: {e}"), 4);
                return out;
            }
        }
    } else {
        out.notes.push("gauge recovery disabled: h and f are the DeTurck-gauge solution".into());
        traj
    };
    if traj.flow().len() >= 3 {
        match ricci_flow_residual(traj.flow(), &prepared.space) {
            Ok(res) => out.flow_residual = Some(res),
            Err(e) => out.notes.push(format!("flow residual unavailable: {e}")),
        }
    } else {
        out.notes.push("fewer than three stored times: no residuals".into());
    }
    let singular = traj.singular_time.is_some();
    let flow = traj.flow().to_vec();
    out.trajectory = Some(traj);
    if !cfg.pipeline.perelman {
        return out;
    }
    if singular {
        out.notes.push("the flow became singular before t_end: potential not computed".into());
        return out;
    }
    out.notes.push("F values assume unit fibre volume".into());
    let pair = match build_mrf(&flow, &prepared.space, cfg.solver.cfl) {
        Ok(pair) => pair,
        Err(e) => {
            out.fail(format!("potential: {e}"), 4);
            return out;
        }
    };
    match mrf_residual(&pair, &prepared.space) {
        Ok(res) => out.mrf_residual = Some(res),
        Err(e) => out.notes.push(format!("modified-flow residual unavailable: {e}")),
    }
    match monotonicity_report(&pair, &prepared.space, true) {
        Ok(report) => {
            if report.hypothesis_violated {
                out.notes.push(format!("monotonicity hypotheses violated: {}", report.violations.join("; ")));
            }
            out.monotonicity = Some(report);
        }
        Err(e) => out.fail(format!("monotonicity report: {e}"), 4),
    }
    out.pair = Some(pair);
    out
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), RunError> {
    let path = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    let io_err = |source| RunError::Io { path: path.clone(), source };
    std::fs::write(&tmp, bytes).map_err(io_err)?;
    std::fs::rename(&tmp, &path).map_err(io_err)
}

fn json(value: &impl Serialize) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("artifacts always serialize");
    s.push('\n');
    s.into_bytes()
}

/// Long-format CSV, floats with 17 significant digits.
pub fn trajectory_csv(traj: &Trajectory, pair: Option<&MrfPair>) -> String {
    let flow = traj.flow();
    let n = flow.first().map_or(0, |s| s.f.len());
    let mut out = String::from("t,r,h");
    for i in 1..=n {
        let _ = write!(out, ",f{i}");
    }
    if traj.gauge.is_some() {
        out.push_str(",phi");
    }
    if pair.is_some() {
        out.push_str(",psi,ptilde,p");
    }
    out.push('\n');
    for (k, s) in flow.iter().enumerate() {
        let r = fd::nodes(s.h.len() - 1);
        for (m, x) in r.iter().enumerate() {
            let _ = write!(out, "{:.16e},{:.16e},{:.16e}", s.t, x, s.h[m]);
            for fi in &s.f {
                let _ = write!(out, ",{:.16e}", fi[m]);
            }
            if let Some(phi) = &traj.gauge {
                let _ = write!(out, ",{:.16e}", phi[k][m]);
            }
            if let Some(pair) = pair {
                let _ = write!(out, ",{:.16e},{:.16e},{:.16e}", pair.psi[k][m], pair.ptilde[k][m], pair.p[k][m]);
            }
            out.push('\n');
        }
    }
    out
}

/// Places `values` given at `at` onto `times`.
fn align(times: &[f64], at: &[f64], values: impl Fn(usize) -> f64) -> Vec<Option<f64>> {
    times
        .iter()
        .map(|t| at.iter().position(|s| s == t).map(&values).filter(|v| v.is_finite()))
        .collect()
}

fn series(art: &Artifacts, traj: &Trajectory) -> Series {
    let flow = traj.flow();
    let times: Vec<f64> = flow.iter().map(|s| s.t).collect();
    let n = flow.first().map_or(0, |s| s.f.len());
    let min_f = (0..n)
        .map(|i| flow.iter().map(|s| s.f[i].iter().copied().fold(f64::INFINITY, f64::min)).collect())
        .collect();
    let flow_residual = match &art.flow_residual {
        Some(res) => align(&times, &res.times, |k| res.f.iter().map(|f| f[k]).fold(res.h[k], f64::max)),
        None => vec![None; times.len()],
    };
    let perelman = art.monotonicity.as_ref().map(|m| PerelmanSeries {
        mrf_residual: match &art.mrf_residual {
            Some(res) => align(&times, &res.times, |k| res.f.iter().map(|f| f[k]).fold(res.h[k].max(res.p[k]), f64::max)),
            None => vec![None; times.len()],
        },
        f_values: m.f_values.clone(),
        df_dt_fd: m.df_dt_fd.iter().map(|v| Some(*v).filter(|v| v.is_finite())).collect(),
        df_dt_formula: m.df_dt_formula.clone(),
        general_formula_rhs: m.general_formula_rhs.clone(),
        frak_f: m.frak_f.clone(),
    });
    Series { times, min_f, flow_residual, perelman }
}

fn summary(art: &Artifacts, series: Option<&Series>) -> Summary {
    let mono = art.monotonicity.as_ref();
    Summary {
        flow_residual_max: art.flow_residual.as_ref().map(FlowResidual::max),
        mrf_residual_max: art.mrf_residual.as_ref().map(MrfResidual::max),
        min_frak_f: mono.map(|m| m.frak_f.iter().flatten().copied().fold(f64::INFINITY, f64::min)),
        max_abs_frak_f: mono.map(MonotonicityReport::max_frak_f),
        monotone: mono.map(|m| m.monotone),
        hypothesis_violated: mono.map(|m| m.hypothesis_violated),
        formula_mismatch: mono.map(MonotonicityReport::formula_mismatch),
        final_min_f: series.map_or_else(Vec::new, |s| s.min_f.iter().filter_map(|f| f.last().copied()).collect()),
    }
}

/// Writes the artifacts of `art` into `dir` and returns the manifest.
pub fn write_run(prepared: &Prepared, art: &Artifacts, dir: &Path) -> Result<RunManifest, RunError> {
    std::fs::create_dir_all(dir).map_err(|source| RunError::Io { path: dir.to_path_buf(), source })?;
    let cfg = &prepared.config;
    let mut files = Vec::new();
    let series = art.trajectory.as_ref().map(|traj| series(art, traj));
    if let Some(traj) = &art.trajectory {
        if cfg.output.wants(Format::Csv) {
            write_atomic(dir, TRAJECTORY, trajectory_csv(traj, art.pair.as_ref()).as_bytes())?;
            files.push(TRAJECTORY.to_string());
        }
    }
    if cfg.output.wants(Format::Json) {
        if let Some(series) = &series {
            write_atomic(dir, SERIES, &json(series))?;
            files.push(SERIES.to_string());
        }
        let report = Report {
            space: &prepared.space,
            identities: &prepared.identities,
            compatibility: &prepared.compatibility,
            flow_residual: art.flow_residual.as_ref(),
            mrf_residual: art.mrf_residual.as_ref(),
            monotonicity: art.monotonicity.as_ref(),
        };
        write_atomic(dir, REPORT, &json(&report))?;
        files.push(REPORT.to_string());
    }
    let singular_time = art.trajectory.as_ref().and_then(|t| t.singular_time);
    let (status, error, exit_code) = match (&art.failure, singular_time) {
        (Some((e, code)), _) => (RunStatus::Failed, Some(e.clone()), *code),
        (None, Some(_)) => (RunStatus::Singular, None, 0),
        (None, None) => (RunStatus::Completed, None, 0),
    };
    let manifest = RunManifest {
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        grid: Grid {
            n_cells: cfg.solver.n_cells,
            dr: fd::spacing(cfg.solver.n_cells + 1),
            snapshots: series.as_ref().map_or(0, |s| s.times.len()),
            steps: art.trajectory.as_ref().map_or(0, |t| t.steps),
        },
        status,
        singular_time,
        error,
        exit_code,
        files,
        summary: summary(art, series.as_ref()),
        notes: art.notes.clone(),
    };
    write_atomic(dir, MANIFEST, &json(&manifest))?;
    Ok(manifest)
}

/// Executes the pipeline and writes its artifacts into `dir`.
pub fn run(prepared: &Prepared, dir: &Path) -> Result<RunManifest, RunError> {
    write_run(prepared, &execute(prepared), dir)
}
