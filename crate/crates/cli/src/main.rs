use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Parser, Subcommand};
use symflow_cli::{export_plotdata, load_config, run, ConfigError, RunStatus};

/// Invariant Ricci flow with boundary on [0, 1] x G/H.
///
/// Exit codes: 0 success (including runs that stop at a singular time),
/// 1 I/O failure, 2 config error, 3 incompatible initial data,
/// 4 numerical failure.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the flow and write trajectory, reports and manifest.
    Run {
        /// Config file; omit when using --sweep.
        #[arg(required_unless_present = "sweep", conflicts_with = "sweep")]
        config: Option<PathBuf>,
        /// Run directory, or the parent of per-config directories with --sweep.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run every config matching this glob, in parallel. Each run goes
        /// to <out>/<config stem>. SYMFLOW_THREADS caps the worker count.
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Validate a config: schema, structure constants and compatibility.
    Check { config: PathBuf },
    /// Write gnuplot column files under <run-dir>/plot.
    Export { run_dir: PathBuf },
}

fn config_failure(path: &Path, e: &ConfigError) -> i32 {
    eprintln!("{}: {e}", path.display());
    match e {
        ConfigError::Io { .. } => 1,
        _ => e.exit_code(),
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned())
}

fn run_one(path: &Path, out: Option<&Path>) -> i32 {
    let prepared = match load_config(path) {
        Ok(p) => p,
        Err(e) => return config_failure(path, &e),
    };
    let dir = match (out, &prepared.config.output.dir) {
        (Some(d), _) => d.to_path_buf(),
        (None, Some(d)) => path.parent().unwrap_or(Path::new(".")).join(d),
        (None, None) => Path::new("runs").join(stem(path)),
    };
    match run(&prepared, &dir) {
        Ok(m) => {
            match m.status {
                RunStatus::Completed => eprintln!("{}: completed, {} snapshots in {}", path.display(), m.grid.snapshots, dir.display()),
                RunStatus::Singular => eprintln!(
                    "{}: singular at t = {:.6}, trajectory in {}",
                    path.display(),
                    m.singular_time.unwrap_or(f64::NAN),
                    dir.display()
                ),
                RunStatus::Failed => eprintln!("{}: failed: {}", path.display(), m.error.as_deref().unwrap_or("unknown error")),
            }
            m.exit_code
        }
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            1
        }
    }
}

fn worker_count(jobs: usize) -> usize {
    let cap = std::env::var("SYMFLOW_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    cap.min(jobs).max(1)
}

fn sweep(pattern: &str, out: Option<&Path>) -> i32 {
    let paths: Vec<PathBuf> = match glob::glob(pattern) {
        Ok(paths) => paths.filter_map(Result::ok).filter(|p| p.is_file()).collect(),
        Err(e) => {
            eprintln!("invalid sweep pattern `{pattern}`: {e}");
            return 2;
        }
    };
    if paths.is_empty() {
        eprintln!("no config matches `{pattern}`");
        return 2;
    }
    let base = out.unwrap_or(Path::new("runs"));
    let next = AtomicUsize::new(0);
    let worst = Mutex::new(0);
    std::thread::scope(|scope| {
        for _ in 0..worker_count(paths.len()) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(path) = paths.get(k) else { break };
                let code = run_one(path, Some(&base.join(stem(path))));
                let mut w = worst.lock().expect("no worker panics while holding the lock");
                *w = (*w).max(code);
            });
        }
    });
    worst.into_inner().expect("workers have finished")
}

fn check(path: &Path) -> i32 {
    match load_config(path) {
        Ok(p) => {
            println!("space {}: n = {}, d = {:?}, beta = {:?}", p.space.label, p.space.n(), p.space.d, p.space.beta);
            println!("identities: max residual {:.3e}", p.identities.max_residual);
            println!("compatibility: {}", p.compatibility);
            0
        }
        Err(e) => {
            if let ConfigError::IncompatibleData(report) = &e {
                for (j, side) in report.residuals.iter().enumerate() {
                    for (i, v) in side.iter().enumerate() {
                        println!("residual j={j} i={}: {v:.3e}", i + 1);
                    }
                }
            }
            config_failure(path, &e)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config: Some(path), out, .. } => run_one(&path, out.as_deref()),
        Command::Run { config: None, out, sweep: Some(pattern) } => sweep(&pattern, out.as_deref()),
        Command::Run { .. } => unreachable!("clap requires a config or --sweep"),
        Command::Check { config } => check(&config),
        Command::Export { run_dir } => match export_plotdata(&run_dir) {
            Ok(files) => {
                for f in files {
                    println!("{}", f.display());
                }
                0
            }
            Err(e) => {
                eprintln!("{e}");
                2
            }
        },
    };
    ExitCode::from(code as u8)
}
