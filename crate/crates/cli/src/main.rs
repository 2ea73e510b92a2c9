//! Command-line front end for the weak-measurement tilt simulator.
//!
//! Subcommands cover the full workflow: `simulate` produces channel
//! traces for one acquisition, `fit` extracts per-pulse Gaussians from a
//! saved trace, `sweep` runs the two-technique comparison over the
//! offset grids, `report` summarizes a sweep table, and `selftest` runs
//! the built-in consistency checks.
//!
//! Exit codes: 0 on success, 1 for usage or configuration errors, 2 for
//! runtime failures.

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use std::fs;
use std::path::{Path, PathBuf};
use wvsim_core::config::{ConfigError, ConfigFile};
use wvsim_core::estimator::fit_gaussian;
use wvsim_core::harness::{
    detect_well_behaved_interval, read_rows_csv, report, run_sweep, write_rows_csv, HarnessError,
    SweepConfig,
};
use wvsim_core::instrument::{generate_pulse_train, slice_pulses, Channel};
use wvsim_core::io::{load_trace, save_trace, write_fits_csv};
use wvsim_core::selftest::{all_passed, run_selftest};
use wvsim_core::signal::{postselection_probability, predicted_time_shift, Technique, TiltState};
use wvsim_core::svg::sweep_plot_svg;

#[derive(Parser)]
#[command(
    name = "wvsim",
    version,
    about = "Weak-measurement Sagnac tilt simulator: dark-port vs almost-balanced readout"
)]
struct Cli {
    /// TOML configuration file (omit for the benchmark defaults).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the master seed from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one acquisition and write its channel traces.
    Simulate {
        /// Readout technique: "abwv" or "wva".
        #[arg(long, default_value = "abwv")]
        mode: String,
        /// Tilt offset in radians (default: 83 nrad for abwv, 4 urad for wva).
        #[arg(long)]
        phi: Option<f64>,
        /// Output directory for the traces.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Write compact binary traces instead of CSV.
        #[arg(long)]
        binary: bool,
    },
    /// Fit per-pulse Gaussians in a saved trace and tabulate them.
    Fit {
        /// Trace file written by `simulate` (.csv or .bin).
        trace: PathBuf,
        /// Write the fit table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the comparison sweep over the configured offset grids.
    Sweep {
        /// Techniques to run: "abwv", "wva", or "both".
        #[arg(long, default_value = "both")]
        mode: String,
        /// Sweep table output path.
        #[arg(long, default_value = "sweep_rows.csv")]
        out: PathBuf,
        /// Also render a log-log plot of the sweep to this SVG file.
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Print the comparison report after the sweep.
        #[arg(long)]
        report: bool,
    },
    /// Summarize a sweep table: intervals, amplification, technique contrast.
    Report {
        /// Sweep table written by `sweep`.
        rows: PathBuf,
        /// Relative velocity tolerance for the well-behaved interval
        /// (default: the configured sweep.rel_tol).
        #[arg(long)]
        rel_tol: Option<f64>,
    },
    /// Run the built-in consistency checks.
    Selftest,
}

enum AppError {
    /// Configuration or argument problem: exit code 1.
    Config(String),
    /// Failure while doing the work: exit code 2.
    Runtime(String),
}

impl AppError {
    fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 1,
            AppError::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            AppError::Config(m) | AppError::Runtime(m) => m,
        }
    }
}

impl From<ConfigError> for AppError {
    fn from(e: ConfigError) -> Self {
        AppError::Config(e.to_string())
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {}", e.message());
        std::process::exit(e.exit_code());
    }
}

fn load_config(path: &Option<PathBuf>, seed: Option<u64>) -> Result<ConfigFile, AppError> {
    let mut cfg = match path {
        Some(p) => ConfigFile::load(p)
            .map_err(|e| AppError::Config(format!("{}: {e}", p.display())))?,
        None => ConfigFile::default(),
    };
    if let Some(s) = seed {
        cfg.sweep.seed = s;
    }
    Ok(cfg)
}

fn parse_technique(s: &str) -> Result<Technique, AppError> {
    s.parse()
        .map_err(|e: wvsim_core::signal::SignalError| AppError::Config(e.to_string()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), AppError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)
                .map_err(|e| AppError::Runtime(format!("{}: {e}", dir.display())))?;
        }
    }
    fs::write(path, bytes).map_err(|e| AppError::Runtime(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), AppError> {
    let cfg = load_config(&cli.config, cli.seed)?;
    match cli.command {
        Command::Simulate {
            mode,
            phi,
            out,
            binary,
        } => simulate(&cfg, &mode, phi, &out, binary),
        Command::Fit { trace, out } => fit(&cfg, &trace, out.as_deref()),
        Command::Sweep {
            mode,
            out,
            svg,
            report,
        } => sweep(&cfg, &mode, &out, svg.as_deref(), report),
        Command::Report { rows, rel_tol } => report_cmd(&cfg, &rows, rel_tol),
        Command::Selftest => selftest(),
    }
}

fn sweep_config(cfg: &ConfigFile) -> Result<SweepConfig, AppError> {
    Ok(cfg.to_sweep_config()?)
}

fn simulate(
    cfg: &ConfigFile,
    mode: &str,
    phi: Option<f64>,
    out: &Path,
    binary: bool,
) -> Result<(), AppError> {
    let mode = parse_technique(mode)?;
    let sweep = sweep_config(cfg)?;
    let phi = phi.unwrap_or(match mode {
        Technique::Abwv => 83e-9,
        Technique::Wva => 4e-6,
    });
    if !(phi.is_finite() && phi > 0.0) {
        return Err(AppError::Config(format!(
            "--phi must be positive, got {phi}"
        )));
    }
    let geom = sweep
        .geometry_for(mode)
        .map_err(|e| AppError::Config(e.to_string()))?;
    let mut train = sweep.train.clone();
    train.seed = sweep.seed;
    let tilt = TiltState::new(phi, sweep.drive.omega0());
    let set = generate_pulse_train(&train, &tilt, &geom, mode, &sweep.noise, &sweep.filter)
        .map_err(|e| AppError::Runtime(e.to_string()))?;
    fs::create_dir_all(out).map_err(|e| AppError::Runtime(format!("{}: {e}", out.display())))?;
    let ext = if binary { "bin" } else { "csv" };
    let mut written = Vec::new();
    for trace in set.traces() {
        let path = out.join(format!("{}.{ext}", trace.channel.name()));
        save_trace(&path, trace).map_err(|e| AppError::Runtime(format!("{}: {e}", path.display())))?;
        written.push(path);
    }
    let shift = predicted_time_shift(mode, tilt.omega0, train.envelope.tau, phi)
        .map_err(|e| AppError::Runtime(e.to_string()))?;
    println!(
        "simulated {} pulses, mode {mode}, phi = {phi:.3e} rad, omega0 = {:.3e} rad/s",
        train.n_pulses, tilt.omega0
    );
    println!("first-order envelope shift: {shift:.6e} s");
    if mode == Technique::Wva {
        println!(
            "dark-port detected fraction: {:.3e}",
            postselection_probability(phi, &geom)
        );
    }
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Channel label for a CSV trace, inferred from the file stem written by
/// `simulate`; binary traces carry their own and ignore this.
fn channel_from_stem(path: &Path) -> Channel {
    match path.file_stem().and_then(|s| s.to_str()) {
        Some("difference") => Channel::Difference,
        Some("dark") => Channel::Dark,
        Some("bright") => Channel::Bright,
        _ => Channel::Sum,
    }
}

fn fit(cfg: &ConfigFile, trace_path: &Path, out: Option<&Path>) -> Result<(), AppError> {
    let sweep = sweep_config(cfg)?;
    let trace = load_trace(trace_path, channel_from_stem(trace_path))
        .map_err(|e| AppError::Runtime(format!("{}: {e}", trace_path.display())))?;
    let period = sweep.train.period();
    let windows = slice_pulses(&trace, period).map_err(|e| AppError::Runtime(e.to_string()))?;
    let fits: Vec<_> = windows
        .iter()
        .map(|w| fit_gaussian(w, None).map_err(|e| AppError::Runtime(e.to_string())))
        .collect::<Result<_, _>>()?;
    let mut table = Vec::new();
    write_fits_csv(&mut table, &fits).map_err(|e| AppError::Runtime(e.to_string()))?;
    let converged = fits.iter().filter(|f| f.converged).count();
    eprintln!(
        "fitted {} pulse windows from {} ({} converged)",
        fits.len(),
        trace_path.display(),
        converged
    );
    match out {
        Some(path) => {
            write_file(path, &table)?;
            eprintln!("wrote {}", path.display());
        }
        None => {
            let text = String::from_utf8(table)
                .map_err(|e| AppError::Runtime(format!("fit table is not UTF-8: {e}")))?;
            print!("{text}");
        }
    }
    Ok(())
}

fn sweep(
    cfg: &ConfigFile,
    mode: &str,
    out: &Path,
    svg: Option<&Path>,
    print_report: bool,
) -> Result<(), AppError> {
    let mut sweep = sweep_config(cfg)?;
    match mode {
        "both" => {}
        other => sweep.modes = vec![parse_technique(other)?],
    }
    let rows = run_sweep(&sweep);
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    if failed == rows.len() {
        // Nothing succeeded; surface the first tag as a runtime failure.
        let tag = rows
            .first()
            .and_then(|r| r.error.clone())
            .unwrap_or_else(|| "empty sweep".to_string());
        return Err(AppError::Runtime(format!("sweep produced no data: {tag}")));
    }
    let mut buf = Vec::new();
    write_rows_csv(&mut buf, &rows).map_err(|e| AppError::Runtime(e.to_string()))?;
    write_file(out, &buf)?;
    println!(
        "swept {} points ({} failed), wrote {}",
        rows.len(),
        failed,
        out.display()
    );
    if let Some(svg_path) = svg {
        write_file(svg_path, sweep_plot_svg(&rows).as_bytes())?;
        println!("wrote {}", svg_path.display());
    }
    if print_report {
        print_report_for(&rows, cfg)?;
    }
    Ok(())
}

fn print_report_for(rows: &[wvsim_core::SweepRow], cfg: &ConfigFile) -> Result<(), AppError> {
    let sweep = sweep_config(cfg)?;
    let intervals = match detect_well_behaved_interval(rows, cfg.sweep.rel_tol) {
        Ok(iv) => iv,
        Err(HarnessError::NoValidPoints) => {
            return Err(AppError::Runtime(format!(
                "no technique tracks the applied velocity within {:.0}%",
                cfg.sweep.rel_tol * 100.0
            )))
        }
        Err(e) => return Err(AppError::Runtime(e.to_string())),
    };
    let geom = sweep
        .geometry_for(Technique::Abwv)
        .map_err(|e| AppError::Runtime(e.to_string()))?;
    print!("{}", report(rows, &intervals, &geom));
    Ok(())
}

fn report_cmd(cfg: &ConfigFile, rows_path: &Path, rel_tol: Option<f64>) -> Result<(), AppError> {
    let file = fs::File::open(rows_path)
        .map_err(|e| AppError::Runtime(format!("{}: {e}", rows_path.display())))?;
    let rows = read_rows_csv(file)
        .map_err(|e| AppError::Runtime(format!("{}: {e}", rows_path.display())))?;
    let mut cfg = cfg.clone();
    if let Some(tol) = rel_tol {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(AppError::Config(format!(
                "--rel-tol must be positive, got {tol}"
            )));
        }
        cfg.sweep.rel_tol = tol;
    }
    print_report_for(&rows, &cfg)
}

fn selftest() -> Result<(), AppError> {
    let results = run_selftest();
    for r in &results {
        let status = if r.pass { "ok  " } else { "FAIL" };
        println!("{status} {:<24} {}", r.name, r.detail);
    }
    if all_passed(&results) {
        println!("all {} checks passed", results.len());
        Ok(())
    } else {
        let failed = results.iter().filter(|r| !r.pass).count();
        Err(AppError::Runtime(format!(
            "{failed} of {} checks failed",
            results.len()
        )))
    }
}
