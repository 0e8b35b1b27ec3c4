//! Command-line front end.
//!
//! Every command reads a [`RunConfig`], applies command-line overrides, writes
//! its artifacts under `output_dir` and returns a [`Report`] with the text to
//! print and the files written. Exit codes: 0 on success, 1 when a hypothesis
//! or precondition fails, 2 for bad input, I/O or numerical failure.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::bifurcation::{geometric_omega_grid, lambda_sweep, omega_scan, regime_table};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::flow::{sequence_trend, simulate_impulsive, Fate};
use crate::output::{fmt_real, CsvWriter};
use crate::periodic::{find_periodic_orbits, write_orbits_csv, TREND_FLOOR};
use crate::vectorfield::{CheckStatus, EQUILIBRIUM_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    /// A hypothesis or precondition of the analysis does not hold.
    Failed,
    /// Bad input, I/O or numerical failure.
    Error,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Success => 0,
            Status::Failed => 1,
            Status::Error => 2,
        }
    }
}

/// Exit status for an error.
pub fn error_status(e: &Error) -> Status {
    match e {
        Error::Hypothesis(_) | Error::Precondition(_) | Error::NotFixedPoint { .. } => Status::Failed,
        _ => Status::Error,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub status: Status,
    pub text: String,
    pub files: Vec<PathBuf>,
}

impl Report {
    fn ok(text: String, files: Vec<PathBuf>) -> Self {
        Self { status: Status::Success, text, files }
    }
}

#[derive(Debug, Parser)]
#[command(name = "stroboscope", version, about = "Periodic solutions of scalar ODEs with periodic multiplicative pulses")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Overrides {
    /// Run configuration (TOML).
    #[arg(short, long)]
    pub config: PathBuf,
    /// Pulse period, replacing `omega` from the config.
    #[arg(long, allow_negative_numbers = true)]
    pub omega: Option<f64>,
    /// Pulse strength, replacing `lambda` from the config.
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// Grid density for rmap/gmap.
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Directory for written artifacts.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

impl Overrides {
    pub fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::from_path(&self.config)?;
        if let Some(w) = self.omega {
            cfg.omega = w;
        }
        if self.lambda.is_some() {
            cfg.lambda = self.lambda;
        }
        if let Some(n) = self.grid_points {
            cfg.grid_points = n;
        }
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        let text = cfg.to_toml_string();
        RunConfig::from_toml_str(&text).map_err(|e| match e {
            Error::Config { message, .. } => Error::Config { path: self.config.clone(), message },
            e => e,
        })
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the hypotheses on h and the shape of R_omega.
    Validate(Overrides),
    /// Tabulate R_omega, R_omega', g and g' on a uniform grid.
    Rmap(Overrides),
    /// Same grid as rmap, written to gmap.csv.
    Gmap(Overrides),
    /// Periodic solutions for one pulse strength.
    Periodic(Overrides),
    /// Periodic solutions over a uniform grid of pulse strengths.
    Sweep {
        #[command(flatten)]
        common: Overrides,
        #[arg(long, allow_negative_numbers = true)]
        lambda_min: f64,
        #[arg(long, allow_negative_numbers = true)]
        lambda_max: f64,
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
    /// Orbit structure between consecutive critical pulse strengths.
    Regimes(Overrides),
    /// Simulate one pulsed trajectory.
    Simulate {
        #[command(flatten)]
        common: Overrides,
        #[arg(long)]
        x0: f64,
        #[arg(long, default_value_t = 50)]
        pulses: usize,
    },
    /// Follow a periodic solution as omega shrinks.
    OmegaScan {
        #[command(flatten)]
        common: Overrides,
        /// Seed near the tracked orbit at the config's omega; snapped to the
        /// nearest nontrivial orbit.
        #[arg(long)]
        x_ref: f64,
        #[arg(long, default_value_t = 0.9)]
        ratio: f64,
        #[arg(long, default_value_t = 1e-3)]
        min_factor: f64,
    },
}

fn create(dir: &Path, name: &str) -> Result<(BufWriter<File>, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    Ok((BufWriter::new(File::create(&path)?), path))
}

fn require_lambda(cfg: &RunConfig) -> Result<f64> {
    cfg.lambda
        .ok_or_else(|| Error::InvalidParameter("lambda is required (config key or --lambda)".into()))
}

/// Hypothesis report. Fails when P1 or P2 fails; shape warnings still pass.
pub fn cmd_validate(cfg: &RunConfig) -> Result<Report> {
    let vf = cfg.vector_field()?;
    let report = vf.validate_hypotheses();
    let mut text = String::new();
    for c in &report.checks {
        text.push_str(&format!("{c}\n"));
    }
    if report.passed() {
        let an = cfg.analyzer()?;
        let eqs = vf.find_equilibria(EQUILIBRIUM_TOL)?;
        match an.check_shape_hypotheses(&eqs) {
            Ok(shape) => {
                for c in &shape.checks {
                    text.push_str(&format!("{c}\n"));
                }
            }
            Err(e) if e.is_numerical() => return Err(e),
            Err(e) => text.push_str(&format!("{} P4/P5 not checked: {e}\n", CheckStatus::Warn)),
        }
    }
    text.push_str(&report.summary());
    text.push('\n');
    Ok(Report {
        status: if report.passed() { Status::Success } else { Status::Failed },
        text,
        files: Vec::new(),
    })
}

fn grid_command(cfg: &RunConfig, name: &str) -> Result<Report> {
    let an = cfg.analyzer()?;
    let (out, path) = create(&cfg.output_dir, name)?;
    an.write_grid_csv(cfg.grid_points, out)?;
    Ok(Report::ok(format!("{} rows\n", cfg.grid_points), vec![path]))
}

/// `x, R_omega, R_omega', g, g'` on `grid_points` abscissae, to `rmap.csv`.
pub fn cmd_rmap(cfg: &RunConfig) -> Result<Report> {
    grid_command(cfg, "rmap.csv")
}

/// The same table as [`cmd_rmap`], to `gmap.csv`.
pub fn cmd_gmap(cfg: &RunConfig) -> Result<Report> {
    grid_command(cfg, "gmap.csv")
}

/// Periodic solutions at the configured `lambda`, to `orbits.csv`.
pub fn cmd_periodic(cfg: &RunConfig) -> Result<Report> {
    let lambda = require_lambda(cfg)?;
    let an = cfg.analyzer()?;
    let orbits = find_periodic_orbits(&an, lambda)?;
    let (out, path) = create(&cfg.output_dir, "orbits.csv")?;
    write_orbits_csv(&orbits, out)?;
    let mut text = format!("omega = {}, lambda = {lambda}: {} periodic solution(s)\n", cfg.omega, orbits.len());
    for o in &orbits {
        text.push_str(&format!(
            "  x0 = {:<22}  {:<10}  residual = {:.2e}{}\n",
            fmt_real(o.x0),
            o.stability.label(),
            o.residual,
            if o.near_boundary { "  (near x_max)" } else { "" }
        ));
    }
    Ok(Report::ok(text, vec![path]))
}

/// Orbit sets over `points` values in `[lambda_min, lambda_max]`, to `sweep.csv`.
pub fn cmd_sweep(cfg: &RunConfig, lambda_min: f64, lambda_max: f64, points: usize) -> Result<Report> {
    let an = cfg.analyzer()?;
    let diagram = lambda_sweep(&an, lambda_min, lambda_max, points)?;
    let (out, path) = create(&cfg.output_dir, "sweep.csv")?;
    diagram.write_csv(out)?;
    let text = format!(
        "{} lambda values, {} orbit points, {} branches\n",
        diagram.lambdas.len(),
        diagram.points().count(),
        diagram.branches().len()
    );
    Ok(Report::ok(text, vec![path]))
}

/// Regime table, to `regimes.csv` and `regimes.txt`.
pub fn cmd_regimes(cfg: &RunConfig) -> Result<Report> {
    let vf = cfg.vector_field()?;
    let an = cfg.analyzer()?;
    let eqs = vf.find_equilibria(EQUILIBRIUM_TOL)?;
    let table = regime_table(&an, &eqs)?;
    let (csv, csv_path) = create(&cfg.output_dir, "regimes.csv")?;
    table.write_csv(csv)?;
    let text = table.to_text();
    let (mut txt, txt_path) = create(&cfg.output_dir, "regimes.txt")?;
    txt.write_all(text.as_bytes())?;
    txt.flush()?;
    Ok(Report::ok(text, vec![csv_path, txt_path]))
}

/// One pulsed trajectory: every integrator sample to `trajectory.csv`, the
/// post-jump values to `pulses.csv`.
pub fn cmd_simulate(cfg: &RunConfig, x0: f64, pulses: usize) -> Result<Report> {
    let lambda = require_lambda(cfg)?;
    let vf = cfg.vector_field()?;
    let traj = simulate_impulsive(&vf, cfg.omega, lambda, x0, pulses, &cfg.integrator)?;
    let (out, traj_path) = create(&cfg.output_dir, "trajectory.csv")?;
    traj.write_csv(out)?;

    let (out, pulse_path) = create(&cfg.output_dir, "pulses.csv")?;
    let mut w = CsvWriter::new(out, &["k", "t", "x"])?;
    w.row(&["0".into(), fmt_real(0.0), fmt_real(x0)])?;
    for (k, j) in traj.jumps.iter().enumerate() {
        w.row(&[(k + 1).to_string(), fmt_real(j.t_k), fmt_real(j.x_after)])?;
    }
    w.finish()?;

    let values = traj.pulse_values();
    let trend = sequence_trend(x0, &values, TREND_FLOOR);
    let mut text = format!("{} pulse(s), sequence {:?}", values.len(), trend).to_lowercase();
    if let Some(last) = values.last() {
        text.push_str(&format!(", last value {}", fmt_real(*last)));
    }
    if traj.fate == Fate::EscapedDomain {
        text.push_str(&format!(", left [0, {}]", vf.x_max()));
    }
    text.push('\n');
    Ok(Report::ok(text, vec![traj_path, pulse_path]))
}

/// Follow the orbit nearest `x_ref` along a geometric omega grid, to
/// `omega_scan.csv`.
pub fn cmd_omega_scan(cfg: &RunConfig, x_ref: f64, ratio: f64, min_factor: f64) -> Result<Report> {
    let lambda = require_lambda(cfg)?;
    if lambda == 0.0 {
        return Err(Error::Precondition("omega scan requires lambda != 0".into()));
    }
    let vf = cfg.vector_field()?;
    let an = cfg.analyzer()?;
    let seed = find_periodic_orbits(&an, lambda)?
        .into_iter()
        .filter(|o| o.x0 > 0.0)
        .min_by(|a, b| (a.x0 - x_ref).abs().total_cmp(&(b.x0 - x_ref).abs()))
        .ok_or_else(|| {
            Error::Precondition(format!("no nontrivial periodic solution at omega = {}, lambda = {lambda}", cfg.omega))
        })?;
    let grid = geometric_omega_grid(cfg.omega, ratio, min_factor)?;
    let report = omega_scan(&vf, lambda, seed.x0, &grid, &cfg.integrator)?;
    let (out, path) = create(&cfg.output_dir, "omega_scan.csv")?;
    report.write_csv(out)?;

    let mut text = format!("tracking x0 = {} ({}) from omega = {}\n", fmt_real(seed.x0), seed.stability, cfg.omega);
    match (report.omega_lost, report.fate) {
        (Some(w), Some(f)) => text.push_str(&format!(
            "orbit lost at omega = {w}; fate after {} pulses: {f} (last value {})\n",
            report.fate_pulses,
            fmt_real(report.fate_final_value.unwrap_or(f64::NAN))
        )),
        _ => text.push_str("orbit persists over the whole grid\n"),
    }
    if report.reappeared {
        text.push_str("warning: orbit reappeared at a smaller omega\n");
    }
    Ok(Report::ok(text, vec![path]))
}

/// Run a parsed command.
pub fn execute(command: &Command) -> Result<Report> {
    match command {
        Command::Validate(o) => cmd_validate(&o.load()?),
        Command::Rmap(o) => cmd_rmap(&o.load()?),
        Command::Gmap(o) => cmd_gmap(&o.load()?),
        Command::Periodic(o) => cmd_periodic(&o.load()?),
        Command::Sweep { common, lambda_min, lambda_max, points } => {
            cmd_sweep(&common.load()?, *lambda_min, *lambda_max, *points)
        }
        Command::Regimes(o) => cmd_regimes(&o.load()?),
        Command::Simulate { common, x0, pulses } => cmd_simulate(&common.load()?, *x0, *pulses),
        Command::OmegaScan { common, x_ref, ratio, min_factor } => {
            cmd_omega_scan(&common.load()?, *x_ref, *ratio, *min_factor)
        }
    }
}

/// Parse `std::env::args`, run, print, and map the outcome to an exit code.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let status = match execute(&cli.command) {
        Ok(report) => {
            // a closed stdout (e.g. piped into `head`) must not turn success into a panic
            let mut out = std::io::stdout().lock();
            let _ = out.write_all(report.text.as_bytes());
            for f in &report.files {
                let _ = writeln!(out, "wrote {}", f.display());
            }
            report.status
        }
        Err(e) => {
            eprintln!("error: {e}");
            error_status(&e)
        }
    };
    ExitCode::from(status.code())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;

    fn in_tmp(mut cfg: RunConfig, dir: &tempfile::TempDir) -> RunConfig {
        cfg.output_dir = dir.path().to_path_buf();
        cfg
    }

    #[test]
    fn validate_cubic() {
        let r = cmd_validate(&reference::cubic()).unwrap();
        assert_eq!(r.status, Status::Success);
        assert!(r.text.contains("P1 ok (A=-2), P2 ok (k=3)"), "{}", r.text);
    }

    #[test]
    fn validate_failures() {
        let mut c = reference::cubic();
        c.coeffs[0] = 0.5;
        assert_eq!(cmd_validate(&c).unwrap().status, Status::Failed);
        // x (x - 1) ends on an unstable equilibrium
        let mut c = reference::cubic();
        c.coeffs = vec![0.0, -1.0, 1.0];
        assert_eq!(cmd_validate(&c).unwrap().status, Status::Failed);
    }

    #[test]
    fn periodic_cubic_rows() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = in_tmp(reference::cubic(), &dir);
        c.lambda = Some(0.0);
        let r = cmd_periodic(&c).unwrap();
        let csv = std::fs::read_to_string(&r.files[0]).unwrap();
        assert_eq!(csv.lines().count(), 4, "{csv}");
        c.lambda = Some(10.0);
        cmd_periodic(&c).unwrap();
        let csv = std::fs::read_to_string(&r.files[0]).unwrap();
        let rows: Vec<&str> = csv.lines().skip(1).collect();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].contains(",unstable,"));
        c.lambda = Some(-1.0);
        assert_eq!(error_status(&cmd_periodic(&c).unwrap_err()), Status::Error);
    }

    #[test]
    fn rmap_linear_closed_form() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = in_tmp(reference::linear(), &dir);
        c.grid_points = 101;
        let r = cmd_rmap(&c).unwrap();
        let csv = std::fs::read_to_string(&r.files[0]).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x,r_omega,r_omega_prime,g,g_prime");
        assert_eq!(lines.len(), 102);
        let k = (-2.0f64).exp();
        for l in &lines[1..] {
            let f: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
            assert!((f[1] - k * f[0]).abs() <= 1e-9 * (k * f[0]).max(1e-12), "{l}");
        }
    }

    #[test]
    fn simulate_and_scan_preconditions() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = in_tmp(reference::cubic(), &dir);
        c.lambda = Some(0.0);
        let r = cmd_simulate(&c, 1.5, 50).unwrap();
        assert!(r.text.contains("increasing"), "{}", r.text);
        let err = cmd_omega_scan(&c, 1.5, 0.9, 1e-3).unwrap_err();
        assert_eq!(error_status(&err), Status::Failed);
        c.lambda = None;
        assert_eq!(error_status(&cmd_simulate(&c, 1.5, 5).unwrap_err()), Status::Error);
    }

    #[test]
    fn regimes_need_negative_a() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = in_tmp(reference::cubic(), &dir);
        c.coeffs = vec![0.0, 1.0, -1.0];
        c.x_max = 3.0;
        assert_eq!(error_status(&cmd_regimes(&c).unwrap_err()), Status::Failed);
    }
}
