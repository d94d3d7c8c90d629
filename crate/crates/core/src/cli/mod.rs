//! The `pjoyce` command line: argument parsing, job resolution, parallel execution and reports.

pub mod config;
pub mod json;
pub mod sample;
pub mod suite;
pub mod tasks;

use crate::isomonodromy::{FlowId, Normalization};
use crate::numerics::C;
use crate::spectral::{Backend, Family};
use crate::{Error, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use config::{parse_complex, resolve, ConfigFile, JobConfig, Overrides};
use rayon::prelude::*;
use serde_json::{json, Value};
use std::ffi::OsString;
use std::path::PathBuf;
use tasks::Task;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

const TRAJECTORY_COLUMNS: &str = "CSV columns (--csv): t_re,t_im,H_re,H_im,q_re,q_im,p_re,p_im,r_re,r_im,s_re,s_im,chart\n\
chart is 0 on the direct chart, 1 inside a pole detour, 2 inside a zero-of-q detour (PIII3).\n\
With more than one grid point, point i is written to <stem>-<i>.<ext>.";

const TAU_COLUMNS: &str = "CSV columns (--csv): t_re,t_im,h_re,h_im,log_tau_re,log_tau_im,chart\n\
chart as for `flow`. With more than one grid point, point i is written to <stem>-<i>.<ext>.";

const ABOUT: &str = "Joyce structures on the Painleve I, II and III3 isomonodromy families";

const AFTER: &str = "Exit status: 0 when every record passes, 1 when an identity fails, 2 on configuration errors.\n\
PJOYCE_THREADS sets the worker count when neither --threads nor the config file does.";

#[derive(Debug, Parser)]
#[command(name = "pjoyce", version, about = ABOUT, after_help = AFTER)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the invariant suite on seeded random samples (all families unless --family is given)
    Check(Common),
    /// Periods of omega and beta, z-coordinates and the bilinear pairing at each base point
    Periods(Common),
    /// Theta coordinates of a fiber point from both backends, with the inverse round trip
    Theta(Common),
    /// Plebanski function W, third theta-derivatives of K and the heavenly residual
    Pleb(Common),
    /// Integrate an isomonodromic flow along --span
    #[command(after_help = TRAJECTORY_COLUMNS)]
    Flow(Common),
    /// log tau along the w1 flow on the r = 0 Lagrangian, with zeros matched to poles
    #[command(after_help = TAU_COLUMNS)]
    Tau(Common),
    /// Locate the movable poles of q along the w1 flow and fit their Laurent data
    PoleScan(Common),
    /// Run one task over the whole base-point grid of a config file
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Task evaluated at every grid point
    #[arg(long, value_enum)]
    task: Task,
    #[command(flatten)]
    common: Common,
}

fn complex_arg(s: &str) -> std::result::Result<C, String> {
    parse_complex(s).map_err(|e| e.to_string())
}

fn family_arg(s: &str) -> std::result::Result<Family, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn flow_arg(s: &str) -> std::result::Result<FlowId, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn backend_arg(s: &str) -> std::result::Result<Backend, String> {
    match s.to_ascii_lowercase().as_str() {
        "elliptic" => Ok(Backend::Elliptic),
        "quadrature" => Ok(Backend::Quadrature),
        other => Err(format!("unknown backend '{other}' (elliptic or quadrature)")),
    }
}

fn norm_arg(s: &str) -> std::result::Result<Normalization, String> {
    match s.to_ascii_lowercase().as_str() {
        "conserving" => Ok(Normalization::Conserving),
        "painleve" => Ok(Normalization::Painleve),
        other => Err(format!("unknown normalization '{other}' (conserving or painleve)")),
    }
}

fn sheet_arg(s: &str) -> std::result::Result<f64, String> {
    match s {
        "1" | "+1" | "+" => Ok(1.0),
        "-1" | "-" => Ok(-1.0),
        other => Err(format!("sheet must be +1 or -1, got '{other}'")),
    }
}

/// Flags shared by every subcommand. Complex values are written like 1, -0.5i or 1+2i.
#[derive(Debug, Clone, Args)]
struct Common {
    /// TOML job file; flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    /// pi, pii or piii3
    #[arg(long, value_parser = family_arg)]
    family: Option<Family>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (falls back to PJOYCE_THREADS, then all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Random samples per identity for `check`
    #[arg(long)]
    points: Option<usize>,
    /// Twistor parameter epsilon for flows and pole scans
    #[arg(long, value_parser = complex_arg, allow_hyphen_values = true)]
    eps: Option<C>,
    /// elliptic or quadrature
    #[arg(long, value_parser = backend_arg)]
    backend: Option<Backend>,
    #[arg(long, value_parser = complex_arg, allow_hyphen_values = true)]
    t: Option<C>,
    /// Base coordinate H
    #[arg(long, value_parser = complex_arg, allow_hyphen_values = true)]
    h: Option<C>,
    /// PII monodromy parameter
    #[arg(long, value_parser = complex_arg, allow_hyphen_values = true)]
    alpha: Option<C>,
    #[arg(long, value_parser = complex_arg, allow_hyphen_values = true)]
    q: Option<C>,
    /// Sheet of p: +1 or -1
    #[arg(long, value_parser = sheet_arg, allow_hyphen_values = true)]
    sheet: Option<f64>,
    #[arg(long, value_parser = complex_arg, allow_hyphen_values = true)]
    r: Option<C>,
    #[arg(long, value_parser = complex_arg, allow_hyphen_values = true)]
    s: Option<C>,
    /// w1, w2 or w3 (w3 for PII only)
    #[arg(long, value_parser = flow_arg)]
    flow: Option<FlowId>,
    /// conserving or painleve
    #[arg(long, value_parser = norm_arg)]
    norm: Option<Normalization>,
    /// Flow path vertices separated by colons, e.g. 0:6 or 1:2+0.5i:5
    #[arg(long, allow_hyphen_values = true)]
    span: Option<String>,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write per-sample rows of flow and tau runs here
    #[arg(long)]
    csv: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            family: self.family,
            seed: self.seed,
            threads: self.threads,
            points: self.points,
            epsilon: self.eps,
            backend: self.backend,
            t: self.t,
            h: self.h,
            alpha: self.alpha,
            q: self.q,
            sheet: self.sheet,
            r: self.r,
            s: self.s,
            flow: self.flow,
            normalization: self.norm,
            span: self.span.clone(),
            report: self.out.clone(),
            csv: self.csv.clone(),
        }
    }

    fn job(&self, needs_grid: bool) -> Result<JobConfig> {
        let file = match &self.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        resolve(file, self.overrides(), needs_grid)
    }
}

fn check_report(job: &JobConfig) -> (Value, bool) {
    let families = match job.family {
        Some(f) => vec![f],
        None => vec![Family::PIII3, Family::PII, Family::PI],
    };
    let records = suite::run_checks(job, &families);
    let pass = records.iter().all(|r| r.pass);
    let v = json!({
        "command": "check",
        "seed": job.seed,
        "points": job.points,
        "records": records,
    });
    (v, pass)
}

fn task_report(command: &str, task: Task, job: &JobConfig) -> (Value, bool) {
    let outcomes: Vec<tasks::Outcome> = job.grid.par_iter().map(|gp| tasks::run_task(task, job, gp)).collect();
    let pass = outcomes.iter().all(|o| o.pass);
    let mut v = json!({
        "command": command,
        "family": job.family,
        "records": outcomes.into_iter().map(|o| o.value).collect::<Vec<_>>(),
    });
    if command == "sweep" {
        v["task"] = json!(task.name());
    }
    (v, pass)
}

fn execute(command: Command) -> Result<(Value, bool, JobConfig)> {
    let (name, task, common) = match command {
        Command::Check(c) => {
            let job = c.job(false)?;
            let (v, pass) = in_pool(&job, || check_report(&job))?;
            return Ok((v, pass, job));
        }
        Command::Periods(c) => ("periods", Task::Periods, c),
        Command::Theta(c) => ("theta", Task::Theta, c),
        Command::Pleb(c) => ("pleb", Task::Pleb, c),
        Command::Flow(c) => ("flow", Task::Flow, c),
        Command::Tau(c) => ("tau", Task::Tau, c),
        Command::PoleScan(c) => ("pole-scan", Task::PoleScan, c),
        Command::Sweep(s) => ("sweep", s.task, s.common),
    };
    let job = common.job(true)?;
    tasks::validate(task, &job)?;
    let (v, pass) = in_pool(&job, || task_report(name, task, &job))?;
    Ok((v, pass, job))
}

fn in_pool<T: Send>(job: &JobConfig, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(job.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Parse `args` (program name first), run the command and return the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => EXIT_OK,
                _ => EXIT_CONFIG,
            };
        }
    };
    let (mut report, pass, job) = match execute(cli.command) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    report["schema"] = json!(json::SCHEMA);
    report["pass"] = json!(pass);
    let text = json::render(&report);
    match &job.report {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &text) {
                eprintln!("error: {}: {e}", path.display());
                return EXIT_CONFIG;
            }
        }
        None => print!("{text}"),
    }
    if pass {
        EXIT_OK
    } else {
        EXIT_FAILED
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_with_config_status() {
        assert_eq!(run(["pjoyce", "periods", "--family", "pv"]), EXIT_CONFIG);
        assert_eq!(run(["pjoyce", "frobnicate"]), EXIT_CONFIG);
        assert_eq!(run(["pjoyce", "flow", "--family", "pii"]), EXIT_CONFIG);
    }
}
