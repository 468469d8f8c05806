//! Argument parsing and dispatch; maps failures to exit codes.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use hjlab_core::Error;

use crate::commands::{cmd_char, cmd_classify, cmd_solve, cmd_subdiff, to_json, TraceMode};
use crate::config::RunConfig;
use crate::verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "hjlab", version, about = "Hamilton-Jacobi solutions, characteristics and subgradient tests")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Value field on a grid: u_t<t>.csv, summary.json, plot.gp.
    Solve,
    /// Characteristic from an origin: trace.json, trace.csv.
    Char {
        /// Comma-separated starting point.
        #[arg(long, allow_hyphen_values = true)]
        origin: Option<String>,
        /// generalized | stationary | classical:<p0>
        #[arg(long, allow_hyphen_values = true)]
        mode: Option<String>,
    },
    /// Proximal subdifferential estimate of the datum: subdiff.json.
    Subdiff {
        #[arg(long, allow_hyphen_values = true)]
        point: Option<String>,
    },
    /// Classification of a trace with its window probes: classification.json.
    Classify {
        #[arg(long, allow_hyphen_values = true)]
        origin: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        mode: Option<String>,
    },
    /// Acceptance criteria on one scenario or all of them.
    Verify {
        #[arg(default_value = "all")]
        scenario: String,
    },
}

fn parse_point(s: &str) -> Result<Vec<f64>, Error> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| Error::Config(format!("bad coordinate '{v}': {e}"))))
        .collect()
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Precondition(_) => EXIT_USAGE,
        Error::Inconsistency(_) | Error::TheoremViolation(_) => EXIT_VERIFY,
        Error::Domain(_)
        | Error::BoundaryExit { .. }
        | Error::Numerical(_)
        | Error::Convergence { .. }
        | Error::Shooting { .. } => EXIT_DOMAIN,
    }
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: Cli) -> Result<i32, Error> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(w) = cli.workers {
        cfg.run.workers = w;
    }
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    cfg.validate()?;
    let out = cli.out.clone().or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.workers)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Verify { scenario } => {
            let report = verify::run(&cfg, scenario, &out)?;
            print!("{}", report.table());
            if report.passed {
                Ok(EXIT_OK)
            } else {
                eprintln!("failing checks: {}", report.failing_checks().join(", "));
                Ok(EXIT_VERIFY)
            }
        }
        cmd => {
            let r = cfg.resolve()?;
            match cmd {
                Command::Solve => {
                    let s = cmd_solve(&cfg, &r, &out)?;
                    print!("{}", to_json(&s.fields));
                }
                Command::Char { origin, mode } | Command::Classify { origin, mode } => {
                    let origin = origin.as_deref().map(parse_point).transpose()?.unwrap_or_else(|| cfg.trace.origin.clone());
                    let mode = TraceMode::parse(mode.as_deref().unwrap_or(&cfg.trace.mode))?;
                    if matches!(cmd, Command::Char { .. }) {
                        let tr = cmd_char(&cfg, &r, &origin, &mode, &out)?;
                        println!("{}", serde_json::to_string(&tr.classification).expect("enum serializes"));
                    } else {
                        let rep = cmd_classify(&cfg, &r, &origin, &mode, &out)?;
                        println!("{}", serde_json::to_string(&rep.classification).expect("enum serializes"));
                    }
                }
                Command::Subdiff { point } => {
                    let point = point.as_deref().map(parse_point).transpose()?.unwrap_or_else(|| cfg.subdiff.point.clone());
                    let rep = cmd_subdiff(&cfg, &r, &point, &out)?;
                    let certs: Vec<_> = rep.probes.iter().flat_map(|p| &p.certificates).collect();
                    print!("{}", to_json(&certs));
                }
                Command::Verify { .. } => unreachable!(),
            }
            Ok(EXIT_OK)
        }
    })
}
