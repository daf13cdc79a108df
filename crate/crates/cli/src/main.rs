use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use flux_thermo::scenario::{self, ScenarioConfig, VerifyOptions};
use flux_thermo::Error;

/// Kinetic and hydrodynamic scenarios, reductions and invariant checks.
#[derive(Debug, Parser)]
#[command(name = "flux-thermo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write diagnostics, snapshots and a summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output.dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Static MaxEnt reduction or flux closure.
    Reduce {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the invariant checks and print a JSON report.
    Verify {
        /// Optional config; only its seed is used.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write the report to `DIR/verify.json`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma separated check names; an empty list runs nothing.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        checks: Option<Vec<String>>,
    },
}

const USAGE: u8 = 1;
const NUMERICAL: u8 = 2;
const CHECK_FAILED: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Io(_) | Error::Json(_) => USAGE,
        _ => NUMERICAL,
    }
}

fn load(path: &Path, seed: Option<u64>) -> Result<ScenarioConfig, Error> {
    let mut cfg = ScenarioConfig::load(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    if seed.is_some() {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(cfg: &ScenarioConfig, out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| cfg.output.as_ref().and_then(|o| o.dir.clone()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn print_json(v: &impl serde::Serialize) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(v)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn execute(command: Command) -> Result<u8, (u8, anyhow::Error)> {
    let fail = |e: Error| (exit_code(&e), anyhow::Error::new(e));
    let io = |e: anyhow::Error| (USAGE, e);
    match command {
        Command::Run { config, out, seed } => {
            let cfg = load(&config, seed).map_err(fail)?;
            let dir = out_dir(&cfg, out);
            let outcome = scenario::run(&cfg, &dir).map_err(|e| {
                let dumped = matches!(e, Error::NonFinite { .. });
                let code = exit_code(&e);
                let mut err = anyhow::Error::new(e);
                if dumped {
                    err = err.context(format!("last finite state written to {}", dir.join("last_good.csv").display()));
                }
                (code, err)
            })?;
            print_json(&outcome.summary).map_err(io)?;
            Ok(0)
        }
        Command::Reduce { config, out, seed } => {
            let cfg = load(&config, seed).map_err(fail)?;
            let dir = out_dir(&cfg, out);
            let outcome = scenario::reduce(&cfg, &dir).map_err(fail)?;
            print_json(&outcome.summary).map_err(io)?;
            Ok(0)
        }
        Command::Verify {
            config,
            out,
            seed,
            checks,
        } => {
            let cfg_seed = match &config {
                Some(p) => load(p, None).map_err(fail)?.seed,
                None => None,
            };
            let options = VerifyOptions {
                seed: seed.or(cfg_seed).unwrap_or(0),
                checks: checks.map(|v| v.into_iter().filter(|c| !c.trim().is_empty()).collect()),
                mutation: None,
            };
            let report = scenario::verify(&options).map_err(fail)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| io(e.into()))?;
                let text = serde_json::to_string_pretty(&report).map_err(|e| io(e.into()))?;
                std::fs::write(dir.join("verify.json"), text).map_err(|e| io(e.into()))?;
            }
            print_json(&report).map_err(io)?;
            if report.passed {
                Ok(0)
            } else {
                eprintln!("failed checks: {}", report.failures.join(", "));
                Ok(CHECK_FAILED)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err((code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
