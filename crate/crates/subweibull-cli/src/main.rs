//! `subweibull` command-line front end.

mod commands;
mod config;
mod report;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Params;
use report::{render, Report};

#[derive(Parser)]
#[command(name = "subweibull", version = report::VERSION, about = "Sub-Weibull generalization and divergence toolkit")]
struct Cli {
    /// JSON config file; command-line flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Constants bundle for (θ, α)
    Constants(Params),
    /// Maximal-inequality sandwich and single-scale generalization bound over n
    Bounds(Params),
    /// Perturbed-minimiser benchmark table on the circle
    CircleTable(Params),
    /// Mean-estimation or Goodhart-selector demo
    Genbounds(Params),
    /// Divergence-budgeted reward maximisation
    Align(Params),
    /// SGLD generalization gaps and bounds on heavy-tailed regression
    Sgld(Params),
    /// Runs the invariant suite
    Selftest(Params),
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(subweibull::Error),
    Io(String),
    Failed(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 2,
            CliError::Lib(subweibull::Error::Domain { .. }) => 2,
            CliError::Lib(_) | CliError::Failed(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Failed(m) => f.write_str(m),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<subweibull::Error> for CliError {
    fn from(e: subweibull::Error) -> Self {
        CliError::Lib(e)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, flags) = match &cli.cmd {
        Cmd::Constants(p) => ("constants", p),
        Cmd::Bounds(p) => ("bounds", p),
        Cmd::CircleTable(p) => ("circle-table", p),
        Cmd::Genbounds(p) => ("genbounds", p),
        Cmd::Align(p) => ("align", p),
        Cmd::Sgld(p) => ("sgld", p),
        Cmd::Selftest(p) => ("selftest", p),
    };
    let file = match &cli.config {
        Some(path) => config::load(path, name)?,
        None => Params::default(),
    };
    let params = flags.over(&file);
    let mut failed = None;
    let rep = match &cli.cmd {
        Cmd::Constants(_) => commands::constants_cmd(&params)?,
        Cmd::Bounds(_) => commands::bounds_cmd(&params)?,
        Cmd::CircleTable(_) => commands::circle_cmd(&params)?,
        Cmd::Genbounds(_) => commands::genbounds_cmd(&params)?,
        Cmd::Align(_) => commands::align_cmd(&params)?,
        Cmd::Sgld(_) => commands::sgld_cmd(&params)?,
        Cmd::Selftest(_) => {
            params.restrict("selftest", &[])?;
            let (t, ok) = selftest::run();
            if !ok {
                failed = Some(CliError::Failed("selftest: at least one check failed".into()));
            }
            Report::Table(t)
        }
    };
    let echo = serde_json::to_value(&params).map_err(|e| CliError::Io(e.to_string()))?;
    let text = render(&rep, params.format, name, &echo)?;
    match &params.output {
        Some(path) => std::fs::write(path, &text).map_err(|e| CliError::Io(format!("output {path}: {e}")))?,
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
        }
    }
    failed.map_or(Ok(()), Err)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
