//! The `glider` command line.

mod args;
mod bench;
mod common;
mod cross;
mod explain;
mod global;

use std::io::{self, BufWriter};
use std::path::Path;

use clap::Parser;
use serde_json::Value;

pub use args::{
    BenchArgs, Cli, Command, CrossArgs, DetectArgs, DetectorArg, ExplainArgs, GlobalArgs, ModeArg, ModelArgs,
    PruneArg, ServeArgs, Weighting, Widths,
};

use crate::error::{Error, Result};
use crate::formats::read_json;

/// Logging goes to stderr; `MADEX_LOG` is `error`, `info` (default) or `debug`.
pub fn init_logging() {
    let env = env_logger::Env::new().filter_or("MADEX_LOG", "info");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).format_target(false).try_init();
}

/// Parses the process arguments, runs and returns the exit code.
pub fn main() -> i32 {
    init_logging();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let command = match (cli.config, cli.command) {
        (Some(path), None) => load_config(&path)?,
        (None, Some(c)) => c,
        _ => return Err(Error::Usage("a subcommand or --config is required".into())),
    };
    let jobs = match cli.jobs {
        Some(0) => return Err(Error::Usage("--jobs must be at least 1".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    run_command(&command, jobs)
}

pub fn run_command(command: &Command, jobs: usize) -> Result<()> {
    match command {
        Command::Explain(a) => explain::run(a, command, jobs),
        Command::Global(a) => global::run(a, command, jobs),
        Command::Cross(a) => cross::run(a, command, jobs),
        Command::Bench(a) => bench::run(a, command, jobs),
        Command::Serve(a) => {
            let builtin: crate::models::Builtin = a.builtin.parse().map_err(Error::Usage)?;
            let mut model = builtin.open();
            let stdin = io::stdin().lock();
            crate::serve::serve(model.as_mut(), stdin, BufWriter::new(io::stdout().lock()))
                .map_err(Error::io("<stdio>"))
        }
    }
}

/// A config file is either a bare command object or any output document
/// carrying one under `"config"`.
pub fn load_config(path: &Path) -> Result<Command> {
    let doc: Value = read_json(path)?;
    let cfg = match doc.get("config") {
        Some(c) => c.clone(),
        None => doc,
    };
    serde_json::from_value(cfg).map_err(|e| Error::Usage(format!("{}: not a run config: {e}", path.display())))
}
