//! Batch command-line front end: `embed`, `train`, `classify`, `eval` and `synth`.
//!
//! Each command is also callable as a library function taking a resolved
//! [`config::RunConfig`], which is how the integration tests drive it.

pub mod args;
pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::fmt;

use clap::Parser;
use taxembed_core::ErrorClass;

use crate::args::{Cli, Command};
use crate::commands::Written;
use crate::config::{resolve, Params, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(taxembed_core::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            CliError::Usage(_) => None,
            CliError::Core(e) => Some(e),
        }
    }
}

impl From<taxembed_core::Error> for CliError {
    fn from(e: taxembed_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) => match e.class() {
                ErrorClass::Data => EXIT_DATA,
                ErrorClass::Numerical => EXIT_NUMERICAL,
            },
        }
    }
}

fn init_logging(level: &str) -> Result<(), CliError> {
    let filter: log::LevelFilter = level
        .parse()
        .map_err(|_| CliError::Usage(format!("unknown log level `{level}`")))?;
    // a second init in the same process (tests) is harmless
    let _ = env_logger::Builder::new()
        .filter_level(filter)
        .format_timestamp(None)
        .try_init();
    Ok(())
}

/// Runs `f` on a pool capped at `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> Result<T, CliError> + Send,
) -> Result<T, CliError> {
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {n} worker threads: {e}")))?
            .install(f),
    }
}

fn dispatch<P: Params + Sync>(
    config_file: Option<&std::path::Path>,
    flags: serde_json::Value,
    cmd: fn(&RunConfig<P>) -> Result<Written, CliError>,
) -> Result<Written, CliError> {
    let config = resolve::<P>(config_file, flags)?;
    init_logging(&config.log_level)?;
    with_threads(config.threads, || cmd(&config))
}

/// Parses `args` (program name first), runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(written) => {
            for f in &written.files {
                println!("{}", f.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<Written, CliError> {
    let g = &cli.global;
    let file = g.config.as_deref();
    match &cli.command {
        Command::Embed(a) => dispatch(file, a.flags(g), commands::cmd_embed),
        Command::Train(a) => dispatch(file, a.flags(g), commands::cmd_train),
        Command::Classify(a) => dispatch(file, a.flags(g), commands::cmd_classify),
        Command::Eval(a) => dispatch(file, a.flags(g), commands::cmd_eval),
        Command::Synth(a) => dispatch(file, a.flags(g), commands::cmd_synth),
    }
}
