//! Command-line front end for twistlab.
//!
//! Exit codes: 0 on success, 2 when arguments fail validation, 1 when a
//! numerical computation fails.

mod args;
mod commands;
mod config;
mod output;

use std::ffi::OsString;

use clap::Parser;

pub use args::Cli;
pub use output::num;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{what} failed: {source}")]
    Numeric { what: String, source: twistlab::Error },
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric { .. } | CliError::Io(_) => 1,
        }
    }

    /// Routes a core error: bad inputs are usage errors, everything else is
    /// a failure of the named computation.
    pub fn from_core(what: &str, e: twistlab::Error) -> Self {
        use twistlab::Error as E;
        match e {
            E::InvalidInput(m) => CliError::Usage(m),
            e @ (E::RationalTarget { .. } | E::InvalidGenerating(_) | E::ProvenanceMismatch(_)) => {
                CliError::Usage(e.to_string())
            }
            source => CliError::Numeric { what: what.to_string(), source },
        }
    }
}

/// Thread cap from `TWISTLAB_THREADS`, if set to a positive integer.
fn env_thread_cap() -> Option<usize> {
    std::env::var("TWISTLAB_THREADS").ok()?.trim().parse().ok().filter(|&n| n > 0)
}

fn logical_cpus() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

#[cfg(feature = "parallel")]
fn with_threads<T: Send>(n: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(not(feature = "parallel"))]
fn with_threads<T: Send>(_n: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    Ok(f())
}

fn execute(args: Vec<OsString>) -> Result<(), CliError> {
    let args = config::expand(args)?;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // help and version requests
            let _ = e.print();
            return Ok(());
        }
        Err(e) => {
            // keep clap's message on one line, without the usage block
            let text = e.to_string();
            let body = text.split("\nUsage:").next().unwrap_or_default();
            let body = body.split("\nFor more information").next().unwrap_or_default();
            let line = body.split_whitespace().collect::<Vec<_>>().join(" ");
            return Err(CliError::Usage(line.trim_start_matches("error: ").to_string()));
        }
    };
    if cli.threads == Some(0) {
        return Err(CliError::Usage("threads: must be at least 1".into()));
    }
    let wanted = cli.threads.unwrap_or_else(|| commands::default_threads(&cli.command, logical_cpus()));
    let threads = env_thread_cap().map_or(wanted, |cap| wanted.min(cap)).max(1);
    with_threads(threads, || commands::dispatch(&cli.command))?
}

/// Runs the command line `args` (program name first) and returns the exit code.
pub fn run<I: IntoIterator<Item = OsString>>(args: I) -> i32 {
    match execute(args.into_iter().collect()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("twistlab: {e}");
            e.exit_code()
        }
    }
}
