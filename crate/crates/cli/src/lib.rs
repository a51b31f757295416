//! Command-line front end for `hypstat-core`.
//!
//! [`parse_args`] turns an argument vector into a validated [`RunConfig`],
//! [`run`] executes it and [`emit_report`] writes the result. Output is
//! byte-deterministic: JSON keys are ordered, floats use the shortest
//! round-trip form and big counts are decimal strings. Run metadata lives
//! under the `meta` key.

mod args;
mod run;
mod specs;

use std::io::Write;
use std::path::Path;

pub use args::{parse_args, Format, RunConfig, Task};
pub use run::{run, Outcome};
pub use specs::{parse_cells, parse_grid, parse_interval, parse_points, parse_real_grid, CodingSource, WeightsSource};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Clap(#[from] clap::Error),
    #[error("usage error: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] hypstat_core::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    /// 2 for usage problems, 3 for numerical, validation and I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Clap(e) => e.exit_code(),
            CliError::Usage(_) => 2,
            CliError::Core(hypstat_core::Error::InvalidArgument(_)) => 2,
            CliError::Core(_) | CliError::Io(_) => 3,
        }
    }
}

/// Renders an outcome in the requested format.
pub fn render(outcome: &Outcome, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&outcome.json).expect("report serializes");
            s.push('\n');
            s
        }
        Format::Csv => outcome.csv.clone(),
        Format::Text => outcome.text.clone(),
    }
}

/// Writes the rendered outcome to `sink`, or standard output when `None`.
pub fn emit_report(outcome: &Outcome, format: Format, sink: Option<&Path>) -> Result<(), CliError> {
    let bytes = render(outcome, format);
    match sink {
        Some(path) => std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("HYPSTAT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("HYPSTAT_THREADS=\"{v}\" is not a positive integer")))?;
    // A second initialization (tests in one process) keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Full program: parse, run, emit. Returns the process exit code.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let result = configure_threads()
        .and_then(|_| parse_args(argv))
        .and_then(|config| {
            let outcome = run(&config)?;
            emit_report(&outcome, config.format, config.out.as_deref())?;
            Ok(outcome.passed)
        });
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(CliError::Clap(e)) => {
            let _ = e.print();
            e.exit_code()
        }
        Err(e) => {
            eprintln!("hypstat: {e}");
            e.exit_code()
        }
    }
}
