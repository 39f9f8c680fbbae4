//! Command-line front end: simulate cores, date them with CRS or the
//! Bayesian model, run the subsampling experiment and export plot data.
//!
//! [`dispatch`] is the whole program; `main` only forwards the process
//! arguments and exit code. Exit codes: 0 success, 1 invalid invocation or
//! input, 2 failure while computing or writing results.

use std::ffi::OsString;
use std::fmt;

use clap::{Parser, Subcommand};

mod crs_cmd;
mod experiment_cmd;
mod output;
mod plot_cmd;
mod plum_cmd;
mod simulate_cmd;

#[derive(Parser, Debug)]
#[command(
    name = "pb210",
    version,
    about = "Lead-210 sediment chronologies: simulation, CRS dating and Bayesian dating",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a sediment core from a known age-depth function.
    Simulate(simulate_cmd::Args),
    /// Date a core with the Constant Rate of Supply model.
    Crs(crs_cmd::Args),
    /// Date a core with the Bayesian autoregressive-accumulation model.
    Plum(plum_cmd::Args),
    /// Run the subsampling comparison between dating methods.
    Experiment(experiment_cmd::Args),
    /// Turn chronologies or experiment records into plot-ready tables.
    PlotData(plot_cmd::Args),
}

/// Why a command stopped.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or input; exit code 1.
    Usage(String),
    /// Computation or output failed; exit code 2.
    Runtime(String),
}

impl Failure {
    pub(crate) fn usage(msg: impl fmt::Display) -> Self {
        Failure::Usage(msg.to_string())
    }

    pub(crate) fn runtime(msg: impl fmt::Display) -> Self {
        Failure::Runtime(msg.to_string())
    }

    pub(crate) fn io(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<pb210::Error> for Failure {
    fn from(e: pb210::Error) -> Self {
        match e {
            pb210::Error::Validation(_) | pb210::Error::Format { .. } => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

/// Attaches the offending flag to a library validation error.
pub(crate) fn flag_check<T>(flag: &str, r: pb210::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| Failure::usage(format!("{flag}: {e}")))
}

/// Runs `f` on a rayon pool of `jobs` threads, or the global pool.
pub(crate) fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(Failure::usage("--jobs: must be >= 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(Failure::runtime)?;
            Ok(pool.install(f))
        }
    }
}

/// Parses `args` (program name first) and runs the subcommand. Returns the
/// process exit code.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    // The program path varies between installs; record a stable name.
    let invocation = std::iter::once("pb210".to_string())
        .chain(args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()))
        .collect::<Vec<_>>()
        .join(" ");

    let result = match &cli.command {
        Command::Simulate(a) => simulate_cmd::run(a, &invocation),
        Command::Crs(a) => crs_cmd::run(a, &invocation),
        Command::Plum(a) => plum_cmd::run(a, &invocation),
        Command::Experiment(a) => experiment_cmd::run(a, &invocation),
        Command::PlotData(a) => plot_cmd::run(a, &invocation),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_tree_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn failures_map_to_exit_codes() {
        assert_eq!(Failure::from(pb210::Error::Validation(vec!["x".into()])).exit_code(), 1);
        assert_eq!(Failure::from(pb210::Error::NoDatableExcess).exit_code(), 2);
    }
}
