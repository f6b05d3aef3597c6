//! The `pemkit` command line.
//!
//! Every subcommand takes its options from flags, from a TOML file given with
//! `--config` (a table per subcommand plus top-level `seed`, `verbosity` and
//! `out_dir`), or from built-in defaults, in that order of precedence. Each
//! invocation writes `manifest.json` into its output directory; `pemkit replay`
//! re-executes a manifest and checks that every output is byte-identical.

mod args;
mod error;
mod inspect;
mod learn;
mod manifest;
mod report;
mod serve;
mod simulate;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

pub use args::{Cli, Command};
pub use error::CliError;
pub use manifest::{FileDigest, Manifest};

/// Runs the CLI on the process arguments.
pub fn main() -> ExitCode {
    run_args(std::env::args_os())
}

/// Runs the CLI on `args` (program name first) and maps the outcome to an
/// exit code.
pub fn run_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { error::EXIT_USAGE } else { 0 });
        }
    };
    let argv: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(cli, argv, None) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Executes a parsed command line. `argv` is recorded in the manifest;
/// `out_dir_override` replaces the resolved output directory.
pub fn execute(cli: Cli, argv: Vec<String>, out_dir_override: Option<PathBuf>) -> Result<(), CliError> {
    let ctx = args::resolve(cli, argv, out_dir_override)?;
    init_logging(ctx.verbosity);
    match &ctx.command {
        Command::Learn(a) => learn::learn(&ctx, a),
        Command::Synth(a) => learn::synth(&ctx, a),
        Command::Inspect(a) => inspect::inspect(&ctx, a),
        Command::Serve(a) => serve::serve(&ctx, a),
        Command::Simulate(a) => simulate::simulate(&ctx, a),
        Command::Report(a) => report::report(&ctx, a),
        Command::Replay(a) => manifest::replay(&ctx, a),
    }
}

fn init_logging(verbosity: u8) {
    let level = match verbosity {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .try_init();
}
