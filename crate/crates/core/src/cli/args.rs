use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand};
use serde::Deserialize;

use super::error::CliError;
use super::manifest::FileDigest;
use crate::sim::{PolicyConfig, ScenarioId, ScenarioSpec};

#[derive(Debug, Parser)]
#[command(name = "pemkit", version, about = "Learn perception error models and use them in scenario simulation")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML file with a table per subcommand and top-level seed/verbosity/out_dir.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base random seed [default: 0].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// More log output; repeat for more detail.
    #[arg(short, long, action = ArgAction::Count, global = true)]
    pub verbose: u8,
    /// Output directory [default: out].
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Fit a model from a paired ground-truth/detection dataset.
    Learn(LearnArgs),
    /// Draw a synthetic dataset from a known model.
    Synth(SynthArgs),
    /// Export per-cell parameter grids of a model as CSV.
    Inspect(InspectArgs),
    /// Serve models to simulators over TCP.
    Serve(ServeArgs),
    /// Run scenario experiments.
    Simulate(SimulateArgs),
    /// Merge experiment reports into a success-rate table.
    Report(ReportArgs),
    /// Re-run a manifest into --out-dir and compare outputs byte for byte.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Learn(_) => "learn",
            Self::Synth(_) => "synth",
            Self::Inspect(_) => "inspect",
            Self::Serve(_) => "serve",
            Self::Simulate(_) => "simulate",
            Self::Report(_) => "report",
            Self::Replay(_) => "replay",
        }
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnArgs {
    /// JSON-lines dataset.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Sector width in degrees [default: 30].
    #[arg(long)]
    pub sector_deg: Option<f64>,
    /// Ring depth in meters [default: 10].
    #[arg(long)]
    pub ring_m: Option<f64>,
    /// Grid radius in meters [default: 100].
    #[arg(long)]
    pub max_radius_m: Option<f64>,
    /// Spatial dependence in (0, 1] [default: 0.95].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Gamma prior shape on the smoothing precision [default: 1].
    #[arg(long)]
    pub prior_shape: Option<f64>,
    /// Gamma prior rate on the smoothing precision [default: 1].
    #[arg(long)]
    pub prior_rate: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub grad_tol: Option<f64>,
    /// Matching gate in meters [default: 10].
    #[arg(long)]
    pub gate_m: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthArgs {
    /// Model file to sample from.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub scenes: Option<usize>,
    #[arg(long)]
    pub frames: Option<usize>,
    /// Objects per scene.
    #[arg(long)]
    pub objects: Option<usize>,
    /// Objects move in straight lines at up to this speed (m/s); 0 keeps them static.
    #[arg(long)]
    pub max_speed: Option<f64>,
    #[arg(long)]
    pub frame_rate_hz: Option<f64>,
    #[arg(long)]
    pub min_separation_m: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InspectArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Parameter to export [default: pi1].
    #[arg(long)]
    pub param: Option<String>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeArgs {
    /// Model to host, as PATH or NAME=PATH (name defaults to the file stem).
    #[arg(long)]
    pub model: Vec<String>,
    /// Listen address [default: 127.0.0.1:9223].
    #[arg(long)]
    pub bind: Option<String>,
    /// Stop the whole server on a client shutdown message [default: true].
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub remote_shutdown: Option<bool>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateArgs {
    /// Test case to run; repeat for several [default: all].
    #[arg(long)]
    pub scenario: Vec<ScenarioId>,
    /// Perception source: ground_truth, perfect, never_detect,
    /// model:[NAME=]PATH or remote:ADDR/MODEL; repeat for several
    /// [default: ground_truth].
    #[arg(long)]
    pub perception: Vec<String>,
    /// Runs per model cell [default: 500].
    #[arg(long)]
    pub runs: Option<usize>,
    /// Runs per ground-truth cell [default: 250].
    #[arg(long)]
    pub baseline_runs: Option<usize>,
    /// Skip writing per-run logs.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub no_logs: Option<bool>,
    #[arg(skip)]
    pub policy: Option<PolicyConfig>,
    /// Replacement scenario definitions, matched by id.
    #[arg(skip)]
    pub scenario_spec: Vec<ScenarioSpec>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportArgs {
    /// A report.json or a directory containing one; repeat for several.
    #[arg(long)]
    pub input: Vec<PathBuf>,
    /// Merge cells whose models use different grids, with a warning.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub allow_mixed_grids: Option<bool>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    seed: Option<u64>,
    verbosity: Option<u8>,
    out_dir: Option<PathBuf>,
    learn: LearnArgs,
    synth: SynthArgs,
    inspect: InspectArgs,
    serve: ServeArgs,
    simulate: SimulateArgs,
    report: ReportArgs,
}

macro_rules! fill {
    ($cli:ident, $file:ident; $($f:ident),* ; vec $($v:ident),*) => {
        $( if $cli.$f.is_none() { $cli.$f = $file.$f; } )*
        $( if $cli.$v.is_empty() { $cli.$v = $file.$v; } )*
    };
}

/// Resolved invocation.
#[derive(Debug, Clone)]
pub struct Context {
    pub command: Command,
    pub seed: u64,
    pub verbosity: u8,
    pub out_dir: PathBuf,
    pub out_dir_given: bool,
    pub argv: Vec<String>,
    pub config: Option<FileDigest>,
}

pub fn resolve(cli: Cli, argv: Vec<String>, out_dir_override: Option<PathBuf>) -> Result<Context, CliError> {
    let Cli { global, command } = cli;
    let (file, config) = match &global.config {
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|e| CliError::io_at(path, e))?;
            let text = String::from_utf8(bytes.clone())
                .map_err(|_| CliError::Usage(format!("{}: config is not UTF-8", path.display())))?;
            let file: ConfigFile =
                toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            (file, Some(FileDigest::of_bytes(path, &bytes)))
        }
        None => (ConfigFile::default(), None),
    };
    let command = match command {
        Command::Learn(mut a) => {
            let f = file.learn;
            fill!(a, f; dataset, sector_deg, ring_m, max_radius_m, alpha, prior_shape, prior_rate, max_iter, grad_tol, gate_m; vec);
            Command::Learn(a)
        }
        Command::Synth(mut a) => {
            let f = file.synth;
            fill!(a, f; model, scenes, frames, objects, max_speed, frame_rate_hz, min_separation_m; vec);
            Command::Synth(a)
        }
        Command::Inspect(mut a) => {
            let f = file.inspect;
            fill!(a, f; model, param; vec);
            Command::Inspect(a)
        }
        Command::Serve(mut a) => {
            let f = file.serve;
            fill!(a, f; bind, remote_shutdown; vec model);
            Command::Serve(a)
        }
        Command::Simulate(mut a) => {
            let f = file.simulate;
            fill!(a, f; runs, baseline_runs, no_logs, policy; vec scenario, perception, scenario_spec);
            Command::Simulate(a)
        }
        Command::Report(mut a) => {
            let f = file.report;
            fill!(a, f; allow_mixed_grids; vec input);
            Command::Report(a)
        }
        c @ Command::Replay(_) => c,
    };
    let out_dir_given = out_dir_override.is_some() || global.out_dir.is_some() || file.out_dir.is_some();
    let out_dir = out_dir_override
        .or(global.out_dir)
        .or(file.out_dir)
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok(Context {
        command,
        seed: global.seed.or(file.seed).unwrap_or(0),
        verbosity: if global.verbose > 0 { global.verbose } else { file.verbosity.unwrap_or(0) },
        out_dir,
        out_dir_given,
        argv,
        config,
    })
}

pub fn required<T>(v: Option<T>, flag: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("missing required option --{flag}")))
}
