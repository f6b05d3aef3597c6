use std::path::Path;

use super::args::{Context, SimulateArgs};
use super::error::CliError;
use super::manifest::Outputs;
use super::serve::split_named;
use crate::pem::{load_model, GridSpec, PemModel};
use crate::sim::{run_experiment_with, ExperimentReport, PerceptionSource, ScenarioId, ScenarioSpec};

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TXT: &str = "report.txt";
pub const DEFAULT_RUNS: usize = 500;
pub const DEFAULT_BASELINE_RUNS: usize = 250;

/// Parses a perception source argument. Model files are recorded as inputs.
pub fn parse_source(arg: &str, out: &mut Outputs) -> Result<PerceptionSource, CliError> {
    Ok(match arg {
        "ground_truth" | "gt" => PerceptionSource::GroundTruth,
        "perfect" => PerceptionSource::local("perfect", PemModel::perfect(GridSpec::default())),
        "never_detect" => PerceptionSource::local("never_detect", PemModel::never_detect(GridSpec::default())),
        _ => {
            if let Some(rest) = arg.strip_prefix("model:") {
                let (name, path) = split_named(rest);
                let path = Path::new(path);
                out.input(path)?;
                let model = load_model(path)?;
                let name = match name {
                    Some(n) => n.to_string(),
                    None => path
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| rest.to_string()),
                };
                PerceptionSource::local(name, model)
            } else if let Some(rest) = arg.strip_prefix("remote:") {
                let (addr, model) = rest
                    .rsplit_once('/')
                    .filter(|(a, m)| !a.is_empty() && !m.is_empty())
                    .ok_or_else(|| CliError::Usage(format!("remote source {arg:?} is not remote:ADDR/MODEL")))?;
                PerceptionSource::Remote {
                    addr: addr.into(),
                    model: model.into(),
                }
            } else {
                return Err(CliError::Usage(format!(
                    "unknown perception source {arg:?}; use ground_truth, perfect, never_detect, model:[NAME=]PATH or remote:ADDR/MODEL"
                )));
            }
        }
    })
}

pub fn simulate(ctx: &Context, a: &SimulateArgs) -> Result<(), CliError> {
    let scenarios: Vec<ScenarioId> = if a.scenario.is_empty() {
        ScenarioId::ALL.to_vec()
    } else {
        a.scenario.clone()
    };
    let perceptions: Vec<String> = if a.perception.is_empty() {
        vec!["ground_truth".into()]
    } else {
        a.perception.clone()
    };
    let policy = a.policy.unwrap_or_default();
    policy.validate().map_err(CliError::Usage)?;
    let runs = a.runs.unwrap_or(DEFAULT_RUNS);
    let baseline_runs = a.baseline_runs.unwrap_or(DEFAULT_BASELINE_RUNS);
    if runs == 0 || baseline_runs == 0 {
        return Err(CliError::Usage("run counts must be at least 1".into()));
    }
    let write_logs = !a.no_logs.unwrap_or(false);

    let mut out = Outputs::create(ctx)?;
    let mut report = ExperimentReport::default();
    let result = (|| {
        let mut sources = Vec::new();
        for p in &perceptions {
            let s = parse_source(p, &mut out)?;
            let label = s.label();
            if label.is_empty() || label.contains(['/', '\\']) || label.starts_with('.') {
                return Err(CliError::Usage(format!("perception label {label:?} is not usable as a directory name")));
            }
            if sources.iter().any(|o: &PerceptionSource| o.label() == label) {
                return Err(CliError::Usage(format!("perception label {label:?} given twice")));
            }
            sources.push(s);
        }
        for source in &sources {
            for &id in &scenarios {
                let spec = a
                    .scenario_spec
                    .iter()
                    .find(|s| s.id == id)
                    .cloned()
                    .unwrap_or_else(|| ScenarioSpec::standard(id));
                let n = if source.is_ground_truth() { baseline_runs } else { runs };
                let label = source.label();
                let log_dir = out.dir().join("runs").join(id.as_str()).join(&label);
                if write_logs {
                    std::fs::create_dir_all(&log_dir).map_err(|e| CliError::io_at(&log_dir, e))?;
                }
                log::info!("{id} with {label}: {n} runs from seed {}", ctx.seed);
                let (cell, _) = run_experiment_with(&spec, &policy, source, n, ctx.seed, |log| {
                    if write_logs {
                        std::fs::write(log_dir.join(log_file(log.header.seed)), log.to_jsonl())?;
                    }
                    Ok(())
                })?;
                if write_logs {
                    for r in &cell.runs {
                        let rel = format!("runs/{id}/{label}/{}", log_file(r.seed));
                        let bytes = std::fs::read(out.dir().join(&rel)).map_err(|e| CliError::io_at(Path::new(&rel), e))?;
                        out.record(&rel, &bytes);
                    }
                }
                let remote_failed = matches!(source, PerceptionSource::Remote { .. }) && cell.n_aborted > 0;
                let first_abort = cell.aborted.first().map(|r| r.reason.clone());
                report.push(cell);
                if remote_failed {
                    return Err(CliError::Io(format!(
                        "perception server for {label} failed on {id}: {}; partial results written",
                        first_abort.unwrap_or_default()
                    )));
                }
            }
        }
        Ok(())
    })();
    if !report.cells.is_empty() {
        out.write(REPORT_JSON, report.to_json().as_bytes())?;
        let table = report.render_table();
        out.write(REPORT_TXT, table.as_bytes())?;
        print!("{table}");
    }
    out.finish(ctx, result.as_ref().err())?;
    result
}

fn log_file(seed: u64) -> String {
    format!("seed-{seed}.jsonl")
}
