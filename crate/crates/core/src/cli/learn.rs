use serde_json::json;

use super::args::{required, Context, LearnArgs, SynthArgs};
use super::error::CliError;
use super::manifest::Outputs;
use crate::learn::{
    learn_pem_gated, read_dataset, synthesize_dataset, write_dataset, CarSpec, LearnOutput, Motion,
    SyntheticDatasetConfig, DEFAULT_GATE_M,
};
use crate::pem::{load_model, model_to_json, GridSpec};

pub const MODEL_FILE: &str = "model.json";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";
pub const DATASET_FILE: &str = "dataset.jsonl";

pub fn learn(ctx: &Context, a: &LearnArgs) -> Result<(), CliError> {
    let dataset_path = required(a.dataset.clone(), "dataset")?;
    let d = GridSpec::default();
    let grid = GridSpec::new(
        a.sector_deg.unwrap_or(d.sector_width_deg),
        a.ring_m.unwrap_or(d.ring_depth_m),
        a.max_radius_m.unwrap_or(d.max_radius_m),
    )
    .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut spec = CarSpec::for_grid(&grid);
    spec.alpha = a.alpha.unwrap_or(spec.alpha);
    spec.prior_shape = a.prior_shape.unwrap_or(spec.prior_shape);
    spec.prior_rate = a.prior_rate.unwrap_or(spec.prior_rate);
    spec.max_iter = a.max_iter.unwrap_or(spec.max_iter);
    spec.grad_tol = a.grad_tol.unwrap_or(spec.grad_tol);
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let gate = a.gate_m.unwrap_or(DEFAULT_GATE_M);

    let mut out = Outputs::create(ctx)?;
    let result = (|| {
        out.input(&dataset_path)?;
        let dataset = read_dataset(&dataset_path)?;
        let fit = learn_pem_gated(&dataset, grid, &spec, gate)?;
        out.write(MODEL_FILE, model_to_json(&fit.model).as_bytes())?;
        out.write(DIAGNOSTICS_FILE, diagnostics_json(&fit).as_bytes())?;
        for d in &fit.diagnostics {
            log::info!(
                "{}: {} observed, {} iterations, gradient {:.2e}, tau {:.4}{}",
                d.field,
                d.n_observed,
                d.iterations,
                d.grad_norm,
                d.tau,
                if d.stalled { " (stalled)" } else { "" }
            );
        }
        println!(
            "learned {} conditions from {} transitions, {} error samples",
            grid.n_conditions(),
            fit.stats.total_transitions(),
            fit.stats.total_samples()
        );
        Ok(())
    })();
    out.finish(ctx, result.as_ref().err())?;
    result
}

fn diagnostics_json(fit: &LearnOutput) -> String {
    let grid = fit.stats.grid;
    let fields: Vec<_> = fit
        .diagnostics
        .iter()
        .map(|d| {
            json!({
                "field": d.field,
                "n_observed": d.n_observed,
                "iterations": d.iterations,
                "grad_norm": d.grad_norm,
                "tau": d.tau,
                "stalled": d.stalled,
            })
        })
        .collect();
    let conditions: Vec<_> = fit
        .stats
        .conditions
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let c = grid.condition_at(i).expect("index within grid");
            json!({
                "index": i,
                "occlusion": c.occlusion.index(),
                "ring": c.ring,
                "sector": c.sector,
                "transitions": s.transitions(),
                "counts": s.counts,
                "error_samples": s.samples.len(),
            })
        })
        .collect();
    let doc = json!({
        "grid": grid,
        "total_transitions": fit.stats.total_transitions(),
        "total_error_samples": fit.stats.total_samples(),
        "fields": fields,
        "conditions": conditions,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("diagnostics serialize");
    s.push('\n');
    s
}

pub fn synth(ctx: &Context, a: &SynthArgs) -> Result<(), CliError> {
    let model_path = required(a.model.clone(), "model")?;
    let mut out = Outputs::create(ctx)?;
    let result = (|| {
        out.input(&model_path)?;
        let model = load_model(&model_path)?;
        let mut cfg = SyntheticDatasetConfig::new(model);
        cfg.n_scenes = a.scenes.unwrap_or(cfg.n_scenes);
        cfg.frames_per_scene = a.frames.unwrap_or(cfg.frames_per_scene);
        cfg.objects_per_scene = a.objects.unwrap_or(cfg.objects_per_scene);
        cfg.frame_rate_hz = a.frame_rate_hz.unwrap_or(cfg.frame_rate_hz);
        cfg.min_separation_m = a.min_separation_m.unwrap_or(cfg.min_separation_m);
        cfg.motion = match a.max_speed {
            Some(v) if v > 0.0 => Motion::ConstantVelocity { max_speed: v },
            _ => Motion::Static,
        };
        cfg.seed = ctx.seed;
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let dataset = synthesize_dataset(&cfg)?;
        let path = out.dir().join(DATASET_FILE);
        write_dataset(&dataset, &path)?;
        let bytes = std::fs::read(&path).map_err(|e| CliError::io_at(&path, e))?;
        out.record(DATASET_FILE, &bytes);
        println!("wrote {} scenes, {} frames to {}", dataset.scenes.len(), dataset.n_frames(), path.display());
        Ok(())
    })();
    out.finish(ctx, result.as_ref().err())?;
    result
}
