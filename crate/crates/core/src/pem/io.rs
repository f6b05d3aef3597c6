use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    Condition, ConditionParams, ErrorDistribution, GridSpec, ModelError, OcclusionLevel, PemModel, TransitionMatrix,
};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    metadata: String,
    grid: GridSpec,
    conditions: Vec<ConditionRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConditionRecord {
    occ: usize,
    ring: usize,
    sector: usize,
    a01: f64,
    a11: f64,
    mu_r: f64,
    mu_theta: f64,
    sigma_r: f64,
    sigma_theta: f64,
    rho: f64,
}

pub fn model_to_json(model: &PemModel) -> String {
    let grid = model.grid;
    let conditions = model
        .conditions()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let c = grid.condition_at(i).expect("index within grid");
            ConditionRecord {
                occ: c.occlusion.index(),
                ring: c.ring,
                sector: c.sector,
                a01: p.transition.a01,
                a11: p.transition.a11,
                mu_r: p.error.mu_r,
                mu_theta: p.error.mu_theta,
                sigma_r: p.error.sigma_r,
                sigma_theta: p.error.sigma_theta,
                rho: p.error.rho,
            }
        })
        .collect();
    let file = ModelFile {
        metadata: model.metadata.clone(),
        grid,
        conditions,
    };
    let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
    s.push('\n');
    s
}

pub fn model_from_json(text: &str) -> Result<PemModel, ModelError> {
    let file: ModelFile = serde_json::from_str(text)?;
    let grid = file.grid;
    grid.validate()?;

    let mut slots: Vec<Option<ConditionParams>> = vec![None; grid.n_conditions()];
    for rec in &file.conditions {
        let oob = || ModelError::ConditionOutOfGrid {
            occ: rec.occ,
            ring: rec.ring,
            sector: rec.sector,
        };
        let occlusion = OcclusionLevel::from_index(rec.occ).ok_or_else(oob)?;
        if rec.ring >= grid.n_rings() || rec.sector >= grid.n_sectors() {
            return Err(oob());
        }
        let idx = grid.condition_index(Condition {
            occlusion,
            ring: rec.ring,
            sector: rec.sector,
        });
        if slots[idx].is_some() {
            return Err(ModelError::DuplicateCondition {
                occ: rec.occ,
                ring: rec.ring,
                sector: rec.sector,
            });
        }
        slots[idx] = Some(ConditionParams {
            transition: TransitionMatrix::new(rec.a01, rec.a11),
            error: ErrorDistribution {
                mu_r: rec.mu_r,
                mu_theta: rec.mu_theta,
                sigma_r: rec.sigma_r,
                sigma_theta: rec.sigma_theta,
                rho: rec.rho,
            },
        });
    }
    let found = slots.iter().filter(|s| s.is_some()).count();
    if found != slots.len() {
        return Err(ModelError::ConditionCount {
            expected: slots.len(),
            found,
        });
    }
    PemModel::new(file.metadata, grid, slots.into_iter().map(Option::unwrap).collect())
}

pub fn save_model(model: &PemModel, path: impl AsRef<Path>) -> Result<(), ModelError> {
    fs::write(path, model_to_json(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<PemModel, ModelError> {
    model_from_json(&fs::read_to_string(path)?)
}
