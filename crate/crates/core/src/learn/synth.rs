//! Synthetic datasets drawn from a known model, for recovery experiments.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Frame, LearnError, PerceptionDataset, Scene};
use crate::pem::{apply, GroundTruthObject, OcclusionLevel, PemModel, PolarCoord, TrackState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Motion {
    Static,
    /// Straight-line motion with a random heading and a speed drawn uniformly
    /// from `[0, max_speed]` m/s.
    ConstantVelocity { max_speed: f64 },
}

#[derive(Debug, Clone)]
pub struct SyntheticDatasetConfig {
    pub true_model: PemModel,
    pub n_scenes: usize,
    pub frames_per_scene: usize,
    pub objects_per_scene: usize,
    pub motion: Motion,
    pub seed: u64,
    pub frame_rate_hz: f64,
    /// Occlusion levels assigned to objects, cycled in order.
    pub occlusion_levels: Vec<OcclusionLevel>,
    /// Minimum initial distance between objects of a scene, meters.
    pub min_separation_m: f64,
}

impl SyntheticDatasetConfig {
    pub fn new(true_model: PemModel) -> Self {
        Self {
            true_model,
            n_scenes: 10,
            frames_per_scene: 50,
            objects_per_scene: 16,
            motion: Motion::Static,
            seed: 0,
            frame_rate_hz: super::DEFAULT_FRAME_RATE_HZ,
            occlusion_levels: OcclusionLevel::ALL.to_vec(),
            min_separation_m: 3.0,
        }
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |m: &str| Err(LearnError::InvalidDataset(m.to_string()));
        if self.n_scenes == 0 || self.frames_per_scene == 0 || self.objects_per_scene == 0 {
            return bad("scene, frame and object counts must be at least 1");
        }
        if self.frame_rate_hz.is_nan() || self.frame_rate_hz <= 0.0 {
            return bad("frame rate must be positive");
        }
        if self.occlusion_levels.is_empty() {
            return bad("at least one occlusion level required");
        }
        if let Motion::ConstantVelocity { max_speed } = self.motion {
            if max_speed.is_nan() || max_speed < 0.0 {
                return bad("max speed must be non-negative");
            }
        }
        self.true_model.validate()?;
        Ok(())
    }
}

/// Simulates objects and perceives them through `true_model`.
///
/// Objects are spread round-robin over grid cells and occlusion levels and
/// placed away from cell borders. Each scene draws from its own stream of the
/// seeded generator, so scenes can be produced in parallel.
pub fn synthesize_dataset(config: &SyntheticDatasetConfig) -> Result<PerceptionDataset, LearnError> {
    config.validate()?;
    let scenes = (0..config.n_scenes)
        .into_par_iter()
        .map(|s| synth_scene(config, s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PerceptionDataset {
        scenes,
        frame_rate_hz: config.frame_rate_hz,
    })
}

struct Body {
    id: u64,
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
    occlusion: OcclusionLevel,
}

fn synth_scene(config: &SyntheticDatasetConfig, scene: usize) -> Result<Scene, LearnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(scene as u64);
    let grid = config.true_model.grid;
    let n_cells = grid.n_cells();
    let dt = 1.0 / config.frame_rate_hz;

    let mut bodies: Vec<Body> = Vec::with_capacity(config.objects_per_scene);
    for k in 0..config.objects_per_scene {
        let slot = scene * config.objects_per_scene + k;
        let cell = slot % n_cells;
        let occlusion = config.occlusion_levels[(slot / n_cells) % config.occlusion_levels.len()];
        let (ring, sector) = (cell / grid.n_sectors(), cell % grid.n_sectors());
        let (x, y) = place(&mut rng, &grid, ring, sector, &bodies, config.min_separation_m);
        let (vx, vy) = match config.motion {
            Motion::Static => (0.0, 0.0),
            Motion::ConstantVelocity { max_speed } => {
                let heading = rng.random::<f64>() * std::f64::consts::TAU;
                let speed = rng.random::<f64>() * max_speed;
                (speed * heading.cos(), speed * heading.sin())
            }
        };
        bodies.push(Body {
            id: k as u64,
            x,
            y,
            vx,
            vy,
            occlusion,
        });
    }

    let mut tracks = TrackState::new();
    let mut frames = Vec::with_capacity(config.frames_per_scene);
    for f in 0..config.frames_per_scene {
        let t = f as f64 * dt;
        let gt: Vec<GroundTruthObject> = bodies
            .iter()
            .map(|b| GroundTruthObject {
                id: b.id,
                position: PolarCoord::from_cartesian(b.x + b.vx * t, b.y + b.vy * t),
                occlusion: b.occlusion,
            })
            .collect();
        let mut detections: Vec<PolarCoord> = apply(&config.true_model, &gt, &mut tracks, &mut rng)?
            .into_iter()
            .map(|p| p.position)
            .collect();
        detections.shuffle(&mut rng);
        frames.push(Frame { t, gt, detections });
    }
    Ok(Scene {
        name: format!("synth-{scene}"),
        frames,
    })
}

/// Uniform position in the inner part of a cell, retried a bounded number of
/// times to keep `min_sep` from already placed bodies.
fn place<R: Rng>(rng: &mut R, grid: &crate::pem::GridSpec, ring: usize, sector: usize, placed: &[Body], min_sep: f64) -> (f64, f64) {
    let depth = grid.ring_depth_m.min(grid.max_radius_m - ring as f64 * grid.ring_depth_m);
    let r0 = ring as f64 * grid.ring_depth_m + 0.15 * depth;
    let r1 = ring as f64 * grid.ring_depth_m + 0.85 * depth;
    let r0 = r0.max(1.0).min(r1);
    let w = grid.sector_width();
    let th0 = sector as f64 * w + 0.15 * w;
    let th1 = sector as f64 * w + 0.85 * w;
    let mut best = (0.0, 0.0);
    let mut best_gap = f64::NEG_INFINITY;
    for _ in 0..64 {
        let r = r0 + (r1 - r0) * rng.random::<f64>();
        let th = th0 + (th1 - th0) * rng.random::<f64>();
        let (x, y) = PolarCoord::new(r, th).to_cartesian();
        let gap = placed
            .iter()
            .map(|b| (b.x - x).hypot(b.y - y))
            .fold(f64::INFINITY, f64::min);
        if gap >= min_sep {
            return (x, y);
        }
        if gap > best_gap {
            best_gap = gap;
            best = (x, y);
        }
    }
    best
}
