use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::actors::{footprint_distance, footprints_overlap, ActorState};
use super::occlusion::compute_occlusion;
use super::policy::{driving_policy, PolicyConfig, RelativeObject};
use super::scenario::{LeadScript, PedestrianScript, ScenarioId, ScenarioSpec};
use super::SimError;
use crate::pem::{PemModel, PolarCoord};
use crate::server::{PemClient, Session, WireObject, WirePerceived};

/// Where a run's perceived world comes from.
#[derive(Debug, Clone)]
pub enum PerceptionSource {
    /// The uncorrupted object list.
    GroundTruth,
    Local { name: String, model: Arc<PemModel> },
    /// A model hosted by a perception server.
    Remote { addr: String, model: String },
}

impl PerceptionSource {
    pub fn local(name: impl Into<String>, model: PemModel) -> Self {
        Self::Local {
            name: name.into(),
            model: Arc::new(model),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::GroundTruth => "ground_truth".into(),
            Self::Local { name, .. } => name.clone(),
            Self::Remote { model, .. } => model.clone(),
        }
    }

    pub fn grid(&self) -> Option<crate::pem::GridSpec> {
        match self {
            Self::Local { model, .. } => Some(model.grid),
            _ => None,
        }
    }

    pub fn is_ground_truth(&self) -> bool {
        matches!(self, Self::GroundTruth)
    }
}

enum Perceiver {
    GroundTruth,
    Local(Box<Session>),
    Remote(PemClient),
}

impl Perceiver {
    fn open(source: &PerceptionSource, seed: u64, rate_hz: f64) -> Result<Self, SimError> {
        Ok(match source {
            PerceptionSource::GroundTruth => Self::GroundTruth,
            PerceptionSource::Local { name, model } => Self::Local(Box::new(Session::new(name.clone(), model.clone(), seed, rate_hz))),
            PerceptionSource::Remote { addr, model } => {
                let mut client = PemClient::connect(addr.as_str())?;
                client.init(model, seed, rate_hz)?;
                Self::Remote(client)
            }
        })
    }

    fn perceive(&mut self, t: f64, objects: Vec<WireObject>) -> Result<Vec<WirePerceived>, SimError> {
        match self {
            // same polar round trip a model applies, without errors
            Self::GroundTruth => Ok(objects
                .iter()
                .map(|o| {
                    let (x, y) = PolarCoord::from_cartesian(o.x, o.y).to_cartesian();
                    WirePerceived {
                        source_id: o.id,
                        x,
                        y,
                    }
                })
                .collect()),
            Self::Local(s) => s.process_frame(t, &objects).map_err(|e| SimError::Perception(e.to_string())),
            Self::Remote(c) => Ok(c.frame(t, objects)?),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    Completed,
    Collision,
    Timeout,
}

/// Perception output of one perception tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptionRecord {
    /// Ego-relative perceived objects.
    pub objects: Vec<WirePerceived>,
    /// Per actor (index 0, the ego, always false): perceived this tick.
    pub detected: Vec<bool>,
    /// Per actor visible fraction from the ego (1 for the ego itself).
    pub visible: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u64,
    pub t: f64,
    /// Ground truth, ego first.
    pub actors: Vec<ActorState>,
    /// Ego acceleration command applied after this tick.
    pub accel: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub perception: Option<PerceptionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub end: EndReason,
    pub duration_s: f64,
    pub min_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub scenario: ScenarioId,
    pub seed: u64,
    pub perception: String,
    pub tick_rate_hz: f64,
    pub perception_rate_hz: f64,
    pub primary_obstacle: usize,
    pub outcome: RunOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub header: RunHeader,
    pub ticks: Vec<TickRecord>,
}

impl RunLog {
    /// JSON lines: the header, then one tick per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        serde_json::to_writer(&mut w, &self.header)?;
        w.write_all(b"\n")?;
        for t in &self.ticks {
            serde_json::to_writer(&mut w, t)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = serde_json::from_str(lines.next().unwrap_or(""))?;
        let ticks = lines.map(serde_json::from_str).collect::<Result<_, _>>()?;
        Ok(Self { header, ticks })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PedPhase {
    Waiting,
    Walking,
    Done,
}

fn pedestrian_accel(p: &PedestrianScript, ped: &ActorState, phase: &mut PedPhase, ego: &ActorState, dt: f64) -> f64 {
    if *phase == PedPhase::Waiting {
        let to_line = p.y - (ego.y + 0.5 * ego.length);
        if to_line > 0.0 && ego.speed > 0.0 && to_line / ego.speed <= p.time_to_lane_center() {
            *phase = PedPhase::Walking;
        }
    }
    if *phase == PedPhase::Walking {
        let reached = if p.x_end >= p.x_start { ped.x >= p.x_end } else { ped.x <= p.x_end };
        if reached {
            *phase = PedPhase::Done;
        }
    }
    match *phase {
        PedPhase::Waiting => 0.0,
        PedPhase::Walking => p.walk_accel.min((p.walk_speed - ped.speed) / dt),
        PedPhase::Done => -ped.speed / dt,
    }
}

fn lead_accel(l: &LeadScript, lead: &ActorState, braking: &mut bool, dt: f64) -> f64 {
    let remaining = l.stop_y - lead.y;
    if !*braking && remaining <= lead.speed * lead.speed / (2.0 * l.brake_decel) {
        *braking = true;
    }
    if !*braking {
        0.0
    } else if remaining > 0.0 {
        -(lead.speed * lead.speed / (2.0 * remaining)).min(lead.speed / dt)
    } else {
        -lead.speed / dt
    }
}

/// Simulates one scenario run.
///
/// Each tick: scripted actors pick their commands, the perceived world is
/// refreshed on perception ticks (occlusion first), the ego policy acts on the
/// latest perceived world and all actors advance one Euler step. Perceived
/// objects are held fixed in the world frame between perception ticks. The
/// run ends at scenario completion, at the first footprint overlap with the
/// ego, or at the timeout.
pub fn run_once(spec: &ScenarioSpec, policy: &PolicyConfig, source: &PerceptionSource, seed: u64) -> Result<RunLog, SimError> {
    spec.validate().map_err(SimError::InvalidSpec)?;
    policy.validate().map_err(SimError::InvalidSpec)?;
    let dt = spec.dt();
    let interval = spec.perception_interval();
    let max_ticks = (spec.timeout_s * spec.tick_rate_hz).round() as u64;
    let mut perceiver = Perceiver::open(source, seed, spec.perception_rate_hz)?;

    let mut actors = spec.initial_actors();
    let lead_idx = spec.lead.map(|_| 1);
    let ped_idx = spec.pedestrian.map(|_| actors.len() - 1);
    let mut ped_phase = PedPhase::Waiting;
    let mut lead_braking = false;
    // held perception in world coordinates
    let mut held: Vec<(u64, f64, f64)> = Vec::new();
    let mut ticks = Vec::new();
    let mut min_distance = f64::INFINITY;
    let mut end = EndReason::Timeout;

    for tick in 0..=max_ticks {
        let t = tick as f64 * dt;
        let ego = actors[0];
        let mut accels = vec![0.0; actors.len()];
        if let (Some(i), Some(p)) = (ped_idx, &spec.pedestrian) {
            accels[i] = pedestrian_accel(p, &actors[i], &mut ped_phase, &ego, dt);
        }
        if let (Some(i), Some(l)) = (lead_idx, &spec.lead) {
            accels[i] = lead_accel(l, &actors[i], &mut lead_braking, dt);
        }

        let perception = if (tick as usize).is_multiple_of(interval) {
            let mut objects = Vec::with_capacity(actors.len() - 1);
            let mut visible = vec![1.0; actors.len()];
            for i in 1..actors.len() {
                let others: Vec<ActorState> = actors[1..]
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| j + 1 != i)
                    .map(|(_, a)| *a)
                    .collect();
                let (frac, occ) = compute_occlusion(&ego, &actors[i], &others);
                visible[i] = frac;
                let (x, y) = ego.relative(actors[i].x, actors[i].y);
                objects.push(WireObject { id: i as u64, x, y, occ });
            }
            let perceived = perceiver.perceive(t, objects)?;
            let mut detected = vec![false; actors.len()];
            for p in &perceived {
                if let Some(d) = detected.get_mut(p.source_id as usize) {
                    *d = true;
                }
            }
            held = perceived
                .iter()
                .map(|p| {
                    let (wx, wy) = ego.to_world(p.x, p.y);
                    (p.source_id, wx, wy)
                })
                .collect();
            Some(PerceptionRecord {
                objects: perceived,
                detected,
                visible,
            })
        } else {
            None
        };

        let view: Vec<RelativeObject> = held
            .iter()
            .map(|&(source_id, wx, wy)| {
                let (x, y) = ego.relative(wx, wy);
                RelativeObject { source_id, x, y }
            })
            .collect();
        accels[0] = driving_policy(&view, &ego, spec.cruise_speed, policy);

        let collided = actors[1..].iter().any(|a| footprints_overlap(&ego, a));
        for a in &actors[1..] {
            min_distance = min_distance.min(footprint_distance(&ego, a));
        }
        let completed = match (lead_idx, ped_idx) {
            (Some(i), _) => lead_braking && actors[i].speed == 0.0 && ego.speed == 0.0,
            (None, Some(_)) => ego.y > spec.pedestrian.map_or(0.0, |p| p.y) + spec.pass_margin,
            (None, None) => true,
        } || ego.y > spec.road_length;

        ticks.push(TickRecord {
            tick,
            t,
            actors: actors.clone(),
            accel: accels[0],
            perception,
        });
        if collided {
            end = EndReason::Collision;
            break;
        }
        if completed {
            end = EndReason::Completed;
            break;
        }
        for (a, acc) in actors.iter_mut().zip(&accels) {
            a.step(*acc, dt);
        }
    }

    let header = RunHeader {
        scenario: spec.id,
        seed,
        perception: source.label(),
        tick_rate_hz: spec.tick_rate_hz,
        perception_rate_hz: spec.perception_rate_hz,
        primary_obstacle: spec.primary_obstacle(),
        outcome: RunOutcome {
            end,
            duration_s: ticks.len() as f64 * dt,
            min_distance,
        },
    };
    Ok(RunLog { header, ticks })
}
