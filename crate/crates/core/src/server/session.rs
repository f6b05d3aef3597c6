use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::protocol::{ErrorCode, WireMessage, WireObject, WirePerceived};
use crate::pem::{apply, load_model, GroundTruthObject, ModelError, PemModel, PolarCoord, TrackState};

/// Read-only set of named models served to sessions.
#[derive(Debug, Clone, Default)]
pub struct ModelRegistry {
    models: BTreeMap<String, Arc<PemModel>>,
}

impl ModelRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, model: PemModel) {
        self.models.insert(name.into(), Arc::new(model));
    }

    /// Loads a model file registered under `name`, or under the file stem
    /// when `name` is `None`.
    pub fn load(&mut self, name: Option<&str>, path: &Path) -> Result<String, ModelError> {
        let model = load_model(path)?;
        let name = match name {
            Some(n) => n.to_string(),
            None => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "model".into()),
        };
        self.insert(name.clone(), model);
        Ok(name)
    }

    pub fn get(&self, name: &str) -> Option<Arc<PemModel>> {
        self.models.get(name).cloned()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.models.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }
}

/// Per-connection perception state.
///
/// The generator of a session is ChaCha8 seeded with the base seed, on the
/// stream numbered by how many resets happened so far.
#[derive(Debug, Clone)]
pub struct Session {
    pub model_id: String,
    model: Arc<PemModel>,
    seed: u64,
    resets: u64,
    rng: ChaCha8Rng,
    tracks: TrackState,
    frames: u64,
    last_t: Option<f64>,
    pub rate_hz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameError {
    pub code: ErrorCode,
    pub message: String,
}

impl FrameError {
    fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for FrameError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for FrameError {}

fn session_rng(seed: u64, resets: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(resets);
    rng
}

impl Session {
    pub fn new(model_id: impl Into<String>, model: Arc<PemModel>, seed: u64, rate_hz: f64) -> Self {
        Self {
            model_id: model_id.into(),
            model,
            seed,
            resets: 0,
            rng: session_rng(seed, 0),
            tracks: TrackState::new(),
            frames: 0,
            last_t: None,
            rate_hz,
        }
    }

    pub fn model(&self) -> &PemModel {
        &self.model
    }

    pub fn frames(&self) -> u64 {
        self.frames
    }

    pub fn resets(&self) -> u64 {
        self.resets
    }

    pub fn reset(&mut self) {
        self.resets += 1;
        self.rng = session_rng(self.seed, self.resets);
        self.tracks.clear();
        self.frames = 0;
        self.last_t = None;
    }

    /// Perceives one frame of ego-relative Cartesian objects. A rejected
    /// frame leaves the session unchanged.
    pub fn process_frame(&mut self, t: f64, objects: &[WireObject]) -> Result<Vec<WirePerceived>, FrameError> {
        if !t.is_finite() {
            return Err(FrameError::new(ErrorCode::InvalidFrame, format!("time {t} is not finite")));
        }
        if let Some(prev) = self.last_t {
            if t <= prev {
                return Err(FrameError::new(
                    ErrorCode::TimeRegression,
                    format!("time {t} does not follow {prev}"),
                ));
            }
        }
        if let Some(o) = objects.iter().find(|o| !(o.x.is_finite() && o.y.is_finite())) {
            return Err(FrameError::new(
                ErrorCode::InvalidFrame,
                format!("object {} has a non-finite position", o.id),
            ));
        }
        let world: Vec<GroundTruthObject> = objects
            .iter()
            .map(|o| GroundTruthObject {
                id: o.id,
                position: PolarCoord::from_cartesian(o.x, o.y),
                occlusion: o.occ,
            })
            .collect();
        let perceived = apply(&self.model, &world, &mut self.tracks, &mut self.rng).map_err(|e| match e {
            ModelError::DuplicateId(id) => FrameError::new(ErrorCode::DuplicateId, format!("object id {id} repeated")),
            other => FrameError::new(ErrorCode::InvalidFrame, other.to_string()),
        })?;
        self.last_t = Some(t);
        self.frames += 1;
        Ok(perceived
            .into_iter()
            .map(|p| {
                let (x, y) = p.position.to_cartesian();
                WirePerceived {
                    source_id: p.source_id,
                    x,
                    y,
                }
            })
            .collect())
    }
}

/// Protocol state machine of one connection, independent of transport.
#[derive(Debug)]
pub struct Connection {
    registry: Arc<ModelRegistry>,
    session: Option<Session>,
    closed: bool,
}

impl Connection {
    pub fn new(registry: Arc<ModelRegistry>) -> Self {
        Self {
            registry,
            session: None,
            closed: false,
        }
    }

    pub fn session(&self) -> Option<&Session> {
        self.session.as_ref()
    }

    /// True once a `shutdown` request was acknowledged.
    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Handles one request line and returns exactly one reply.
    pub fn handle_line(&mut self, line: &str) -> WireMessage {
        match WireMessage::parse(line) {
            Ok(msg) => self.handle(msg),
            Err(e) => WireMessage::error(ErrorCode::Malformed, e.to_string()),
        }
    }

    pub fn handle(&mut self, msg: WireMessage) -> WireMessage {
        match msg {
            WireMessage::Init { model, seed, rate_hz } => {
                if self.session.is_some() {
                    return WireMessage::error(ErrorCode::UnexpectedMessage, "session already initialized");
                }
                match self.registry.get(&model) {
                    Some(m) => {
                        self.session = Some(Session::new(model, m, seed, rate_hz));
                        WireMessage::ack("init")
                    }
                    None => WireMessage::error(ErrorCode::UnknownModel, format!("no model named {model:?}")),
                }
            }
            WireMessage::Frame { t, objects } => match self.session.as_mut() {
                None => WireMessage::error(ErrorCode::NotInitialized, "send init before frames"),
                Some(s) => match s.process_frame(t, &objects) {
                    Ok(objects) => WireMessage::Response { t, objects },
                    Err(e) => WireMessage::Error {
                        code: e.code,
                        message: e.message,
                    },
                },
            },
            WireMessage::Reset {} => {
                if let Some(s) = self.session.as_mut() {
                    s.reset();
                }
                WireMessage::ack("reset")
            }
            WireMessage::Shutdown {} => {
                self.closed = true;
                WireMessage::ack("shutdown")
            }
            WireMessage::Response { .. } | WireMessage::Error { .. } | WireMessage::Ack { .. } => {
                WireMessage::error(ErrorCode::UnexpectedMessage, "servers only accept requests")
            }
        }
    }
}
