use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::LearnError;
use crate::pem::{GroundTruthObject, OcclusionLevel, PolarCoord};

pub const DEFAULT_FRAME_RATE_HZ: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub t: f64,
    pub gt: Vec<GroundTruthObject>,
    pub detections: Vec<PolarCoord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub name: String,
    pub frames: Vec<Frame>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerceptionDataset {
    pub scenes: Vec<Scene>,
    pub frame_rate_hz: f64,
}

impl PerceptionDataset {
    pub fn n_frames(&self) -> usize {
        self.scenes.iter().map(|s| s.frames.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.n_frames() == 0
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SceneKey {
    Num(u64),
    Text(String),
}

#[derive(Serialize, Deserialize)]
struct GtRecord {
    id: u64,
    x: f64,
    y: f64,
    occ: OcclusionLevel,
}

#[derive(Serialize, Deserialize)]
struct DetRecord {
    x: f64,
    y: f64,
}

#[derive(Serialize, Deserialize)]
struct FrameRecord {
    scene: SceneKey,
    t: f64,
    gt: Vec<GtRecord>,
    det: Vec<DetRecord>,
}

/// Reads a JSON-lines dataset, one frame per line in ego-relative Cartesian
/// meters. Frames are grouped by scene in order of first appearance and
/// sorted by time within a scene.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<PerceptionDataset, LearnError> {
    let reader = BufReader::new(File::open(path)?);
    let mut order: Vec<String> = Vec::new();
    let mut scenes: HashMap<String, Vec<Frame>> = HashMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: FrameRecord = serde_json::from_str(&line).map_err(|e| LearnError::DatasetLine {
            line: lineno + 1,
            message: e.to_string(),
        })?;
        let key = match rec.scene {
            SceneKey::Num(n) => n.to_string(),
            SceneKey::Text(s) => s,
        };
        let frame = Frame {
            t: rec.t,
            gt: rec
                .gt
                .iter()
                .map(|g| GroundTruthObject {
                    id: g.id,
                    position: PolarCoord::from_cartesian(g.x, g.y),
                    occlusion: g.occ,
                })
                .collect(),
            detections: rec.det.iter().map(|d| PolarCoord::from_cartesian(d.x, d.y)).collect(),
        };
        if !scenes.contains_key(&key) {
            order.push(key.clone());
        }
        scenes.entry(key).or_default().push(frame);
    }

    let mut out = Vec::with_capacity(order.len());
    let mut period = None;
    for name in order {
        let mut frames = scenes.remove(&name).unwrap_or_default();
        frames.sort_by(|a, b| a.t.total_cmp(&b.t));
        check_spacing(&name, &frames, &mut period)?;
        out.push(Scene { name, frames });
    }
    Ok(PerceptionDataset {
        scenes: out,
        frame_rate_hz: period.map(|p| 1.0 / p).unwrap_or(DEFAULT_FRAME_RATE_HZ),
    })
}

fn check_spacing(name: &str, frames: &[Frame], period: &mut Option<f64>) -> Result<(), LearnError> {
    for w in frames.windows(2) {
        let dt = w[1].t - w[0].t;
        if dt.is_nan() || dt <= 0.0 {
            return Err(LearnError::InvalidDataset(format!(
                "scene {name}: repeated or unordered time {}",
                w[1].t
            )));
        }
        match *period {
            None => *period = Some(dt),
            Some(p) if (dt - p).abs() > 1e-6 * p.max(1.0) => {
                return Err(LearnError::InvalidDataset(format!(
                    "scene {name}: frame spacing {dt} differs from {p}"
                )));
            }
            Some(_) => {}
        }
    }
    Ok(())
}

pub fn write_dataset(dataset: &PerceptionDataset, path: impl AsRef<Path>) -> Result<(), LearnError> {
    let mut w = BufWriter::new(File::create(path)?);
    for scene in &dataset.scenes {
        for frame in &scene.frames {
            let rec = FrameRecord {
                scene: SceneKey::Text(scene.name.clone()),
                t: frame.t,
                gt: frame
                    .gt
                    .iter()
                    .map(|g| {
                        let (x, y) = g.position.to_cartesian();
                        GtRecord {
                            id: g.id,
                            x,
                            y,
                            occ: g.occlusion,
                        }
                    })
                    .collect(),
                det: frame
                    .detections
                    .iter()
                    .map(|d| {
                        let (x, y) = d.to_cartesian();
                        DetRecord { x, y }
                    })
                    .collect(),
            };
            serde_json::to_writer(&mut w, &rec).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_mixed_scene_keys_and_sorts_frames() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        std::fs::write(
            &p,
            concat!(
                r#"{"scene": 7, "t": 0.5, "gt": [{"id": 1, "x": 0.0, "y": 10.0, "occ": 3}], "det": []}"#,
                "\n",
                r#"{"scene": "b", "t": 0.0, "gt": [], "det": [{"x": 1.0, "y": 1.0}]}"#,
                "\n\n",
                r#"{"scene": 7, "t": 0.0, "gt": [{"id": 1, "x": 0.0, "y": 10.0, "occ": 3}], "det": [{"x": 0.0, "y": 11.0}]}"#,
                "\n",
            ),
        )
        .unwrap();
        let d = read_dataset(&p).unwrap();
        assert_eq!(d.scenes.len(), 2);
        assert_eq!(d.scenes[0].name, "7");
        assert_eq!(d.scenes[0].frames[0].t, 0.0);
        assert_eq!(d.scenes[0].frames[0].detections.len(), 1);
        assert_eq!(d.frame_rate_hz, 2.0);
    }

    #[test]
    fn bad_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        std::fs::write(&p, "{\"scene\": 1, \"t\": 0.0, \"gt\": [], \"det\": []}\n{\"scene\": 1}\n").unwrap();
        let err = read_dataset(&p).unwrap_err();
        assert!(matches!(err, LearnError::DatasetLine { line: 2, .. }), "{err}");
    }

    #[test]
    fn rejects_uneven_spacing() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        let mut s = String::new();
        for t in [0.0, 0.5, 1.5] {
            s.push_str(&format!("{{\"scene\": 1, \"t\": {t}, \"gt\": [], \"det\": []}}\n"));
        }
        std::fs::write(&p, s).unwrap();
        assert!(matches!(read_dataset(&p).unwrap_err(), LearnError::InvalidDataset(_)));
    }
}
