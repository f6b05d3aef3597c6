use serde::{Deserialize, Serialize};

use super::actors::{ActorKind, ActorState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ScenarioId {
    #[serde(rename = "TC1", alias = "tc1")]
    Tc1,
    #[serde(rename = "TC2", alias = "tc2")]
    Tc2,
    #[serde(rename = "TC3", alias = "tc3")]
    Tc3,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 3] = [Self::Tc1, Self::Tc2, Self::Tc3];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Tc1 => "TC1",
            Self::Tc2 => "TC2",
            Self::Tc3 => "TC3",
        }
    }
}

impl std::fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ScenarioId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "TC1" => Ok(Self::Tc1),
            "TC2" => Ok(Self::Tc2),
            "TC3" => Ok(Self::Tc3),
            _ => Err(format!("unknown scenario {s:?} (expected TC1, TC2 or TC3)")),
        }
    }
}

/// A pedestrian waiting beside the road who walks across once the ego would
/// reach its crossing line no later than it reaches the lane center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PedestrianScript {
    pub x_start: f64,
    pub x_end: f64,
    pub y: f64,
    pub walk_speed: f64,
    pub walk_accel: f64,
    pub lane_center_x: f64,
}

impl PedestrianScript {
    /// Time to walk from the start to the lane center, starting at rest.
    pub fn time_to_lane_center(&self) -> f64 {
        let d = (self.lane_center_x - self.x_start).abs();
        let t_ramp = self.walk_speed / self.walk_accel;
        let d_ramp = 0.5 * self.walk_accel * t_ramp * t_ramp;
        if d <= d_ramp {
            (2.0 * d / self.walk_accel).sqrt()
        } else {
            t_ramp + (d - d_ramp) / self.walk_speed
        }
    }
}

/// A vehicle ahead of the ego in its lane that drives at constant speed and
/// then brakes to stop at `stop_y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeadScript {
    /// Initial center-to-center distance ahead of the ego, m.
    pub gap: f64,
    pub speed: f64,
    pub brake_decel: f64,
    pub stop_y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub id: ScenarioId,
    pub road_length: f64,
    pub ego_speed: f64,
    pub cruise_speed: f64,
    pub tick_rate_hz: f64,
    pub perception_rate_hz: f64,
    pub timeout_s: f64,
    /// The run completes once the ego is this far past the pedestrian line
    /// (scenarios without a lead vehicle).
    pub pass_margin: f64,
    pub pedestrian: Option<PedestrianScript>,
    pub lead: Option<LeadScript>,
}

impl ScenarioSpec {
    pub fn tc1() -> Self {
        Self {
            id: ScenarioId::Tc1,
            road_length: 500.0,
            ego_speed: 10.0,
            cruise_speed: 10.0,
            tick_rate_hz: 10.0,
            perception_rate_hz: 2.0,
            timeout_s: 70.0,
            pass_margin: 20.0,
            pedestrian: Some(PedestrianScript {
                x_start: -4.0,
                x_end: 4.0,
                y: 400.0,
                walk_speed: 0.8,
                walk_accel: 2.0,
                lane_center_x: 0.0,
            }),
            lead: None,
        }
    }

    pub fn tc2() -> Self {
        Self {
            id: ScenarioId::Tc2,
            road_length: 600.0,
            ego_speed: 7.0,
            cruise_speed: 10.0,
            tick_rate_hz: 10.0,
            perception_rate_hz: 2.0,
            timeout_s: 120.0,
            pass_margin: 20.0,
            pedestrian: None,
            lead: Some(LeadScript {
                gap: 30.0,
                speed: 7.0,
                brake_decel: 2.0,
                stop_y: 500.0,
            }),
        }
    }

    pub fn tc3() -> Self {
        Self {
            id: ScenarioId::Tc3,
            pedestrian: Some(PedestrianScript {
                x_start: -2.5,
                x_end: 4.0,
                y: 300.0,
                walk_speed: 0.8,
                walk_accel: 2.0,
                lane_center_x: 0.0,
            }),
            ..Self::tc2()
        }
    }

    pub fn standard(id: ScenarioId) -> Self {
        match id {
            ScenarioId::Tc1 => Self::tc1(),
            ScenarioId::Tc2 => Self::tc2(),
            ScenarioId::Tc3 => Self::tc3(),
        }
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.tick_rate_hz
    }

    /// Simulation ticks per perception update.
    pub fn perception_interval(&self) -> usize {
        (self.tick_rate_hz / self.perception_rate_hz).round() as usize
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.tick_rate_hz > 0.0 && self.perception_rate_hz > 0.0) {
            return Err("rates must be positive".into());
        }
        let ratio = self.tick_rate_hz / self.perception_rate_hz;
        if ratio < 1.0 || (ratio - ratio.round()).abs() > 1e-9 {
            return Err(format!(
                "perception rate {} Hz does not divide tick rate {} Hz",
                self.perception_rate_hz, self.tick_rate_hz
            ));
        }
        if !(self.ego_speed >= 0.0 && self.cruise_speed >= 0.0 && self.timeout_s > 0.0) {
            return Err("speeds must be non-negative and the timeout positive".into());
        }
        if let Some(p) = &self.pedestrian {
            if !(p.walk_speed > 0.0 && p.walk_accel > 0.0) {
                return Err("pedestrian walk speed and acceleration must be positive".into());
            }
        }
        if let Some(l) = &self.lead {
            if !(l.gap > ActorState::CAR_LENGTH && l.speed >= 0.0 && l.brake_decel > 0.0) {
                return Err("lead vehicle needs a gap above one car length and positive braking".into());
            }
        }
        if self.pedestrian.is_none() && self.lead.is_none() {
            return Err("scenario has no obstacle".into());
        }
        Ok(())
    }

    /// Initial states: the ego followed by the lead vehicle and the
    /// pedestrian, when present. Obstacle ids are their index in this list.
    pub fn initial_actors(&self) -> Vec<ActorState> {
        let north = std::f64::consts::FRAC_PI_2;
        let mut actors = vec![ActorState::vehicle(ActorKind::Ego, 0.0, 0.0, north, self.ego_speed)];
        if let Some(l) = &self.lead {
            actors.push(ActorState::vehicle(ActorKind::Vehicle, 0.0, l.gap, north, l.speed));
        }
        if let Some(p) = &self.pedestrian {
            let heading = if p.x_end >= p.x_start { 0.0 } else { std::f64::consts::PI };
            actors.push(ActorState::pedestrian(p.x_start, p.y, heading));
        }
        actors
    }

    /// Index into [`ScenarioSpec::initial_actors`] of the obstacle whose
    /// perception is scored: the pedestrian if any, else the lead vehicle.
    pub fn primary_obstacle(&self) -> usize {
        if self.pedestrian.is_some() {
            actor_count(self) - 1
        } else {
            1
        }
    }
}

fn actor_count(spec: &ScenarioSpec) -> usize {
    1 + spec.lead.is_some() as usize + spec.pedestrian.is_some() as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_then_cruise_walk_time() {
        let p = ScenarioSpec::tc1().pedestrian.unwrap();
        // 0.4 s ramp over 0.16 m, then 3.84 m at 0.8 m/s
        assert!((p.time_to_lane_center() - 5.2).abs() < 1e-12);
    }

    #[test]
    fn standard_specs_validate() {
        for id in ScenarioId::ALL {
            let s = ScenarioSpec::standard(id);
            s.validate().unwrap();
            assert_eq!(s.perception_interval(), 5);
        }
    }

    #[test]
    fn rate_must_divide() {
        let mut s = ScenarioSpec::tc1();
        s.perception_rate_hz = 3.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn primary_obstacles() {
        assert_eq!(ScenarioSpec::tc1().primary_obstacle(), 1);
        assert_eq!(ScenarioSpec::tc2().primary_obstacle(), 1);
        assert_eq!(ScenarioSpec::tc3().primary_obstacle(), 2);
        assert_eq!(ScenarioSpec::tc3().initial_actors()[2].kind, ActorKind::Pedestrian);
    }

    #[test]
    fn ids_parse_both_cases() {
        assert_eq!("tc2".parse::<ScenarioId>().unwrap(), ScenarioId::Tc2);
        assert_eq!(serde_json::to_string(&ScenarioId::Tc3).unwrap(), "\"TC3\"");
    }
}
