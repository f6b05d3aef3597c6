use serde::{Deserialize, Serialize};

use super::actors::ActorState;

/// Longitudinal driving policy: follow a cruise speed, brake for the nearest
/// object in a corridor ahead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    /// m/s², used for speed keeping in both directions.
    pub a_comf: f64,
    /// m/s², the strongest braking command.
    pub a_max: f64,
    pub corridor_half_width: f64,
    /// s
    pub headway: f64,
    /// m, the gap kept at standstill.
    pub standstill: f64,
    /// Assumed half length of a perceived object, m. Perception reports
    /// centers only.
    pub obstacle_half_length: f64,
    /// 1/s, gain of the speed-keeping loop.
    pub speed_gain: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            a_comf: 1.5,
            a_max: 6.0,
            corridor_half_width: 1.5,
            headway: 1.5,
            standstill: 2.0,
            obstacle_half_length: 0.5 * ActorState::CAR_LENGTH,
            speed_gain: 2.0,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.a_comf > 0.0 && self.a_comf <= self.a_max) {
            return Err(format!("need 0 < a_comf <= a_max (got {} and {})", self.a_comf, self.a_max));
        }
        for (name, v) in [
            ("corridor_half_width", self.corridor_half_width),
            ("headway", self.headway),
            ("standstill", self.standstill),
            ("obstacle_half_length", self.obstacle_half_length),
            ("speed_gain", self.speed_gain),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("{name} must be a non-negative number (got {v})"));
            }
        }
        Ok(())
    }

    /// Braking demand, as a positive deceleration, for a bumper gap `gap` at
    /// speed `v`. Zero at or beyond `v * headway + standstill`, rising
    /// linearly to `a_max` at the stopping distance under `a_max` plus the
    /// standstill gap.
    pub fn braking(&self, gap: f64, v: f64) -> f64 {
        let safe = v * self.headway + self.standstill;
        let hard = self.standstill + v * v / (2.0 * self.a_max);
        if gap <= hard {
            self.a_max
        } else if gap >= safe {
            0.0
        } else {
            (self.a_max * (safe - gap) / (safe - hard)).clamp(0.0, self.a_max)
        }
    }
}

/// Ego-relative position of a perceived object, x to the right, y ahead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeObject {
    pub source_id: u64,
    pub x: f64,
    pub y: f64,
}

/// Acceleration command for the ego.
pub fn driving_policy(perceived: &[RelativeObject], ego: &ActorState, cruise_speed: f64, cfg: &PolicyConfig) -> f64 {
    let v = ego.speed;
    let keep = (cfg.speed_gain * (cruise_speed - v)).clamp(-cfg.a_comf, cfg.a_comf);
    let nearest = perceived
        .iter()
        .filter(|o| o.x.abs() <= cfg.corridor_half_width && o.y > 0.0)
        .map(|o| o.y)
        .fold(f64::INFINITY, f64::min);
    if !nearest.is_finite() {
        return keep;
    }
    let gap = nearest - 0.5 * ego.length - cfg.obstacle_half_length;
    let decel = cfg.braking(gap, v);
    if decel > 0.0 {
        keep.min(-decel)
    } else {
        keep
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::actors::ActorKind;

    fn ego(v: f64) -> ActorState {
        ActorState::vehicle(ActorKind::Ego, 0.0, 0.0, std::f64::consts::FRAC_PI_2, v)
    }

    fn ahead(gap: f64, cfg: &PolicyConfig) -> RelativeObject {
        RelativeObject {
            source_id: 1,
            x: 0.0,
            y: gap + 0.5 * ActorState::CAR_LENGTH + cfg.obstacle_half_length,
        }
    }

    #[test]
    fn empty_world_accelerates() {
        let cfg = PolicyConfig::default();
        assert_eq!(driving_policy(&[], &ego(5.0), 10.0, &cfg), cfg.a_comf);
    }

    #[test]
    fn object_at_one_meter_gives_full_braking() {
        let cfg = PolicyConfig::default();
        assert_eq!(driving_policy(&[ahead(1.0, &cfg)], &ego(8.0), 10.0, &cfg), -cfg.a_max);
    }

    #[test]
    fn safe_gap_boundary_has_no_braking() {
        let cfg = PolicyConfig::default();
        let v = 8.0;
        assert_eq!(cfg.braking(v * cfg.headway + cfg.standstill, v), 0.0);
        let cmd = driving_policy(&[ahead(v * cfg.headway + cfg.standstill, &cfg)], &ego(v), 10.0, &cfg);
        assert_eq!(cmd, cfg.a_comf);
    }

    #[test]
    fn objects_outside_corridor_ignored() {
        let cfg = PolicyConfig::default();
        let side = RelativeObject {
            source_id: 2,
            x: 1.6,
            y: 5.0,
        };
        let behind = RelativeObject {
            source_id: 3,
            x: 0.0,
            y: -5.0,
        };
        assert_eq!(driving_policy(&[side, behind], &ego(5.0), 10.0, &cfg), cfg.a_comf);
    }

    #[test]
    fn braking_is_monotone_in_gap() {
        let cfg = PolicyConfig::default();
        for v in [0.0, 3.0, 7.0, 10.0, 25.0] {
            let mut last = f64::INFINITY;
            for k in 0..400 {
                let d = cfg.braking(-2.0 + 0.1 * k as f64, v);
                assert!(d <= last);
                last = d;
            }
        }
    }
}
