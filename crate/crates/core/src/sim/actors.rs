use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActorKind {
    Ego,
    Vehicle,
    Pedestrian,
}

/// World-frame state of a rectangular actor; `(x, y)` is the footprint center
/// and `heading` points along its length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActorState {
    pub kind: ActorKind,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub length: f64,
    pub width: f64,
}

impl ActorState {
    pub const CAR_LENGTH: f64 = 4.5;
    pub const CAR_WIDTH: f64 = 2.0;
    pub const PEDESTRIAN_SIZE: f64 = 0.5;

    pub fn vehicle(kind: ActorKind, x: f64, y: f64, heading: f64, speed: f64) -> Self {
        Self {
            kind,
            x,
            y,
            heading,
            speed,
            length: Self::CAR_LENGTH,
            width: Self::CAR_WIDTH,
        }
    }

    pub fn pedestrian(x: f64, y: f64, heading: f64) -> Self {
        Self {
            kind: ActorKind::Pedestrian,
            x,
            y,
            heading,
            speed: 0.0,
            length: Self::PEDESTRIAN_SIZE,
            width: Self::PEDESTRIAN_SIZE,
        }
    }

    pub fn forward(&self) -> (f64, f64) {
        let (s, c) = self.heading.sin_cos();
        (c, s)
    }

    /// Corners counterclockwise starting front-left.
    pub fn corners(&self) -> [(f64, f64); 4] {
        let (fx, fy) = self.forward();
        let (lx, ly) = (-fy, fx);
        let (hl, hw) = (0.5 * self.length, 0.5 * self.width);
        let at = |a: f64, b: f64| (self.x + a * fx + b * lx, self.y + a * fy + b * ly);
        [at(hl, hw), at(-hl, hw), at(-hl, -hw), at(hl, -hw)]
    }

    /// Position of `other` in this actor's frame: `x` to the right, `y` ahead.
    pub fn relative(&self, x: f64, y: f64) -> (f64, f64) {
        let (fx, fy) = self.forward();
        let (dx, dy) = (x - self.x, y - self.y);
        (dx * fy - dy * fx, dx * fx + dy * fy)
    }

    /// Inverse of [`ActorState::relative`].
    pub fn to_world(&self, rx: f64, ry: f64) -> (f64, f64) {
        let (fx, fy) = self.forward();
        (self.x + rx * fy + ry * fx, self.y - rx * fx + ry * fy)
    }

    /// One forward-Euler step: the position advances with the speed held at
    /// the start of the step, then the speed integrates `accel`, floored at 0.
    pub fn step(&mut self, accel: f64, dt: f64) {
        let (fx, fy) = self.forward();
        self.x += self.speed * dt * fx;
        self.y += self.speed * dt * fy;
        self.speed = (self.speed + accel * dt).max(0.0);
    }
}

fn seg_point_dist(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (abx, aby) = (b.0 - a.0, b.1 - a.1);
    let len2 = abx * abx + aby * aby;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * abx + (p.1 - a.1) * aby) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p.0 - (a.0 + t * abx)).hypot(p.1 - (a.1 + t * aby))
}

fn separated_along(axis: (f64, f64), a: &[(f64, f64); 4], b: &[(f64, f64); 4]) -> bool {
    let proj = |pts: &[(f64, f64); 4]| {
        pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            let v = p.0 * axis.0 + p.1 * axis.1;
            (lo.min(v), hi.max(v))
        })
    };
    let (a0, a1) = proj(a);
    let (b0, b1) = proj(b);
    a1 < b0 || b1 < a0
}

pub fn footprints_overlap(a: &ActorState, b: &ActorState) -> bool {
    let (ca, cb) = (a.corners(), b.corners());
    let axes = [a.forward(), (-a.forward().1, a.forward().0), b.forward(), (-b.forward().1, b.forward().0)];
    !axes.iter().any(|&ax| separated_along(ax, &ca, &cb))
}

/// Distance between two footprints, 0 when they touch or overlap.
pub fn footprint_distance(a: &ActorState, b: &ActorState) -> f64 {
    if footprints_overlap(a, b) {
        return 0.0;
    }
    let (ca, cb) = (a.corners(), b.corners());
    let mut best = f64::INFINITY;
    for i in 0..4 {
        let (a0, a1) = (ca[i], ca[(i + 1) % 4]);
        let (b0, b1) = (cb[i], cb[(i + 1) % 4]);
        for k in 0..4 {
            best = best.min(seg_point_dist(cb[k], a0, a1)).min(seg_point_dist(ca[k], b0, b1));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn relative_frame_for_northbound_ego() {
        let ego = ActorState::vehicle(ActorKind::Ego, 2.0, 10.0, FRAC_PI_2, 5.0);
        let (rx, ry) = ego.relative(3.0, 30.0);
        assert!((rx - 1.0).abs() < 1e-12 && (ry - 20.0).abs() < 1e-12);
        let (wx, wy) = ego.to_world(rx, ry);
        assert!((wx - 3.0).abs() < 1e-12 && (wy - 30.0).abs() < 1e-12);
    }

    #[test]
    fn euler_step_uses_old_speed() {
        let mut a = ActorState::vehicle(ActorKind::Vehicle, 0.0, 0.0, FRAC_PI_2, 10.0);
        a.step(-6.0, 0.1);
        assert!((a.y - 1.0).abs() < 1e-12);
        assert!((a.speed - 9.4).abs() < 1e-12);
        a.speed = 0.1;
        a.step(-6.0, 0.1);
        assert_eq!(a.speed, 0.0);
    }

    #[test]
    fn touching_and_overlapping_have_zero_distance() {
        let a = ActorState::vehicle(ActorKind::Ego, 0.0, 0.0, FRAC_PI_2, 0.0);
        let b = ActorState::vehicle(ActorKind::Vehicle, 0.5, 3.0, FRAC_PI_2, 0.0);
        assert_eq!(footprint_distance(&a, &b), 0.0);
    }

    #[test]
    fn bumper_gap() {
        let a = ActorState::vehicle(ActorKind::Ego, 0.0, 0.0, FRAC_PI_2, 0.0);
        let b = ActorState::vehicle(ActorKind::Vehicle, 0.0, 10.0, FRAC_PI_2, 0.0);
        assert!((footprint_distance(&a, &b) - 5.5).abs() < 1e-12);
    }

    #[test]
    fn corner_to_corner_gap() {
        let a = ActorState::vehicle(ActorKind::Ego, 0.0, 0.0, FRAC_PI_2, 0.0);
        let p = ActorState::pedestrian(1.0 + 0.25 + 3.0, 2.25 + 0.25 + 4.0, 0.0);
        assert!((footprint_distance(&a, &p) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn rotated_rectangles() {
        let a = ActorState::vehicle(ActorKind::Ego, 0.0, 0.0, 0.0, 0.0);
        let mut b = ActorState::pedestrian(0.0, 0.0, std::f64::consts::FRAC_PI_4);
        b.length = 2.0_f64.sqrt();
        b.width = 2.0_f64.sqrt();
        b.x = 2.25 + 1.0 + 0.5;
        // diamond tip sits 0.5 m ahead of the car's front face
        assert!((footprint_distance(&a, &b) - 0.5).abs() < 1e-12);
    }
}
