use super::actors::ActorState;
use crate::pem::{wrap_angle, OcclusionLevel};

/// Bearing interval subtended by an actor's footprint from `(ox, oy)`,
/// relative to the bearing of its center. `None` when the viewpoint lies
/// inside the footprint.
fn angular_extent(ox: f64, oy: f64, a: &ActorState) -> Option<(f64, f64, f64)> {
    let center = (a.y - oy).atan2(a.x - ox);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (cx, cy) in a.corners() {
        let d = wrap_angle((cy - oy).atan2(cx - ox) - center);
        lo = lo.min(d);
        hi = hi.max(d);
    }
    (hi - lo < std::f64::consts::PI).then_some((center, lo, hi))
}

/// Fraction of `target`'s bearing interval, seen from the ego center, not
/// covered by actors whose centers are strictly nearer than the target's.
pub fn compute_occlusion(ego: &ActorState, target: &ActorState, others: &[ActorState]) -> (f64, OcclusionLevel) {
    let Some((tc, t0, t1)) = angular_extent(ego.x, ego.y, target) else {
        return (1.0, OcclusionLevel::Vis3);
    };
    let width = t1 - t0;
    if width <= 0.0 {
        return (1.0, OcclusionLevel::Vis3);
    }
    let range = (target.x - ego.x).hypot(target.y - ego.y);
    let mut covered: Vec<(f64, f64)> = others
        .iter()
        .filter(|o| (o.x - ego.x).hypot(o.y - ego.y) < range)
        .filter_map(|o| angular_extent(ego.x, ego.y, o))
        .filter_map(|(oc, o0, o1)| {
            let shift = wrap_angle(oc - tc);
            let (lo, hi) = ((o0 + shift).max(t0), (o1 + shift).min(t1));
            (hi > lo).then_some((lo, hi))
        })
        .collect();
    covered.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut hidden = 0.0;
    let mut cursor = t0;
    for (lo, hi) in covered {
        let lo = lo.max(cursor);
        if hi > lo {
            hidden += hi - lo;
            cursor = hi;
        }
    }
    let fraction = (1.0 - hidden / width).clamp(0.0, 1.0);
    (fraction, OcclusionLevel::from_visible_fraction(fraction))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::actors::ActorKind;
    use std::f64::consts::FRAC_PI_2;

    fn ego() -> ActorState {
        ActorState::vehicle(ActorKind::Ego, 0.0, 0.0, FRAC_PI_2, 0.0)
    }

    #[test]
    fn unobstructed_target() {
        let ped = ActorState::pedestrian(0.0, 30.0, 0.0);
        assert_eq!(compute_occlusion(&ego(), &ped, &[]), (1.0, OcclusionLevel::Vis3));
    }

    #[test]
    fn fully_hidden_behind_vehicle() {
        let ped = ActorState::pedestrian(0.0, 30.0, 0.0);
        let lead = ActorState::vehicle(ActorKind::Vehicle, 0.0, 15.0, FRAC_PI_2, 0.0);
        assert_eq!(compute_occlusion(&ego(), &ped, &[lead]), (0.0, OcclusionLevel::Vis0));
    }

    #[test]
    fn farther_actor_does_not_occlude() {
        let ped = ActorState::pedestrian(0.0, 10.0, 0.0);
        let lead = ActorState::vehicle(ActorKind::Vehicle, 0.0, 15.0, FRAC_PI_2, 0.0);
        assert_eq!(compute_occlusion(&ego(), &ped, &[lead]).0, 1.0);
    }

    #[test]
    fn half_covered_pedestrian() {
        // a pedestrian seen face-on at 20 m and an occluder whose left edge
        // lies exactly on the ray through the pedestrian's center
        let ped = ActorState::pedestrian(0.0, 20.0, FRAC_PI_2);
        let mut wall = ActorState::vehicle(ActorKind::Vehicle, 0.0, 10.0, FRAC_PI_2, 0.0);
        wall.width = 2.0;
        wall.length = 0.1;
        wall.x = 1.0;
        // the wall's near face at y=9.95 spans x in [0, 2], i.e. bearings from
        // the center line to the right; its far face does not widen that
        // beyond the pedestrian's right edge
        let (f, level) = compute_occlusion(&ego(), &ped, &[wall]);
        assert!((f - 0.5).abs() < 1e-12, "{f}");
        assert_eq!(level, OcclusionLevel::Vis1);
    }

    #[test]
    fn removing_an_occluder_never_hides_more() {
        let ped = ActorState::pedestrian(-2.0, 40.0, 0.0);
        let a = ActorState::vehicle(ActorKind::Vehicle, 0.0, 20.0, FRAC_PI_2, 0.0);
        let b = ActorState::vehicle(ActorKind::Vehicle, -1.5, 30.0, FRAC_PI_2, 0.0);
        let both = compute_occlusion(&ego(), &ped, &[a, b]).0;
        assert!(compute_occlusion(&ego(), &ped, &[a]).0 >= both);
        assert!(compute_occlusion(&ego(), &ped, &[b]).0 >= both);
    }
}
