use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{wrap_angle, ModelError};

/// Ego-relative polar position. The ego sits at the origin facing +y; `theta`
/// is measured counterclockwise from the ego heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarCoord {
    pub r: f64,
    pub theta: f64,
}

impl PolarCoord {
    pub fn new(r: f64, theta: f64) -> Self {
        Self {
            r: r.max(0.0),
            theta: wrap_angle(theta),
        }
    }

    /// From ego-relative Cartesian meters (x to the right, y forward).
    pub fn from_cartesian(x: f64, y: f64) -> Self {
        Self {
            r: x.hypot(y),
            theta: wrap_angle((-x).atan2(y)),
        }
    }

    pub fn to_cartesian(self) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (-self.r * s, self.r * c)
    }

    pub fn is_valid(&self) -> bool {
        self.r.is_finite() && self.r >= 0.0 && self.theta > -PI && self.theta <= PI
    }
}

/// Visible fraction of an object from the ego, binned in four levels:
/// `[0, 0.4)`, `[0.4, 0.6)`, `[0.6, 0.8)`, `[0.8, 1.0]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum OcclusionLevel {
    Vis0 = 0,
    Vis1 = 1,
    Vis2 = 2,
    Vis3 = 3,
}

impl OcclusionLevel {
    pub const ALL: [OcclusionLevel; 4] = [Self::Vis0, Self::Vis1, Self::Vis2, Self::Vis3];
    pub const COUNT: usize = 4;

    pub fn from_visible_fraction(fraction: f64) -> Self {
        if fraction < 0.4 {
            Self::Vis0
        } else if fraction < 0.6 {
            Self::Vis1
        } else if fraction < 0.8 {
            Self::Vis2
        } else {
            Self::Vis3
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

impl TryFrom<u8> for OcclusionLevel {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Self::from_index(v as usize).ok_or_else(|| format!("occlusion level {v} out of 0..=3"))
    }
}

impl From<OcclusionLevel> for u8 {
    fn from(o: OcclusionLevel) -> u8 {
        o as u8
    }
}

/// Polar grid partition around the ego. Sector 0 starts at `theta = 0` and
/// sectors advance counterclockwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub sector_width_deg: f64,
    pub ring_depth_m: f64,
    pub max_radius_m: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            sector_width_deg: 30.0,
            ring_depth_m: 10.0,
            max_radius_m: 100.0,
        }
    }
}

impl GridSpec {
    pub fn new(sector_width_deg: f64, ring_depth_m: f64, max_radius_m: f64) -> Result<Self, ModelError> {
        let g = Self {
            sector_width_deg,
            ring_depth_m,
            max_radius_m,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidGrid(m));
        if !(self.sector_width_deg.is_finite() && self.sector_width_deg > 0.0 && self.sector_width_deg <= 360.0) {
            return bad(format!("sector_width_deg {} not in (0, 360]", self.sector_width_deg));
        }
        let sectors = 360.0 / self.sector_width_deg;
        if (sectors - sectors.round()).abs() > 1e-9 {
            return bad(format!("sector_width_deg {} does not divide 360", self.sector_width_deg));
        }
        if !(self.ring_depth_m.is_finite() && self.ring_depth_m > 0.0) {
            return bad(format!("ring_depth_m {} must be positive", self.ring_depth_m));
        }
        if !(self.max_radius_m.is_finite() && self.max_radius_m >= self.ring_depth_m) {
            return bad(format!("max_radius_m {} must be at least ring_depth_m", self.max_radius_m));
        }
        let rings = self.max_radius_m / self.ring_depth_m;
        if (rings - rings.round()).abs() > 1e-9 {
            return bad(format!(
                "max_radius_m {} is not a multiple of ring_depth_m {}",
                self.max_radius_m, self.ring_depth_m
            ));
        }
        Ok(())
    }

    pub fn sector_width(&self) -> f64 {
        self.sector_width_deg.to_radians()
    }

    pub fn n_sectors(&self) -> usize {
        (360.0 / self.sector_width_deg).round() as usize
    }

    pub fn n_rings(&self) -> usize {
        (self.max_radius_m / self.ring_depth_m).round() as usize
    }

    pub fn n_cells(&self) -> usize {
        self.n_rings() * self.n_sectors()
    }

    pub fn n_conditions(&self) -> usize {
        OcclusionLevel::COUNT * self.n_cells()
    }

    pub fn sector_of(&self, theta: f64) -> usize {
        let n = self.n_sectors();
        let a = theta.rem_euclid(2.0 * PI);
        ((a / self.sector_width()).floor() as usize).min(n - 1)
    }

    /// Resolves the condition of a position. `None` when the object lies at or
    /// beyond `max_radius_m`.
    pub fn condition_of(&self, position: PolarCoord, occlusion: OcclusionLevel) -> Option<Condition> {
        if position.r.is_nan() || position.r >= self.max_radius_m {
            return None;
        }
        let ring = ((position.r / self.ring_depth_m).floor() as usize).min(self.n_rings() - 1);
        Some(Condition {
            occlusion,
            ring,
            sector: self.sector_of(position.theta),
        })
    }

    pub fn condition_index(&self, c: Condition) -> usize {
        c.occlusion.index() * self.n_cells() + c.ring * self.n_sectors() + c.sector
    }

    pub fn condition_at(&self, index: usize) -> Option<Condition> {
        if index >= self.n_conditions() {
            return None;
        }
        let cells = self.n_cells();
        let occ = index / cells;
        let cell = index % cells;
        Some(Condition {
            occlusion: OcclusionLevel::from_index(occ)?,
            ring: cell / self.n_sectors(),
            sector: cell % self.n_sectors(),
        })
    }

    /// Center of a grid cell, useful for placing synthetic objects.
    pub fn cell_center(&self, ring: usize, sector: usize) -> PolarCoord {
        PolarCoord::new(
            (ring as f64 + 0.5) * self.ring_depth_m,
            (sector as f64 + 0.5) * self.sector_width(),
        )
    }
}

/// One partition of the model: an occlusion level crossed with a grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Condition {
    pub occlusion: OcclusionLevel,
    pub ring: usize,
    pub sector: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_grid_example() {
        let g = GridSpec::default();
        let c = g.condition_of(PolarCoord::new(15.0, 0.1), OcclusionLevel::Vis3).unwrap();
        assert_eq!(c.occlusion, OcclusionLevel::Vis3);
        assert_eq!(c.ring, 1);
        assert_eq!(c.sector, 0);
        assert_eq!(g.condition_index(c), 3 * 120 + 12);
    }

    #[test]
    fn origin_is_innermost_ring() {
        let g = GridSpec::default();
        let c = g.condition_of(PolarCoord::new(0.0, 0.0), OcclusionLevel::Vis0).unwrap();
        assert_eq!((c.ring, c.sector, g.condition_index(c)), (0, 0, 0));
    }

    #[test]
    fn max_radius_is_exclusive() {
        let g = GridSpec::default();
        assert!(g.condition_of(PolarCoord::new(100.0, 0.0), OcclusionLevel::Vis3).is_none());
        assert!(g.condition_of(PolarCoord::new(99.999, 0.0), OcclusionLevel::Vis3).is_some());
    }

    #[test]
    fn negative_angles_map_to_upper_sectors() {
        let g = GridSpec::default();
        assert_eq!(g.sector_of(-0.1), 11);
        assert_eq!(g.sector_of(PI), 6);
    }

    #[test]
    fn default_grid_has_480_conditions() {
        assert_eq!(GridSpec::default().n_conditions(), 480);
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(35.0, 10.0, 100.0).is_err());
        assert!(GridSpec::new(30.0, 10.0, 95.0).is_err());
        assert!(GridSpec::new(90.0, 10.0, 20.0).is_ok());
    }

    #[test]
    fn occlusion_bins() {
        use OcclusionLevel::*;
        let cases = [(0.0, Vis0), (0.39, Vis0), (0.4, Vis1), (0.5, Vis1), (0.6, Vis2), (0.8, Vis3), (1.0, Vis3)];
        for (f, want) in cases {
            assert_eq!(OcclusionLevel::from_visible_fraction(f), want, "fraction {f}");
        }
    }

    #[test]
    fn cartesian_convention() {
        let p = PolarCoord::from_cartesian(0.0, 10.0);
        assert_eq!((p.r, p.theta), (10.0, 0.0));
        let left = PolarCoord::from_cartesian(-5.0, 0.0);
        assert!((left.theta - PI / 2.0).abs() < 1e-15);
        let behind = PolarCoord::from_cartesian(0.0, -3.0);
        assert_eq!(behind.theta, PI);
        let (x, y) = PolarCoord::new(2.0, -PI / 2.0).to_cartesian();
        assert!((x - 2.0).abs() < 1e-12 && y.abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn condition_index_is_a_bijection(occ in 0usize..4, ring in 0usize..10, sector in 0usize..12) {
            let g = GridSpec::default();
            let c = Condition { occlusion: OcclusionLevel::from_index(occ).unwrap(), ring, sector };
            let i = g.condition_index(c);
            proptest::prop_assert_eq!(g.condition_at(i), Some(c));
            // the cell center resolves back to the same condition
            let center = g.cell_center(ring, sector);
            proptest::prop_assert_eq!(g.condition_of(center, c.occlusion), Some(c));
        }
    }
}
