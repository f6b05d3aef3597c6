//! Gated one-to-one matching of ground truth to detections.
//!
//! The assignment maximizes the number of gated pairs and, among those,
//! minimizes the summed Euclidean center distance. The gated bipartite graph is
//! first split into connected components and each component is solved with
//! the Hungarian method, so frames with well separated objects stay cheap.

use crate::pem::{GroundTruthObject, PolarCoord};

/// Maximum center distance for a ground-truth/detection pair to match.
pub const DEFAULT_GATE_M: f64 = 10.0;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameMatch {
    /// `(gt index, detection index, distance)` sorted by gt index.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_gt: Vec<usize>,
    pub unmatched_det: Vec<usize>,
}

impl FrameMatch {
    /// Summed distance of the assignment, accumulated in gt order.
    pub fn total_cost(&self) -> f64 {
        self.pairs.iter().map(|p| p.2).sum()
    }

    pub fn detection_for(&self, gt_index: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == gt_index).map(|p| p.1)
    }
}

pub fn match_frame(gt: &[GroundTruthObject], detections: &[PolarCoord], gate_m: f64) -> FrameMatch {
    let positions: Vec<PolarCoord> = gt.iter().map(|o| o.position).collect();
    match_positions(&positions, detections, gate_m)
}

pub fn match_positions(gt: &[PolarCoord], detections: &[PolarCoord], gate_m: f64) -> FrameMatch {
    let ng = gt.len();
    let nd = detections.len();
    let gt_xy: Vec<(f64, f64)> = gt.iter().map(|p| p.to_cartesian()).collect();
    let det_xy: Vec<(f64, f64)> = detections.iter().map(|p| p.to_cartesian()).collect();
    let dist = |i: usize, j: usize| (gt_xy[i].0 - det_xy[j].0).hypot(gt_xy[i].1 - det_xy[j].1);

    // union-find over gt nodes 0..ng and detection nodes ng..ng+nd
    let mut parent: Vec<usize> = (0..ng + nd).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in 0..ng {
        for j in 0..nd {
            if dist(i, j) <= gate_m {
                let (a, b) = (find(&mut parent, i), find(&mut parent, ng + j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }

    let mut out = FrameMatch::default();
    let mut comp_gt: Vec<Vec<usize>> = vec![Vec::new(); ng + nd];
    let mut comp_det: Vec<Vec<usize>> = vec![Vec::new(); ng + nd];
    for i in 0..ng {
        let r = find(&mut parent, i);
        comp_gt[r].push(i);
    }
    for j in 0..nd {
        let r = find(&mut parent, ng + j);
        comp_det[r].push(j);
    }

    for root in 0..ng + nd {
        let (rows, cols) = (&comp_gt[root], &comp_det[root]);
        if rows.is_empty() || cols.is_empty() {
            continue;
        }
        if rows.len() == 1 && cols.len() == 1 {
            out.pairs.push((rows[0], cols[0], dist(rows[0], cols[0])));
            continue;
        }
        let n = rows.len().max(cols.len());
        // an unmatched slot costs more than any complete set of gated pairs,
        // so the solver maximizes cardinality before minimizing distance
        let big = gate_m * (n as f64 + 1.0) + 1.0;
        let mut cost = vec![vec![big; n]; n];
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                let d = dist(i, j);
                if d <= gate_m {
                    cost[a][b] = d;
                }
            }
        }
        let assign = hungarian(&cost);
        for (a, &b) in assign.iter().enumerate() {
            if a < rows.len() && b < cols.len() && cost[a][b] <= gate_m {
                out.pairs.push((rows[a], cols[b], dist(rows[a], cols[b])));
            }
        }
    }
    out.pairs.sort_by_key(|p| p.0);
    let mut gt_used = vec![false; ng];
    let mut det_used = vec![false; nd];
    for &(i, j, _) in &out.pairs {
        gt_used[i] = true;
        det_used[j] = true;
    }
    out.unmatched_gt = (0..ng).filter(|&i| !gt_used[i]).collect();
    out.unmatched_det = (0..nd).filter(|&j| !det_used[j]).collect();
    out
}

/// Minimum-cost perfect assignment on a square matrix. Returns the column
/// assigned to each row.
pub(crate) fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based potentials formulation
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pem::OcclusionLevel;

    fn gt_xy(id: u64, x: f64, y: f64) -> GroundTruthObject {
        GroundTruthObject {
            id,
            position: PolarCoord::from_cartesian(x, y),
            occlusion: OcclusionLevel::Vis3,
        }
    }

    fn det(x: f64, y: f64) -> PolarCoord {
        PolarCoord::from_cartesian(x, y)
    }

    #[test]
    fn single_pair_inside_gate() {
        let m = match_frame(&[gt_xy(1, 0.0, 10.0)], &[det(0.0, 14.0)], DEFAULT_GATE_M);
        assert_eq!(m.pairs.len(), 1);
        assert!((m.pairs[0].2 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn gate_excludes_far_pair() {
        let m = match_frame(&[gt_xy(1, 0.0, 10.0)], &[det(0.0, 25.0)], DEFAULT_GATE_M);
        assert!(m.pairs.is_empty());
        assert_eq!(m.unmatched_gt, vec![0]);
        assert_eq!(m.unmatched_det, vec![0]);
    }

    #[test]
    fn optimal_beats_greedy() {
        // greedy takes B-d1 (1) then A-d2 (7) = 8; optimal is A-d1 (5) + B-d2 (1) = 6
        let gts = [gt_xy(0, 0.0, 0.0), gt_xy(1, 6.0, 0.0)];
        let dets = [det(5.0, 0.0), det(7.0, 0.0)];
        let m = match_frame(&gts, &dets, DEFAULT_GATE_M);
        assert_eq!(m.pairs.iter().map(|p| (p.0, p.1)).collect::<Vec<_>>(), vec![(0, 0), (1, 1)]);
        assert!((m.total_cost() - 6.0).abs() < 1e-9);
    }

    #[test]
    fn hungarian_small_matrix() {
        let c = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = hungarian(&c);
        let total: f64 = a.iter().enumerate().map(|(i, &j)| c[i][j]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn empty_inputs() {
        let m = match_frame(&[], &[det(1.0, 1.0)], DEFAULT_GATE_M);
        assert_eq!(m.unmatched_det, vec![0]);
        let m = match_frame(&[gt_xy(3, 1.0, 1.0)], &[], DEFAULT_GATE_M);
        assert_eq!(m.unmatched_gt, vec![0]);
    }
}
