//! Intersection of 1D elements with tissue cells.

use super::grid::TissueGrid;
use super::network::VesselMesh;
use super::TissueError;

/// For each element, the cells it crosses and the length inside each.
#[derive(Debug, Clone, PartialEq)]
pub struct LineCouplingMap {
    pub entries: Vec<Vec<(usize, f64)>>,
}

impl LineCouplingMap {
    /// Cells crossed by at least one element, as a mask over the grid.
    pub fn intersected_cells(&self, n_cells: usize) -> Vec<bool> {
        let mut mask = vec![false; n_cells];
        for list in &self.entries {
            for &(c, _) in list {
                mask[c] = true;
            }
        }
        mask
    }

    /// Intersection-length weights of element `e` (sum to one).
    pub fn weights(&self, e: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let total: f64 = self.entries[e].iter().map(|(_, l)| l).sum();
        self.entries[e].iter().map(move |&(c, l)| (c, l / total))
    }
}

/// Clips every element against the grid planes.
pub fn build_coupling(mesh: &VesselMesh, grid: &TissueGrid) -> Result<LineCouplingMap, TissueError> {
    let h = grid.spacing();
    let mut entries = Vec::with_capacity(mesh.elements.len());
    for el in &mesh.elements {
        let (p, q) = (mesh.points[el.a], mesh.points[el.b]);
        if !grid.contains(p) || !grid.contains(q) {
            return Err(TissueError::SegmentOutsideBox(mesh.segment_ids[el.segment]));
        }
        let mut ts = vec![0.0, 1.0];
        for a in 0..3 {
            let d = q[a] - p[a];
            if d == 0.0 {
                continue;
            }
            let (lo, hi) = if d > 0.0 { (p[a], q[a]) } else { (q[a], p[a]) };
            let first = (lo / h[a]).floor() as i64 + 1;
            let last = (hi / h[a]).ceil() as i64 - 1;
            for k in first..=last {
                let t = (k as f64 * h[a] - p[a]) / d;
                if t > 0.0 && t < 1.0 {
                    ts.push(t);
                }
            }
        }
        ts.sort_by(f64::total_cmp);
        let mut list: Vec<(usize, f64)> = Vec::new();
        for w in ts.windows(2) {
            let dt = w[1] - w[0];
            if dt <= 0.0 {
                continue;
            }
            let tm = 0.5 * (w[0] + w[1]);
            let mid = [0, 1, 2].map(|a| p[a] + tm * (q[a] - p[a]));
            let cell = grid
                .locate(mid)
                .ok_or(TissueError::SegmentOutsideBox(mesh.segment_ids[el.segment]))?;
            let len = dt * el.length;
            match list.iter_mut().find(|(c, _)| *c == cell) {
                Some(entry) => entry.1 += len,
                None => list.push((cell, len)),
            }
        }
        entries.push(list);
    }
    Ok(LineCouplingMap { entries })
}
