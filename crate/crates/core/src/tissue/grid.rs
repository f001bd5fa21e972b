//! Uniform structured hexahedral grid over an axis-aligned box with its
//! lower corner at the origin.

use serde::{Deserialize, Serialize};

use super::TissueError;

pub const MIN_CELLS_PER_AXIS: usize = 4;

/// Faces of the box, in the order `x-, x+, y-, y+, z-, z+`.
pub const FACE_NAMES: [&str; 6] = ["x-", "x+", "y-", "y+", "z-", "z+"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TissueGrid {
    /// Box extents, m.
    pub extents: [f64; 3],
    pub cells: [usize; 3],
}

impl TissueGrid {
    pub fn new(extents: [f64; 3], cells: [usize; 3]) -> Result<Self, TissueError> {
        let g = Self { extents, cells };
        g.validate()?;
        Ok(g)
    }

    /// Cube of side `side` with `n` cells per axis.
    pub fn cube(side: f64, n: usize) -> Result<Self, TissueError> {
        Self::new([side; 3], [n; 3])
    }

    pub fn validate(&self) -> Result<(), TissueError> {
        for a in 0..3 {
            if self.cells[a] < MIN_CELLS_PER_AXIS {
                return Err(TissueError::Grid(format!(
                    "axis {a} has {} cells, at least {MIN_CELLS_PER_AXIS} required",
                    self.cells[a]
                )));
            }
            if !(self.extents[a] > 0.0 && self.extents[a].is_finite()) {
                return Err(TissueError::Grid(format!(
                    "axis {a} extent {} must be positive",
                    self.extents[a]
                )));
            }
        }
        Ok(())
    }

    /// Spacing per axis, m.
    pub fn spacing(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| self.extents[a] / self.cells[a] as f64)
    }

    pub fn n_cells(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    /// Area of a face normal to `axis`.
    pub fn face_area(&self, axis: usize) -> f64 {
        let h = self.spacing();
        h[(axis + 1) % 3] * h[(axis + 2) % 3]
    }

    /// Linear index, x fastest.
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.cells[0] * (j + self.cells[1] * k)
    }

    pub fn ijk(&self, index: usize) -> [usize; 3] {
        let nx = self.cells[0];
        let ny = self.cells[1];
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    pub fn center(&self, index: usize) -> [f64; 3] {
        let h = self.spacing();
        let c = self.ijk(index);
        [0, 1, 2].map(|a| (c[a] as f64 + 0.5) * h[a])
    }

    /// Whether `p` lies in the closed box, with a relative slack of 1e-12.
    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|a| {
            let tol = 1e-12 * self.extents[a];
            p[a] >= -tol && p[a] <= self.extents[a] + tol
        })
    }

    /// Cell containing `p` (points on the upper faces map to the last cell).
    pub fn locate(&self, p: [f64; 3]) -> Option<usize> {
        if !self.contains(p) {
            return None;
        }
        let h = self.spacing();
        let c = [0, 1, 2].map(|a| ((p[a] / h[a]).floor().max(0.0) as usize).min(self.cells[a] - 1));
        Some(self.index(c[0], c[1], c[2]))
    }

    /// Neighbour of `index` across face `face` (see [`FACE_NAMES`]).
    pub fn neighbour(&self, index: usize, face: usize) -> Option<usize> {
        let mut c = self.ijk(index);
        let axis = face / 2;
        if face % 2 == 0 {
            if c[axis] == 0 {
                return None;
            }
            c[axis] -= 1;
        } else {
            if c[axis] + 1 == self.cells[axis] {
                return None;
            }
            c[axis] += 1;
        }
        Some(self.index(c[0], c[1], c[2]))
    }

    /// Interior faces as `(lower cell, upper cell, axis)`, in a fixed order.
    pub fn interior_faces(&self) -> Vec<(usize, usize, usize)> {
        let mut faces = Vec::new();
        for idx in 0..self.n_cells() {
            for axis in 0..3 {
                if let Some(nb) = self.neighbour(idx, 2 * axis + 1) {
                    faces.push((idx, nb, axis));
                }
            }
        }
        faces
    }

    /// Boundary faces as `(cell, face)`.
    pub fn boundary_faces(&self) -> Vec<(usize, usize)> {
        let mut faces = Vec::new();
        for idx in 0..self.n_cells() {
            for face in 0..6 {
                if self.neighbour(idx, face).is_none() {
                    faces.push((idx, face));
                }
            }
        }
        faces
    }
}

/// Volume-weighted mean of a cell field. The grid is uniform, so this is
/// the plain mean.
pub fn spatial_average(field: &[f64], grid: &TissueGrid) -> f64 {
    assert_eq!(field.len(), grid.n_cells(), "field does not match grid");
    field.iter().sum::<f64>() / field.len() as f64
}
