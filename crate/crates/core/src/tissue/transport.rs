//! Assembly of the coupled vessel/tissue advection-diffusion-reaction
//! operator shared by the oxygen and drug solvers.
//!
//! Unknowns are ordered tissue cells first, then vessel mesh points. Every
//! row is a balance of outgoing minus incoming amount per unit time.

use std::f64::consts::PI;

use super::coupling::LineCouplingMap;
use super::flow::FlowSolution;
use super::grid::TissueGrid;
use super::network::VesselMesh;
use super::sparse::{CsrMatrix, TripletBuilder};

/// Geometry and flow shared by all transport solves on one network.
pub(crate) struct TransportContext<'a> {
    pub grid: &'a TissueGrid,
    pub mesh: &'a VesselMesh,
    pub coupling: &'a LineCouplingMap,
    pub flow: &'a FlowSolution,
    pub throughflow: Vec<f64>,
    pub point_volume: Vec<f64>,
    pub boundary_faces: Vec<(usize, usize)>,
}

impl<'a> TransportContext<'a> {
    pub fn new(
        grid: &'a TissueGrid,
        mesh: &'a VesselMesh,
        coupling: &'a LineCouplingMap,
        flow: &'a FlowSolution,
    ) -> Self {
        let mut point_volume = vec![0.0; mesh.n_points()];
        for el in &mesh.elements {
            let v = 0.5 * PI * el.radius * el.radius * el.length;
            point_volume[el.a] += v;
            point_volume[el.b] += v;
        }
        Self {
            grid,
            mesh,
            coupling,
            flow,
            throughflow: flow.point_throughflow(mesh),
            point_volume,
            boundary_faces: grid.boundary_faces(),
        }
    }

    pub fn n_unknowns(&self) -> usize {
        self.grid.n_cells() + self.mesh.n_points()
    }
}

/// Coefficients of one species.
pub(crate) struct Species<'a> {
    pub d_tissue: f64,
    pub d_vessel: f64,
    pub permeability: f64,
    pub reflection: f64,
    pub beta: f64,
    pub c_far: f64,
    /// Which box faces carry the Robin condition (others are sealed).
    pub robin_faces: [bool; 6],
    /// First-order tissue sink per cell, 1/s.
    pub sink: &'a [f64],
    /// Lymphatic drainage rate per unit volume, 1/s, per cell.
    pub lymph_rate: &'a [f64],
    /// Advected amount per dissolved amount at each point (1 for a free
    /// solute, larger with carrier binding).
    pub capacity: Option<&'a [f64]>,
    pub inlet_value: f64,
}

/// Assembled `A x = b`; `transient` adds `V / dt` storage with previous
/// state `x_old`.
pub(crate) fn assemble(
    ctx: &TransportContext,
    sp: &Species,
    transient: Option<(f64, &[f64])>,
) -> (CsrMatrix, Vec<f64>) {
    let grid = ctx.grid;
    let mesh = ctx.mesh;
    let nc = grid.n_cells();
    let n = ctx.n_unknowns();
    let vol = grid.cell_volume();
    let h = grid.spacing();
    let mut a = TripletBuilder::new(n);
    let mut b = vec![0.0; n];
    let dirichlet = |i: usize| mesh.is_dirichlet(i);

    // tissue diffusion and upwind advection
    for (f, &(lo, hi, axis)) in ctx.flow.faces.iter().enumerate() {
        let t = sp.d_tissue * grid.face_area(axis) / h[axis];
        let q = ctx.flow.face_flux[f];
        let (qp, qm) = (q.max(0.0), (-q).max(0.0));
        a.add(lo, lo, t + qp);
        a.add(lo, hi, -t - qm);
        a.add(hi, hi, t + qm);
        a.add(hi, lo, -t - qp);
    }
    if sp.beta > 0.0 {
        for &(c, face) in &ctx.boundary_faces {
            if !sp.robin_faces[face] {
                continue;
            }
            let axis = face / 2;
            let g = grid.face_area(axis) / (0.5 * h[axis] / sp.d_tissue + 1.0 / sp.beta);
            a.add(c, c, g);
            b[c] += g * sp.c_far;
        }
    }
    for c in 0..nc {
        a.add(c, c, (sp.sink[c] + sp.lymph_rate[c]) * vol);
    }

    // vessels: inlet rows, upwind advection, axial diffusion
    let cap = |i: usize| sp.capacity.map_or(1.0, |k| k[i]);
    for i in 0..mesh.n_points() {
        let row = nc + i;
        if dirichlet(i) {
            a.add(row, row, 1.0);
            b[row] = sp.inlet_value;
        } else {
            a.add(row, row, ctx.throughflow[i] * cap(i));
        }
    }
    for (el, &q) in mesh.elements.iter().zip(&ctx.flow.q) {
        let (up, down) = if q >= 0.0 { (el.a, el.b) } else { (el.b, el.a) };
        if !dirichlet(down) {
            a.add(nc + down, nc + up, -q.abs() * cap(up));
        }
        let k = PI * el.radius * el.radius * sp.d_vessel / el.length;
        if k > 0.0 {
            for (p, o) in [(el.a, el.b), (el.b, el.a)] {
                if !dirichlet(p) {
                    a.add(nc + p, nc + p, k);
                    a.add(nc + p, nc + o, -k);
                }
            }
        }
    }

    // wall exchange J = g_d (m_v - m_t) + (1 - sigma) F (m_v + m_t) / 2
    for (e, el) in mesh.elements.iter().enumerate() {
        let gd = 2.0 * PI * el.radius * el.length * sp.permeability;
        let adv = 0.5 * (1.0 - sp.reflection) * ctx.flow.exchange[e];
        let (kv, kt) = (gd + adv, adv - gd);
        if kv == 0.0 && kt == 0.0 {
            continue;
        }
        let mut cols: Vec<(usize, f64)> = vec![(nc + el.a, 0.5 * kv), (nc + el.b, 0.5 * kv)];
        let weights: Vec<(usize, f64)> = ctx.coupling.weights(e).collect();
        cols.extend(weights.iter().map(|&(c, w)| (c, w * kt)));
        for (p, share) in [(el.a, 0.5), (el.b, 0.5)] {
            if dirichlet(p) {
                continue;
            }
            for &(col, v) in &cols {
                a.add(nc + p, col, share * v);
            }
        }
        for &(c, w) in &weights {
            for &(col, v) in &cols {
                a.add(c, col, -w * v);
            }
        }
    }

    if let Some((dt, old)) = transient {
        for c in 0..nc {
            a.add(c, c, vol / dt);
            b[c] += vol / dt * old[c];
        }
        for i in 0..mesh.n_points() {
            if !dirichlet(i) {
                let m = ctx.point_volume[i] * cap(i) / dt;
                a.add(nc + i, nc + i, m);
                b[nc + i] += m * old[nc + i];
            }
        }
    }
    (a.build(), b)
}

/// Lymphatic drainage rate per unit tissue volume in each cell, 1/s.
pub(crate) fn lymph_rates(flow: &FlowSolution, grid: &TissueGrid) -> Vec<f64> {
    let vol = grid.cell_volume();
    flow.lymph.iter().map(|l| l / vol).collect()
}

/// Wall exchange of each element for a given state, mol/s out of the vessel.
pub(crate) fn exchange_flux(ctx: &TransportContext, sp: &Species, x: &[f64]) -> Vec<f64> {
    let nc = ctx.grid.n_cells();
    ctx.mesh
        .elements
        .iter()
        .enumerate()
        .map(|(e, el)| {
            let mv = 0.5 * (x[nc + el.a] + x[nc + el.b]);
            let mt: f64 = ctx.coupling.weights(e).map(|(c, w)| w * x[c]).sum();
            let gd = 2.0 * PI * el.radius * el.length * sp.permeability;
            gd * (mv - mt) + 0.5 * (1.0 - sp.reflection) * ctx.flow.exchange[e] * (mv + mt)
        })
        .collect()
}
