//! Steady Darcy/Poiseuille flow with Starling exchange and lymphatic
//! drainage, and hematocrit transport on the resulting vessel flow.

use std::f64::consts::PI;

use crate::params::FlowParams;

use super::coupling::LineCouplingMap;
use super::grid::TissueGrid;
use super::network::{PointBoundary, VesselMesh};
use super::sparse::{solve, SolverOptions, TripletBuilder};
use super::TissueError;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution {
    /// Tissue pressure per cell, Pa.
    pub p_t: Vec<f64>,
    /// Vessel pressure per mesh point, Pa.
    pub p_v: Vec<f64>,
    /// Volumetric flow through each element from `a` to `b`, m^3/s.
    pub q: Vec<f64>,
    /// Fluid leaving each element through its wall, m^3/s.
    pub exchange: Vec<f64>,
    /// Interior faces `(lower, upper, axis)` and the flow across them, m^3/s.
    pub faces: Vec<(usize, usize, usize)>,
    pub face_flux: Vec<f64>,
    /// Lymphatic drainage per cell, m^3/s.
    pub lymph: Vec<f64>,
    /// Flow entering the network at inlets and leaving at outlets, m^3/s.
    pub inflow: f64,
    pub outflow: f64,
    /// Largest of the network and tissue balance defects relative to the
    /// inflow.
    pub mass_balance_residual: f64,
}

impl FlowSolution {
    /// No vessels and tissue at rest at pressure `p`.
    pub fn quiescent(grid: &TissueGrid, p: f64) -> Self {
        let faces = grid.interior_faces();
        Self {
            p_t: vec![p; grid.n_cells()],
            p_v: Vec::new(),
            q: Vec::new(),
            exchange: Vec::new(),
            face_flux: vec![0.0; faces.len()],
            faces,
            lymph: vec![0.0; grid.n_cells()],
            inflow: 0.0,
            outflow: 0.0,
            mass_balance_residual: 0.0,
        }
    }

    /// Mean velocity of each element, m/s.
    pub fn element_velocity(&self, mesh: &VesselMesh) -> Vec<f64> {
        self.q
            .iter()
            .zip(&mesh.elements)
            .map(|(q, el)| q / (PI * el.radius * el.radius))
            .collect()
    }

    /// Net fluid leaving the vessels at each point through the wall of the
    /// adjacent elements (half of each element), m^3/s.
    pub fn point_loss(&self, mesh: &VesselMesh) -> Vec<f64> {
        let mut loss = vec![0.0; mesh.n_points()];
        for (el, f) in mesh.elements.iter().zip(&self.exchange) {
            loss[el.a] += 0.5 * f;
            loss[el.b] += 0.5 * f;
        }
        loss
    }

    /// Volume leaving each point downstream (through elements or the
    /// outlet boundary): inflow minus wall loss, m^3/s. Inlet points use the
    /// element outflow plus their wall loss as inflow.
    pub fn point_throughflow(&self, mesh: &VesselMesh) -> Vec<f64> {
        let loss = self.point_loss(mesh);
        let mut inflow = vec![0.0; mesh.n_points()];
        let mut outflow = vec![0.0; mesh.n_points()];
        for (el, &q) in mesh.elements.iter().zip(&self.q) {
            let (up, down) = if q >= 0.0 { (el.a, el.b) } else { (el.b, el.a) };
            inflow[down] += q.abs();
            outflow[up] += q.abs();
        }
        (0..mesh.n_points())
            .map(|i| match mesh.boundary[i] {
                PointBoundary::Inlet { .. } => outflow[i],
                _ => inflow[i] - loss[i],
            })
            .collect()
    }
}

/// Starling filtration coefficient of an element, m^3/(Pa s).
fn wall_conductance(radius: f64, length: f64, lp: f64) -> f64 {
    2.0 * PI * radius * lp * length
}

/// Poiseuille conductance of an element, m^3/(Pa s).
pub fn poiseuille_conductance(radius: f64, length: f64, mu: f64) -> f64 {
    PI * radius.powi(4) / (8.0 * mu * length)
}

pub fn solve_flow(
    mesh: &VesselMesh,
    coupling: &LineCouplingMap,
    grid: &TissueGrid,
    fp: &FlowParams,
) -> Result<FlowSolution, TissueError> {
    let nc = grid.n_cells();
    let np = mesh.n_points();
    let vol = grid.cell_volume();
    let lambda = fp.lp_lf * fp.s_over_v;
    let osmotic = fp.sigma_oncotic * (fp.pi_v - fp.pi_t);
    // Without drainage and without wall exchange the tissue pressure has no
    // anchor; it is then held at the lymphatic pressure.
    let tissue_free = lambda > 0.0 || (fp.lp > 0.0 && !mesh.elements.is_empty());
    if mesh.elements.is_empty() && !tissue_free {
        return Ok(FlowSolution::quiescent(grid, fp.p_l));
    }
    let t_off = if tissue_free { nc } else { 0 };
    let n = t_off + np;
    let mut a = TripletBuilder::new(n);
    let mut rhs = vec![0.0; n];
    let faces = grid.interior_faces();
    let h = grid.spacing();
    let darcy = fp.kappa / fp.mu_t;

    if tissue_free {
        for &(lo, hi, axis) in &faces {
            let t = darcy * grid.face_area(axis) / h[axis];
            a.add(lo, lo, t);
            a.add(lo, hi, -t);
            a.add(hi, hi, t);
            a.add(hi, lo, -t);
        }
        for c in 0..nc {
            a.add(c, c, lambda * vol);
            rhs[c] += lambda * vol * fp.p_l;
        }
    }
    for (i, b) in mesh.boundary.iter().enumerate() {
        if let PointBoundary::Inlet { pressure } | PointBoundary::Outlet { pressure } = *b {
            a.add(t_off + i, t_off + i, 1.0);
            rhs[t_off + i] = pressure;
        }
    }
    let fixed = |i: usize| !matches!(mesh.boundary[i], PointBoundary::Interior);
    for (e, el) in mesh.elements.iter().enumerate() {
        let g = poiseuille_conductance(el.radius, el.length, fp.mu_v);
        let (ia, ib) = (t_off + el.a, t_off + el.b);
        if !fixed(el.a) {
            a.add(ia, ia, g);
            a.add(ia, ib, -g);
        }
        if !fixed(el.b) {
            a.add(ib, ib, g);
            a.add(ib, ia, -g);
        }
        // F = g_w (v.x - osmotic); v = (1/2, 1/2, -w)
        let gw = wall_conductance(el.radius, el.length, fp.lp);
        if gw == 0.0 {
            continue;
        }
        let mut v: Vec<(usize, f64, bool)> = vec![(ia, 0.5, fixed(el.a)), (ib, 0.5, fixed(el.b))];
        for (c, w) in coupling.weights(e) {
            if tissue_free {
                v.push((c, -w, false));
            }
        }
        for &(row, vr, row_fixed) in &v {
            if row_fixed {
                continue;
            }
            for &(col, vc, _) in &v {
                a.add(row, col, gw * vr * vc);
            }
            rhs[row] += gw * vr * osmotic;
        }
    }
    let m = a.build();
    let mut x = vec![0.0; n];
    for (i, b) in mesh.boundary.iter().enumerate() {
        x[t_off + i] = match *b {
            PointBoundary::Inlet { pressure } | PointBoundary::Outlet { pressure } => pressure,
            PointBoundary::Interior => fp.p_0,
        };
    }
    if tissue_free {
        x[..nc].iter_mut().for_each(|v| *v = fp.p_l);
    }
    solve(&m, &rhs, &mut x, &SolverOptions::default())?;

    let p_t: Vec<f64> = if tissue_free { x[..nc].to_vec() } else { vec![fp.p_l; nc] };
    let p_v = x[t_off..].to_vec();
    finish(mesh, coupling, grid, fp, p_t, p_v, faces)
}

fn finish(
    mesh: &VesselMesh,
    coupling: &LineCouplingMap,
    grid: &TissueGrid,
    fp: &FlowParams,
    p_t: Vec<f64>,
    p_v: Vec<f64>,
    faces: Vec<(usize, usize, usize)>,
) -> Result<FlowSolution, TissueError> {
    let vol = grid.cell_volume();
    let h = grid.spacing();
    let darcy = fp.kappa / fp.mu_t;
    let osmotic = fp.sigma_oncotic * (fp.pi_v - fp.pi_t);
    let lambda = fp.lp_lf * fp.s_over_v;
    let q: Vec<f64> = mesh
        .elements
        .iter()
        .map(|el| poiseuille_conductance(el.radius, el.length, fp.mu_v) * (p_v[el.a] - p_v[el.b]))
        .collect();
    let exchange: Vec<f64> = mesh
        .elements
        .iter()
        .enumerate()
        .map(|(e, el)| {
            let pv = 0.5 * (p_v[el.a] + p_v[el.b]);
            let pt: f64 = coupling.weights(e).map(|(c, w)| w * p_t[c]).sum();
            wall_conductance(el.radius, el.length, fp.lp) * ((pv - pt) - osmotic)
        })
        .collect();
    let face_flux: Vec<f64> = faces
        .iter()
        .map(|&(lo, hi, axis)| darcy * grid.face_area(axis) / h[axis] * (p_t[lo] - p_t[hi]))
        .collect();
    let lymph: Vec<f64> = p_t.iter().map(|p| lambda * vol * (p - fp.p_l)).collect();

    let mut sol = FlowSolution {
        p_t,
        p_v,
        q,
        exchange,
        faces,
        face_flux,
        lymph,
        inflow: 0.0,
        outflow: 0.0,
        mass_balance_residual: 0.0,
    };
    let loss = sol.point_loss(mesh);
    let mut net_out = vec![0.0; mesh.n_points()];
    for (el, &q) in mesh.elements.iter().zip(&sol.q) {
        net_out[el.a] += q;
        net_out[el.b] -= q;
    }
    let mut network_defect: f64 = 0.0;
    for i in 0..mesh.n_points() {
        match mesh.boundary[i] {
            PointBoundary::Inlet { .. } => sol.inflow += net_out[i] + loss[i],
            PointBoundary::Outlet { .. } => sol.outflow -= net_out[i] + loss[i],
            PointBoundary::Interior => network_defect += (net_out[i] + loss[i]).abs(),
        }
    }
    let extravasation: f64 = sol.exchange.iter().sum();
    let drained: f64 = sol.lymph.iter().sum();
    let global = (sol.inflow - sol.outflow - drained).abs() + (extravasation - drained).abs();
    let scale = sol.inflow.abs().max(f64::MIN_POSITIVE);
    sol.mass_balance_residual = (network_defect + global) / scale;
    Ok(sol)
}

/// Hematocrit per mesh point, advected along the flow with conservation of
/// red-cell flux. Every element carries the hematocrit of its upstream
/// point, so all daughters of a bifurcation receive the parent value.
pub fn solve_hematocrit(mesh: &VesselMesh, flow: &FlowSolution, h_in: f64) -> Result<Vec<f64>, TissueError> {
    let np = mesh.n_points();
    let through = flow.point_throughflow(mesh);
    let mut upstream_of: Vec<Vec<usize>> = vec![Vec::new(); np];
    let mut n_in = vec![0usize; np];
    let mut downstream: Vec<Vec<usize>> = vec![Vec::new(); np];
    for (e, (el, &q)) in mesh.elements.iter().zip(&flow.q).enumerate() {
        let (up, down) = if q >= 0.0 { (el.a, el.b) } else { (el.b, el.a) };
        upstream_of[down].push(e);
        downstream[up].push(down);
        n_in[down] += 1;
    }
    let mut h = vec![f64::NAN; np];
    let mut queue: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
    for i in 0..np {
        let is_inlet = matches!(mesh.boundary[i], PointBoundary::Inlet { .. });
        if is_inlet && n_in[i] > 0 {
            return Err(TissueError::FlowReversal(mesh.node_ids[i]));
        }
        if n_in[i] == 0 {
            if !is_inlet {
                let id = mesh.node_ids.get(i).copied();
                return Err(TissueError::Hematocrit(match id {
                    Some(id) => format!("node {id} has no inflow"),
                    None => format!("mesh point {i} has no inflow"),
                }));
            }
            queue.push_back(i);
        }
    }
    let mut done = 0;
    while let Some(i) = queue.pop_front() {
        done += 1;
        if matches!(mesh.boundary[i], PointBoundary::Inlet { .. }) {
            h[i] = h_in;
        } else {
            let mut rbc = 0.0;
            for &e in &upstream_of[i] {
                let el = &mesh.elements[e];
                let up = if flow.q[e] >= 0.0 { el.a } else { el.b };
                rbc += flow.q[e].abs() * h[up];
            }
            if through[i] <= 0.0 {
                return Err(TissueError::Hematocrit(format!(
                    "no net throughflow at mesh point {i}"
                )));
            }
            h[i] = rbc / through[i];
            if !(0.0..1.0).contains(&h[i]) {
                return Err(TissueError::Hematocrit(format!(
                    "value {} at mesh point {i} outside [0, 1)",
                    h[i]
                )));
            }
        }
        for &d in &downstream[i] {
            n_in[d] -= 1;
            if n_in[d] == 0 {
                queue.push_back(d);
            }
        }
    }
    if done != np {
        return Err(TissueError::Hematocrit("flow graph contains a cycle".into()));
    }
    Ok(h)
}
