//! Steady oxygen transport with hemoglobin binding in the vessels and
//! Michaelis-Menten consumption in the tissue.

use serde::{Deserialize, Serialize};

use crate::params::ParameterSet;

use super::coupling::LineCouplingMap;
use super::flow::FlowSolution;
use super::grid::TissueGrid;
use super::network::VesselMesh;
use super::sparse::{solve, SolverOptions};
use super::transport::{assemble, exchange_flux, lymph_rates, Species, TransportContext};
use super::TissueError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OxygenOptions {
    /// Weight of the new iterate in the damped update.
    pub damping: f64,
    pub max_iterations: usize,
    /// Bound on the relative change between successive iterates.
    pub tolerance: f64,
    pub robin_faces: [bool; 6],
    /// Drop hemoglobin binding in the vessels.
    pub free_oxygen_only: bool,
    /// Drop tissue and vessel advection (exchange keeps its convective part).
    pub no_advection: bool,
}

impl Default for OxygenOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            max_iterations: 200,
            tolerance: 1e-8,
            robin_faces: [true; 6],
            free_oxygen_only: false,
            no_advection: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OxygenSolution {
    /// Tissue oxygen per cell, mol/m^3.
    pub c_t: Vec<f64>,
    /// Dissolved vessel oxygen per mesh point, mol/m^3.
    pub c_v: Vec<f64>,
    /// Wall flux per element, mol/s.
    pub exchange: Vec<f64>,
    pub iterations: usize,
    /// Relative change at each iteration.
    pub history: Vec<f64>,
}

/// Hill saturation `c^gamma / (c^gamma + k2)`.
pub fn hill_saturation(c: f64, gamma: f64, k2: f64) -> f64 {
    if c <= 0.0 {
        return 0.0;
    }
    let cg = c.powf(gamma);
    cg / (cg + k2)
}

/// Hemoglobin-bound oxygen `k_1 H S(c)`.
pub fn bound_oxygen(c: f64, h: f64, params: &ParameterSet) -> f64 {
    let ox = &params.oxygen;
    ox.k_1 * h * hill_saturation(c, ox.gamma, ox.k_2())
}

/// Solves the steady problem by damped Picard iteration: the Hill term
/// and the consumption are frozen as secants at the previous iterate.
pub fn solve_oxygen(
    mesh: &VesselMesh,
    coupling: &LineCouplingMap,
    grid: &TissueGrid,
    flow: &FlowSolution,
    hematocrit: &[f64],
    params: &ParameterSet,
    opts: &OxygenOptions,
) -> Result<OxygenSolution, TissueError> {
    let ox = &params.oxygen;
    let nc = grid.n_cells();
    let still;
    let flow = if opts.no_advection {
        let mut f = flow.clone();
        f.face_flux.iter_mut().for_each(|q| *q = 0.0);
        f.q.iter_mut().for_each(|q| *q = 0.0);
        still = f;
        &still
    } else {
        flow
    };
    let ctx = TransportContext::new(grid, mesh, coupling, flow);
    let n = ctx.n_unknowns();
    let lymph = lymph_rates(flow, grid);
    let mut x = vec![ox.c0_ox; n];
    x[nc..].iter_mut().for_each(|v| *v = ox.c_v0_ox);
    let k_m = ox.k_m_ox();
    let rate = params.tpz.phi_0 * ox.v_max_ox;
    let mut history = Vec::new();
    let mut sink = vec![0.0; nc];
    let mut capacity = vec![1.0; mesh.n_points()];
    for it in 1..=opts.max_iterations {
        for c in 0..nc {
            sink[c] = rate / (x[c].max(0.0) + k_m);
        }
        if !opts.free_oxygen_only {
            for (i, k) in capacity.iter_mut().enumerate() {
                // secant of the bound term; its slope at zero is used for c -> 0
                let c = x[nc + i].max(1e-12);
                *k = 1.0 + bound_oxygen(c, hematocrit[i], params) / c;
            }
        }
        let sp = Species {
            d_tissue: ox.d_t_ox,
            d_vessel: ox.d_v_ox,
            permeability: ox.p_ox,
            reflection: ox.sigma_ox,
            beta: ox.beta_ox,
            c_far: ox.c0_ox,
            robin_faces: opts.robin_faces,
            sink: &sink,
            lymph_rate: &lymph,
            capacity: Some(&capacity),
            inlet_value: ox.c_v0_ox,
        };
        let (a, b) = assemble(&ctx, &sp, None);
        let mut y = x.clone();
        solve(&a, &b, &mut y, &SolverOptions::default())?;
        let mut change: f64 = 0.0;
        let mut size: f64 = 0.0;
        for i in 0..n {
            let next = opts.damping * y[i] + (1.0 - opts.damping) * x[i];
            change = change.max((next - x[i]).abs());
            size = size.max(next.abs());
            x[i] = next;
        }
        let rel = if size > 0.0 { change / size } else { 0.0 };
        history.push(rel);
        if rel < opts.tolerance {
            let exchange = exchange_flux(&ctx, &sp, &x);
            return Ok(OxygenSolution {
                c_t: x[..nc].to_vec(),
                c_v: x[nc..].to_vec(),
                exchange,
                iterations: it,
                history,
            });
        }
    }
    Err(TissueError::OxygenNoConvergence {
        iterations: opts.max_iterations,
        last: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}
