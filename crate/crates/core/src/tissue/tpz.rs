//! Transient drug transport driven by the surviving-fraction and
//! metabolic-rate surrogates.

use serde::{Deserialize, Serialize};

use crate::params::{InjectionProtocol, ParameterSet};
use crate::pkpd0d::vascular_tpz;
use crate::surrogate::{eval_rational, eval_sigmoid, RationalFit, SigmoidFit};

use super::coupling::LineCouplingMap;
use super::flow::FlowSolution;
use super::grid::{spatial_average, TissueGrid};
use super::network::VesselMesh;
use super::sparse::{solve, SolverOptions};
use super::transport::{assemble, exchange_flux, lymph_rates, Species, TransportContext};
use super::TissueError;

/// Default bound on the advective Courant number. Implicit upwinding is
/// stable for any step; the bound keeps the numerical diffusion of the
/// vessel advection within the same order as the element size.
pub const MAX_COURANT: f64 = 1e4;

/// Values below this are rounding noise of the linear solve.
pub const NEGATIVE_TOLERANCE: f64 = -1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpzOptions {
    /// Time step, s.
    pub dt: f64,
    /// Start of the window the rate surrogate was fitted on; earlier times
    /// evaluate it there.
    pub r_window_start: f64,
    pub robin_faces: [bool; 6],
    /// Times at which to keep full field snapshots.
    pub snapshot_times: Vec<f64>,
    /// Tissue field at t = 0 (zero when absent).
    pub initial_tissue: Option<Vec<f64>>,
    pub max_courant: f64,
    /// Replaces the rate surrogate by zero.
    pub no_metabolism: bool,
}

impl Default for TpzOptions {
    fn default() -> Self {
        Self {
            dt: 10.0,
            r_window_start: 0.0,
            robin_faces: [true; 6],
            snapshot_times: crate::backend::QOI_TIMES.to_vec(),
            initial_tissue: None,
            max_courant: MAX_COURANT,
            no_metabolism: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub c_t: Vec<f64>,
    pub c_v: Vec<f64>,
    pub sf: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TpzSolution {
    pub times: Vec<f64>,
    /// Spatial mean of the tissue drug concentration.
    pub mean_c_t: Vec<f64>,
    /// Spatial mean of the local surviving fraction.
    pub mean_sf: Vec<f64>,
    /// Surrogate surviving fraction driving the sink.
    pub sf_surrogate: Vec<f64>,
    /// Total tissue drug amount, mol.
    pub tissue_mass: Vec<f64>,
    /// Largest defect of the tissue amount budget (change minus net
    /// inflow), relative to the largest tissue amount.
    pub budget_defect: f64,
    /// Largest relative change of the tissue amount from its initial value.
    pub mass_drift: f64,
    pub courant: f64,
    pub snapshots: Vec<Snapshot>,
    pub c_t: Vec<f64>,
    pub c_v: Vec<f64>,
    pub sf: Vec<f64>,
}

impl TpzSolution {
    /// CSV with columns `t,mean_c_t_tpz,sf,sf_surrogate,tissue_mass`.
    pub fn series_csv(&self) -> String {
        let mut out = String::from("t,mean_c_t_tpz,sf,sf_surrogate,tissue_mass\n");
        for i in 0..self.times.len() {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                self.times[i], self.mean_c_t[i], self.mean_sf[i], self.sf_surrogate[i], self.tissue_mass[i]
            ));
        }
        out
    }
}

/// Step grid of spacing `dt` on `[0, t_end]`, with every time of `extra`
/// inside the horizon inserted.
pub fn time_grid(t_end: f64, dt: f64, extra: &[f64]) -> Vec<f64> {
    let steps = (t_end / dt).ceil() as usize;
    let mut ts: Vec<f64> = (0..=steps).map(|i| (i as f64 * dt).min(t_end)).collect();
    ts.extend(extra.iter().copied().filter(|&t| t > 0.0 && t < t_end));
    ts.sort_by(f64::total_cmp);
    ts.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * t_end);
    ts
}

#[allow(clippy::too_many_arguments)]
pub fn simulate_tpz(
    mesh: &VesselMesh,
    coupling: &LineCouplingMap,
    grid: &TissueGrid,
    flow: &FlowSolution,
    sf_fit: &SigmoidFit,
    r_fit: &RationalFit,
    proto: &InjectionProtocol,
    params: &ParameterSet,
    opts: &TpzOptions,
) -> Result<TpzSolution, TissueError> {
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(TissueError::Invalid(format!("time step {} must be positive", opts.dt)));
    }
    let nc = grid.n_cells();
    let vol = grid.cell_volume();
    let tp = &params.tpz;
    let courant = courant_number(mesh, grid, flow, opts.dt);
    if courant > opts.max_courant {
        return Err(TissueError::CourantExceeded {
            dt: opts.dt,
            courant,
            bound: opts.max_courant,
        });
    }
    let ctx = TransportContext::new(grid, mesh, coupling, flow);
    let n = ctx.n_unknowns();
    let lymph = lymph_rates(flow, grid);
    let mut x = vec![0.0; n];
    if let Some(init) = &opts.initial_tissue {
        if init.len() != nc {
            return Err(TissueError::Invalid("initial tissue field does not match grid".into()));
        }
        x[..nc].copy_from_slice(init);
    }
    x[nc..].iter_mut().for_each(|v| *v = vascular_tpz(0.0, proto));

    let mut extra = proto.breakpoints();
    extra.extend(crate::backend::QOI_TIMES);
    extra.extend(&opts.snapshot_times);
    let times = time_grid(proto.t_end(), opts.dt, &extra);

    let sf_at = |t: f64| eval_sigmoid(sf_fit, t).max(0.0);
    let r_at = |t: f64| -> Result<f64, TissueError> {
        if opts.no_metabolism {
            return Ok(0.0);
        }
        eval_rational(r_fit, t.max(opts.r_window_start))
            .map(|r| r.max(0.0))
            .map_err(|e| TissueError::Invalid(format!("rate surrogate: {e}")))
    };

    let mut log_sf = vec![0.0; nc];
    let mass = |x: &[f64]| x[..nc].iter().sum::<f64>() * vol;
    let mut sol = TpzSolution {
        times: vec![0.0],
        mean_c_t: vec![spatial_average(&x[..nc], grid)],
        mean_sf: vec![1.0],
        sf_surrogate: vec![sf_at(0.0)],
        tissue_mass: vec![mass(&x)],
        budget_defect: 0.0,
        mass_drift: 0.0,
        courant,
        snapshots: Vec::new(),
        c_t: Vec::new(),
        c_v: Vec::new(),
        sf: Vec::new(),
    };
    let snap = |t: f64, x: &[f64], log_sf: &[f64]| Snapshot {
        t,
        c_t: x[..nc].to_vec(),
        c_v: x[nc..].to_vec(),
        sf: log_sf.iter().map(|l| l.exp()).collect(),
    };
    if opts.snapshot_times.contains(&0.0) {
        sol.snapshots.push(snap(0.0, &x, &log_sf));
    }
    let m0 = sol.tissue_mass[0];
    let mut budget = m0;
    let mut sink = vec![0.0; nc];
    let solver = SolverOptions {
        rel_tol: 1e-14,
        ..SolverOptions::default()
    };
    let zero_sink = vec![0.0; nc];
    let base = Species {
        d_tissue: tp.d_t_tpz,
        d_vessel: tp.d_v_tpz,
        permeability: tp.p_tpz,
        reflection: tp.sigma_tpz,
        beta: tp.beta_tpz,
        c_far: tp.c0_tpz,
        robin_faces: opts.robin_faces,
        sink: &zero_sink,
        lymph_rate: &lymph,
        capacity: None,
        inlet_value: 0.0,
    };
    // the steady operator is fixed; each step only touches the diagonal and RHS
    let (a0, b0) = assemble(&ctx, &base, None);
    for w in times.windows(2) {
        let (t_old, t) = (w[0], w[1]);
        let dt = t - t_old;
        let sf_t = sf_at(t);
        let r_t = r_at(t)?;
        sink.iter_mut().for_each(|s| *s = tp.phi_0 * sf_t * r_t);
        let sp = Species {
            sink: &sink,
            inlet_value: vascular_tpz(t, proto),
            ..base
        };
        let mut a = a0.clone();
        let mut b = b0.clone();
        for c in 0..nc {
            a.add_diagonal(c, sink[c] * vol + vol / dt);
            b[c] += vol / dt * x[c];
        }
        for i in 0..mesh.n_points() {
            if mesh.is_dirichlet(i) {
                b[nc + i] = sp.inlet_value;
            } else {
                let m = ctx.point_volume[i] / dt;
                a.add_diagonal(nc + i, m);
                b[nc + i] += m * x[nc + i];
            }
        }
        solve(&a, &b, &mut x, &solver).map_err(|e| match e {
            TissueError::Solver(m) => TissueError::Solver(format!("drug transport at t = {t} s: {m}")),
            other => other,
        })?;
        if let Some(value) = x.iter().copied().filter(|v| *v < NEGATIVE_TOLERANCE).reduce(f64::min) {
            return Err(TissueError::Negative {
                field: "c_tpz",
                value,
                t,
            });
        }

        // net inflow to the tissue over the step at the new level
        let j = exchange_flux(&ctx, &sp, &x);
        let mut net = j.iter().sum::<f64>();
        for c in 0..nc {
            net -= (sink[c] + lymph[c]) * vol * x[c];
        }
        net -= robin_outflow(&ctx, &sp, &x);
        budget += dt * net;

        for c in 0..nc {
            log_sf[c] -= dt * tp.alpha_pd * sf_t * r_t * x[c] * x[c];
        }
        let m = mass(&x);
        let scale = sol.tissue_mass.iter().fold(m, |acc, v| acc.max(v.abs()));
        if scale > 0.0 {
            sol.budget_defect = sol.budget_defect.max((m - budget).abs() / scale);
        }
        if m0 != 0.0 {
            sol.mass_drift = sol.mass_drift.max(((m - m0) / m0).abs());
        } else if m != 0.0 {
            sol.mass_drift = f64::INFINITY;
        }
        sol.times.push(t);
        sol.mean_c_t.push(spatial_average(&x[..nc], grid));
        sol.mean_sf.push(log_sf.iter().map(|l| l.exp()).sum::<f64>() / nc as f64);
        sol.sf_surrogate.push(sf_t);
        sol.tissue_mass.push(m);
        if opts.snapshot_times.iter().any(|&s| (s - t).abs() <= 1e-9 * proto.t_end()) {
            sol.snapshots.push(snap(t, &x, &log_sf));
        }
    }
    sol.c_t = x[..nc].to_vec();
    sol.c_v = x[nc..].to_vec();
    sol.sf = log_sf.iter().map(|l| l.exp()).collect();
    Ok(sol)
}

fn robin_outflow(ctx: &TransportContext, sp: &Species, x: &[f64]) -> f64 {
    if sp.beta <= 0.0 {
        return 0.0;
    }
    let h = ctx.grid.spacing();
    ctx.boundary_faces
        .iter()
        .filter(|(_, f)| sp.robin_faces[*f])
        .map(|&(c, f)| {
            let axis = f / 2;
            let g = ctx.grid.face_area(axis) / (0.5 * h[axis] / sp.d_tissue + 1.0 / sp.beta);
            g * (x[c] - sp.c_far)
        })
        .sum()
}

/// Largest `|u| dt / dx` over vessel elements and tissue faces.
pub fn courant_number(mesh: &VesselMesh, grid: &TissueGrid, flow: &FlowSolution, dt: f64) -> f64 {
    let h = grid.spacing();
    let vessel = flow
        .element_velocity(mesh)
        .iter()
        .zip(&mesh.elements)
        .map(|(u, el)| u.abs() * dt / el.length)
        .fold(0.0, f64::max);
    let tissue = flow
        .faces
        .iter()
        .zip(&flow.face_flux)
        .map(|(&(_, _, axis), q)| q.abs() / grid.face_area(axis) * dt / h[axis])
        .fold(0.0, f64::max);
    vessel.max(tissue)
}
