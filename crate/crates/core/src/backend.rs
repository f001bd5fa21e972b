//! Quantities of interest shared by the lumped and tissue-scale models, and
//! model adapters for the sensitivity engine.

use thiserror::Error;

use crate::params::{
    apply_sa_values, default_protocol, InjectionProtocol, ParamError, ParameterBounds, ParameterSet,
};
use crate::pkpd0d::{simulate_0d, Pkpd0dError, Sim0dOptions, TimeSeries0D, EPSILON_C};
use crate::surrogate::{fit_rational, fit_sigmoid, RationalFit, SigmoidFit, SurrogateError};
use crate::tissue::{
    build_coupling, simulate_tpz, solve_flow, solve_hematocrit, FlowSolution, LineCouplingMap, TissueError,
    TissueGrid, TpzOptions, TpzSolution, VesselMesh, VesselNetwork,
};

/// Labels of the QoI vector, in order.
pub const QOI_LABELS: [&str; 8] = [
    "mean_c_t_tpz",
    "c_t_tpz_7200",
    "c_t_tpz_10800",
    "c_t_tpz_21600",
    "mean_sf",
    "sf_7200",
    "sf_10800",
    "sf_21600",
];

/// Times of the point QoIs, s.
pub const QOI_TIMES: [f64; 3] = [7200.0, 10800.0, 21600.0];

#[derive(Debug, Error)]
pub enum BackendError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Lumped(#[from] Pkpd0dError),
    #[error("surrogate fit: {0}")]
    Surrogate(#[from] SurrogateError),
    #[error("tissue model: {0}")]
    Tissue(#[from] TissueError),
    #[error("QoI time {0} s is not on the output grid")]
    MissingTime(f64),
}

/// Trapezoidal time average of `values` over `times`.
pub fn time_average(times: &[f64], values: &[f64]) -> f64 {
    let span = times[times.len() - 1] - times[0];
    if span <= 0.0 {
        return values[0];
    }
    let integral: f64 = times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum();
    integral / span
}

/// Assembles the QoI vector from a drug and a surviving-fraction series on
/// a common time grid containing every time of [`QOI_TIMES`].
pub fn qoi_vector(times: &[f64], c_t_tpz: &[f64], sf: &[f64]) -> Result<Vec<f64>, BackendError> {
    let at = |series: &[f64], t: f64| -> Result<f64, BackendError> {
        times
            .iter()
            .position(|&s| s == t)
            .map(|i| series[i])
            .ok_or(BackendError::MissingTime(t))
    };
    let mut q = Vec::with_capacity(QOI_LABELS.len());
    q.push(time_average(times, c_t_tpz));
    for t in QOI_TIMES {
        q.push(at(c_t_tpz, t)?);
    }
    q.push(time_average(times, sf));
    for t in QOI_TIMES {
        q.push(at(sf, t)?);
    }
    Ok(q)
}

/// QoIs of the lumped model for one parameter set.
pub fn qoi_0d(params: &ParameterSet, opts: &Sim0dOptions) -> Result<Vec<f64>, BackendError> {
    let proto = default_protocol(params)?;
    let ts = simulate_0d(params, &proto, opts)?;
    qoi_vector(&ts.times, &ts.c_t_tpz, &ts.sf)
}

/// Sensitivity-engine adapter: physical values for `bounds` applied on top
/// of `base`, evaluated with the lumped model.
pub fn lumped_model<'a>(
    base: &'a ParameterSet,
    bounds: &'a ParameterBounds,
    opts: Sim0dOptions,
) -> impl Fn(&[f64]) -> Result<Vec<f64>, BackendError> + Sync + 'a {
    move |values: &[f64]| {
        let p = apply_sa_values(base, bounds, values)?;
        p.validate()?;
        qoi_0d(&p, &opts)
    }
}

/// Surviving-fraction and metabolic-rate surrogates of one lumped run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Surrogates {
    pub sf: SigmoidFit,
    pub r: RationalFit,
    /// First time with a positive tissue concentration; the rate fit
    /// covers `[r_window_start, t_end]`.
    pub r_window_start: f64,
}

/// Fits both surrogates to a lumped time series. The rate law is fitted
/// where the tissue concentration exceeds [`EPSILON_C`].
pub fn fit_surrogates(ts: &TimeSeries0D) -> Result<Surrogates, BackendError> {
    let sf = fit_sigmoid(&ts.times, &ts.sf, None)?;
    let (t, r): (Vec<f64>, Vec<f64>) = ts
        .times
        .iter()
        .zip(&ts.r_eff)
        .zip(&ts.c_t_tpz)
        .filter(|(_, c)| **c > EPSILON_C)
        .map(|((t, r), _)| (*t, *r))
        .unzip();
    let r_window_start = t.first().copied().unwrap_or(0.0);
    let r = fit_rational(&t, &r, None)?;
    Ok(Surrogates { sf, r, r_window_start })
}

/// Runs the lumped model for `params` and fits its surrogates.
pub fn surrogates_for(
    params: &ParameterSet,
    proto: &InjectionProtocol,
    opts: &Sim0dOptions,
) -> Result<Surrogates, BackendError> {
    fit_surrogates(&simulate_0d(params, proto, opts)?)
}

/// Parameter-independent part of the tissue model: geometry, coupling,
/// flow and hematocrit. None of the screened parameters enters these.
#[derive(Debug, Clone)]
pub struct TissueSetup {
    pub network: VesselNetwork,
    pub grid: TissueGrid,
    pub mesh: VesselMesh,
    pub coupling: LineCouplingMap,
    pub flow: FlowSolution,
    pub hematocrit: Vec<f64>,
}

impl TissueSetup {
    pub fn new(network: VesselNetwork, params: &ParameterSet) -> Result<Self, BackendError> {
        let grid = network.grid()?;
        network.validate(&grid)?;
        let fp = &params.flow;
        let mesh = VesselMesh::build(&network, fp.p_0 + fp.delta_p, fp.p_0);
        let coupling = build_coupling(&mesh, &grid)?;
        let flow = solve_flow(&mesh, &coupling, &grid, fp)?;
        let hematocrit = solve_hematocrit(&mesh, &flow, fp.h_in)?;
        Ok(Self {
            network,
            grid,
            mesh,
            coupling,
            flow,
            hematocrit,
        })
    }

    /// Surrogate-driven drug transport for `params`.
    pub fn simulate(
        &self,
        params: &ParameterSet,
        sim0d: &Sim0dOptions,
        opts: &TpzOptions,
    ) -> Result<(Surrogates, TpzSolution), BackendError> {
        let proto = default_protocol(params)?;
        let s = if opts.no_metabolism {
            // the rate law is unused, and may be unfittable when no drug
            // reaches the tissue
            let ts = simulate_0d(params, &proto, sim0d)?;
            Surrogates {
                sf: fit_sigmoid(&ts.times, &ts.sf, None)?,
                r: RationalFit {
                    a: 0.0,
                    b: 1.0,
                    c: 0.0,
                    r_squared: 1.0,
                    ks_statistic: None,
                    degenerate: true,
                },
                r_window_start: 0.0,
            }
        } else {
            surrogates_for(params, &proto, sim0d)?
        };
        let mut opts = opts.clone();
        opts.r_window_start = s.r_window_start;
        let sol = simulate_tpz(
            &self.mesh,
            &self.coupling,
            &self.grid,
            &self.flow,
            &s.sf,
            &s.r,
            &proto,
            params,
            &opts,
        )?;
        Ok((s, sol))
    }
}

/// QoIs of the tissue model for one parameter set.
pub fn qoi_3d(
    setup: &TissueSetup,
    params: &ParameterSet,
    sim0d: &Sim0dOptions,
    opts: &TpzOptions,
) -> Result<Vec<f64>, BackendError> {
    let (_, sol) = setup.simulate(params, sim0d, opts)?;
    qoi_vector(&sol.times, &sol.mean_c_t, &sol.mean_sf)
}

/// Sensitivity-engine adapter for the tissue model. Field snapshots are
/// not kept.
pub fn tissue_model<'a>(
    setup: &'a TissueSetup,
    base: &'a ParameterSet,
    bounds: &'a ParameterBounds,
    sim0d: Sim0dOptions,
    opts: TpzOptions,
) -> impl Fn(&[f64]) -> Result<Vec<f64>, BackendError> + Sync + 'a {
    let opts = TpzOptions {
        snapshot_times: Vec::new(),
        ..opts
    };
    move |values: &[f64]| {
        let p = apply_sa_values(base, bounds, values)?;
        p.validate()?;
        qoi_3d(setup, &p, &sim0d, &opts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_average() {
        assert_eq!(time_average(&[0.0, 1.0, 3.0], &[0.0, 2.0, 2.0]), 5.0 / 3.0);
    }

    #[test]
    fn baseline_qoi_shape() {
        let q = qoi_0d(&ParameterSet::default(), &Sim0dOptions::default()).unwrap();
        assert_eq!(q.len(), QOI_LABELS.len());
        assert!(q[0] > 0.0 && q[4] <= 1.0);
        assert!(q[5] >= q[6] && q[6] >= q[7]);
    }

    #[test]
    fn missing_time_is_reported() {
        let err = qoi_vector(&[0.0, 7200.0], &[0.0, 1.0], &[1.0, 1.0]).unwrap_err();
        assert!(matches!(err, BackendError::MissingTime(t) if t == 10800.0));
    }
}
