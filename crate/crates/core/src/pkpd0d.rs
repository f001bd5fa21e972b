//! Lumped (0D) pharmacokinetic/pharmacodynamic model.
//!
//! The tissue is a single well-mixed compartment exchanging drug and oxygen
//! with the vasculature through a wall resistance in series with a
//! perivascular diffusion layer. The surviving fraction is integrated as
//! `log SF` so that it stays strictly positive.

use serde::Serialize;
use thiserror::Error;

use crate::odeint::{integrate, IntegratorOptions, OdeError};
use crate::params::{InjectionProtocol, OxygenParams, ParameterSet, TpzParams};

/// Concentration below which the effective metabolic rate is reported as 0.
pub const EPSILON_C: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum Pkpd0dError {
    #[error("integration failed during {phase}: {source}")]
    Integration {
        phase: &'static str,
        #[source]
        source: OdeError,
    },
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("invalid output grid: {0}")]
    Grid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct State0D {
    pub c_t_tpz: f64,
    pub c_t_ox: f64,
    pub log_sf: f64,
}

impl State0D {
    pub fn sf(&self) -> f64 {
        self.log_sf.exp()
    }

    fn to_array(self) -> [f64; 3] {
        [self.c_t_tpz, self.c_t_ox, self.log_sf]
    }

    fn from_slice(y: &[f64]) -> Self {
        Self {
            c_t_tpz: y[0],
            c_t_ox: y[1],
            log_sf: y[2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct TimeSeries0D {
    pub times: Vec<f64>,
    pub c_v_tpz: Vec<f64>,
    pub c_t_tpz: Vec<f64>,
    pub c_t_ox: Vec<f64>,
    pub sf: Vec<f64>,
    pub m_tpz: Vec<f64>,
    pub r_eff: Vec<f64>,
}

impl TimeSeries0D {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the sample at exactly `t`, if present.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| s == t)
    }

    /// CSV with columns `t,c_v_tpz,c_t_tpz,c_t_ox,sf,m_tpz,r_eff`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,c_v_tpz,c_t_tpz,c_t_ox,sf,m_tpz,r_eff\n");
        for i in 0..self.len() {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                self.times[i],
                self.c_v_tpz[i],
                self.c_t_tpz[i],
                self.c_t_ox[i],
                self.sf[i],
                self.m_tpz[i],
                self.r_eff[i]
            ));
        }
        out
    }
}

/// Vascular drug concentration of the three-phase infusion at time `t`.
pub fn vascular_tpz(t: f64, proto: &InjectionProtocol) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t <= proto.t_p() {
        proto.c_v0_tpz() * (t / proto.t_p())
    } else if t <= proto.t_admin() {
        proto.c_v0_tpz()
    } else if t <= proto.t_washout() {
        proto.c_v0_tpz() * (-(t - proto.t_admin()) / proto.tau()).exp()
    } else {
        0.0
    }
}

/// Exchange rate of a wall (permeability `p`) in series with a diffusion
/// layer of thickness `l`, per unit tissue volume.
pub fn lumped_transfer_coeff(p: f64, d: f64, l: f64, s_over_v: f64) -> f64 {
    s_over_v * p * d / (d + p * l)
}

/// Potential at the junction of a two-resistor divider between `c_v` and
/// `c_t`.
pub fn perivascular_concentration(c_v: f64, c_t: f64, r1: f64, r2: f64) -> f64 {
    (r2 * c_v + r1 * c_t) / (r1 + r2)
}

/// Hypoxia-gated drug metabolism rate.
pub fn m_tpz(c_tpz: f64, c_ox: f64, tpz: &TpzParams) -> f64 {
    let gate = tpz.k_half_ox / (tpz.k_half_ox + c_ox);
    gate * (tpz.k_met * c_tpz + tpz.v_max_tpz * c_tpz / (tpz.k_m_tpz + c_tpz))
}

/// Michaelis–Menten oxygen consumption rate.
pub fn m_ox(c_ox: f64, ox: &OxygenParams) -> f64 {
    ox.v_max_ox * c_ox / (c_ox + ox.k_m_ox())
}

/// Exchange coefficients `(K_tpz, K_ox)` of a parameter set.
pub fn exchange_coefficients(params: &ParameterSet) -> (f64, f64) {
    let l = params.lumped.l_diff;
    let sv = params.flow.s_over_v;
    (
        lumped_transfer_coeff(params.tpz.p_tpz, params.tpz.d_t_tpz, l, sv),
        lumped_transfer_coeff(params.oxygen.p_ox, params.oxygen.d_t_ox, l, sv),
    )
}

/// The ODE right-hand side with exchange coefficients precomputed.
#[derive(Debug, Clone)]
pub struct Model0D<'a> {
    pub params: &'a ParameterSet,
    pub proto: &'a InjectionProtocol,
    pub k_tpz: f64,
    pub k_ox: f64,
}

impl<'a> Model0D<'a> {
    pub fn new(params: &'a ParameterSet, proto: &'a InjectionProtocol) -> Self {
        let (k_tpz, k_ox) = exchange_coefficients(params);
        Self {
            params,
            proto,
            k_tpz,
            k_ox,
        }
    }

    pub fn initial_state(&self) -> State0D {
        State0D {
            c_t_tpz: 0.0,
            c_t_ox: self.params.oxygen.c0_ox,
            log_sf: 0.0,
        }
    }

    pub fn derivative(&self, t: f64, s: &State0D) -> State0D {
        let p = self.params;
        let sf = s.sf();
        let m_t = m_tpz(s.c_t_tpz, s.c_t_ox, &p.tpz);
        let m_o = m_ox(s.c_t_ox, &p.oxygen);
        let phi = p.tpz.phi_0 * sf;
        State0D {
            c_t_tpz: self.k_tpz * (vascular_tpz(t, self.proto) - s.c_t_tpz) - phi * m_t,
            c_t_ox: self.k_ox * (p.oxygen.c_v0_ox - s.c_t_ox) - phi * m_o,
            log_sf: -p.tpz.alpha_pd * s.c_t_tpz * m_t,
        }
    }
}

/// Time derivative of the lumped state.
pub fn rhs_0d(
    t: f64,
    state: &State0D,
    params: &ParameterSet,
    proto: &InjectionProtocol,
) -> Result<State0D, Pkpd0dError> {
    if !(t.is_finite()
        && state.c_t_tpz.is_finite()
        && state.c_t_ox.is_finite()
        && state.log_sf.is_finite())
    {
        return Err(Pkpd0dError::NonFinite("state"));
    }
    Ok(Model0D::new(params, proto).derivative(t, state))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sim0dOptions {
    pub integrator: IntegratorOptions,
    /// Spacing of the uniform output grid, s.
    pub output_dt: f64,
}

impl Default for Sim0dOptions {
    fn default() -> Self {
        Self {
            integrator: IntegratorOptions {
                rel_tol: 1e-9,
                abs_tol: 1e-13,
                ..Default::default()
            },
            output_dt: 60.0,
        }
    }
}

/// Runs the lumped model on `[0, t_end]` with a uniform output grid of
/// spacing `opts.output_dt`, extended by the protocol breakpoints.
pub fn simulate_0d(
    params: &ParameterSet,
    proto: &InjectionProtocol,
    opts: &Sim0dOptions,
) -> Result<TimeSeries0D, Pkpd0dError> {
    if !(opts.output_dt > 0.0 && opts.output_dt.is_finite()) {
        return Err(Pkpd0dError::Grid("output_dt must be positive".into()));
    }
    let t_end = proto.t_end();
    let steps = (t_end / opts.output_dt).ceil() as usize;
    let mut grid: Vec<f64> = (0..=steps)
        .map(|i| (i as f64 * opts.output_dt).min(t_end))
        .collect();
    grid.extend(proto.breakpoints());
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    simulate_0d_at(params, proto, &opts.integrator, &grid)
}

/// Runs the lumped model and samples it at `times` (sorted, within
/// `[0, t_end]`). The returned series also contains 0, `t_end` and the
/// protocol breakpoints, where the integration is restarted.
pub fn simulate_0d_at(
    params: &ParameterSet,
    proto: &InjectionProtocol,
    opts: &IntegratorOptions,
    times: &[f64],
) -> Result<TimeSeries0D, Pkpd0dError> {
    let t_end = proto.t_end();
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Pkpd0dError::Grid("sample times must be sorted".into()));
    }
    if times.iter().any(|&t| !(0.0..=t_end).contains(&t)) {
        return Err(Pkpd0dError::Grid(format!("sample times must lie in [0, {t_end}]")));
    }

    let model = Model0D::new(params, proto);
    let mut bounds = vec![0.0];
    bounds.extend(proto.breakpoints());
    bounds.push(t_end);

    let mut out_t = vec![0.0];
    let mut out_y = vec![model.initial_state().to_array().to_vec()];
    let mut y = out_y[0].clone();
    for (phase, w) in bounds.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let inside: Vec<f64> = times.iter().copied().filter(|&t| t > a && t < b).collect();
        let tr = integrate(
            |t, y, dy| {
                let d = model.derivative(t, &State0D::from_slice(y));
                dy.copy_from_slice(&d.to_array());
            },
            &y,
            (a, b),
            &inside,
            opts,
        )
        .map_err(|source| Pkpd0dError::Integration {
            phase: phase_name(bounds[phase], proto),
            source,
        })?;
        for (t, s) in tr.times.iter().zip(&tr.states).skip(1) {
            out_t.push(*t);
            out_y.push(s.clone());
        }
        y = tr.last_state().to_vec();
    }

    let mut ts = TimeSeries0D::default();
    for (t, y) in out_t.into_iter().zip(out_y) {
        let s = State0D::from_slice(&y);
        let sf = s.sf();
        let m = m_tpz(s.c_t_tpz, s.c_t_ox, &params.tpz);
        let r = if s.c_t_tpz < EPSILON_C {
            0.0
        } else {
            m / (sf * s.c_t_tpz)
        };
        ts.times.push(t);
        ts.c_v_tpz.push(vascular_tpz(t, proto));
        ts.c_t_tpz.push(s.c_t_tpz);
        ts.c_t_ox.push(s.c_t_ox);
        ts.sf.push(sf);
        ts.m_tpz.push(m);
        ts.r_eff.push(r);
    }
    Ok(ts)
}

fn phase_name(start: f64, proto: &InjectionProtocol) -> &'static str {
    if start < proto.t_p() {
        "ramp"
    } else if start < proto.t_admin() {
        "plateau"
    } else if start < proto.t_washout() {
        "clearance"
    } else {
        "washout"
    }
}
