//! Adaptive Dormand–Prince 5(4) integration with dense output.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("invalid integrator input: {0}")]
    InvalidInput(String),
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("exceeded {max_steps} steps at t = {t}")]
    MaxSteps { t: f64, max_steps: usize },
    #[error("non-finite derivative at t = {t}")]
    NonFinite { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// First trial step; chosen from the local derivative scale when `None`.
    pub initial_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_step: f64::INFINITY,
            initial_step: None,
            max_steps: 1_000_000,
        }
    }
}

impl IntegratorOptions {
    fn validate(&self) -> Result<(), OdeError> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(OdeError::InvalidInput("tolerances must be positive".into()));
        }
        if !(self.max_step > 0.0) {
            return Err(OdeError::InvalidInput("max_step must be positive".into()));
        }
        if let Some(h) = self.initial_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(OdeError::InvalidInput("initial_step must be positive".into()));
            }
        }
        if self.max_steps == 0 {
            return Err(OdeError::InvalidInput("max_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("trajectory is never empty")
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;
const PI_BETA: f64 = 0.04;
const PI_ALPHA: f64 = 0.2 - 0.75 * PI_BETA;

/// Integrates `y' = rhs(t, y)` over `t_span` and samples the solution at
/// `sample_times` through the fifth-order dense output.
///
/// The returned grid always starts at `t_span.0` and ends at `t_span.1`;
/// sample times coinciding with either end are not duplicated.
pub fn integrate<F>(
    mut rhs: F,
    y0: &[f64],
    t_span: (f64, f64),
    sample_times: &[f64],
    opts: &IntegratorOptions,
) -> Result<Trajectory, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    opts.validate()?;
    let (t0, t1) = t_span;
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(OdeError::InvalidInput(format!("bad time span ({t0}, {t1})")));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(OdeError::InvalidInput("non-finite initial state".into()));
    }
    if sample_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(OdeError::InvalidInput("sample times must be sorted".into()));
    }
    if sample_times.iter().any(|&s| !(s >= t0 && s <= t1)) {
        return Err(OdeError::InvalidInput("sample time outside span".into()));
    }

    let mut grid = Vec::with_capacity(sample_times.len() + 2);
    grid.push(t0);
    for &s in sample_times {
        if s > *grid.last().unwrap() && s < t1 {
            grid.push(s);
        }
    }
    grid.push(t1);

    let n = y0.len();
    let mut times = Vec::with_capacity(grid.len());
    let mut states = Vec::with_capacity(grid.len());
    times.push(t0);
    states.push(y0.to_vec());
    let mut next = 1;

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut dense = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];

    rhs(t, &y, &mut k1);
    check_finite(&k1, t)?;

    let mut h = match opts.initial_step {
        Some(h) => h,
        None => initial_step(&mut rhs, t, &y, &k1, t1 - t0, opts)?,
    }
    .min(opts.max_step)
    .min(t1 - t0);

    let mut err_old: f64 = 1e-4;
    let mut rejected_last = false;
    let mut accepted = 0;
    let mut rejected = 0;

    while t < t1 {
        if accepted + rejected >= opts.max_steps {
            return Err(OdeError::MaxSteps {
                t,
                max_steps: opts.max_steps,
            });
        }
        if h < 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(OdeError::StepUnderflow { t, h });
        }
        let last = t + h >= t1 || t1 - (t + h) < 1e-12 * (t1 - t0);
        if last {
            h = t1 - t;
        }

        for i in 0..n {
            ytmp[i] = y[i] + h * A21 * k1[i];
        }
        rhs(t + C2 * h, &ytmp, &mut k2);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs(t + C3 * h, &ytmp, &mut k3);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs(t + C4 * h, &ytmp, &mut k4);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs(t + C5 * h, &ytmp, &mut k5);
        for i in 0..n {
            ytmp[i] = y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let t_new = if last { t1 } else { t + h };
        rhs(t_new, &ytmp, &mut k6);
        for i in 0..n {
            ynew[i] = y[i]
                + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        rhs(t_new, &ynew, &mut k7);
        for k in [&k2, &k3, &k4, &k5, &k6, &k7] {
            check_finite(k, t)?;
        }

        let mut sum = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.abs_tol + opts.rel_tol * y[i].abs().max(ynew[i].abs());
            sum += (e / sc).powi(2);
        }
        let err = if n == 0 { 0.0 } else { (sum / n as f64).sqrt() };
        if !err.is_finite() {
            return Err(OdeError::NonFinite { t });
        }

        if err <= 1.0 {
            accepted += 1;
            if next < grid.len() && grid[next] < t_new {
                for i in 0..n {
                    let dy = ynew[i] - y[i];
                    let bspl = h * k1[i] - dy;
                    dense[0][i] = y[i];
                    dense[1][i] = dy;
                    dense[2][i] = bspl;
                    dense[3][i] = dy - h * k7[i] - bspl;
                    dense[4][i] = h
                        * (D1 * k1[i]
                            + D3 * k3[i]
                            + D4 * k4[i]
                            + D5 * k5[i]
                            + D6 * k6[i]
                            + D7 * k7[i]);
                }
                while next < grid.len() && grid[next] < t_new {
                    let theta = (grid[next] - t) / h;
                    let th1 = 1.0 - theta;
                    let ys = (0..n)
                        .map(|i| {
                            dense[0][i]
                                + theta
                                    * (dense[1][i]
                                        + th1
                                            * (dense[2][i]
                                                + theta * (dense[3][i] + th1 * dense[4][i])))
                        })
                        .collect();
                    times.push(grid[next]);
                    states.push(ys);
                    next += 1;
                }
            }
            if next < grid.len() && grid[next] == t_new {
                times.push(t_new);
                states.push(ynew.clone());
                next += 1;
            }

            t = t_new;
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);

            let mut factor = SAFETY * err.max(1e-10).powf(-PI_ALPHA) * err_old.powf(PI_BETA);
            factor = factor.clamp(MIN_FACTOR, MAX_FACTOR);
            if rejected_last {
                factor = factor.min(1.0);
            }
            err_old = err.max(1e-4);
            rejected_last = false;
            h = (h * factor).min(opts.max_step);
        } else {
            rejected += 1;
            rejected_last = true;
            let factor = (SAFETY * err.powf(-PI_ALPHA)).max(MIN_FACTOR);
            h *= factor;
        }
    }

    debug_assert_eq!(times.len(), grid.len());
    Ok(Trajectory {
        times,
        states,
        accepted_steps: accepted,
        rejected_steps: rejected,
    })
}

fn check_finite(k: &[f64], t: f64) -> Result<(), OdeError> {
    if k.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(OdeError::NonFinite { t })
    }
}

/// Starting step from the scale of `y` and `y'` (Hairer, Norsett & Wanner,
/// Solving ODEs I, II.4).
fn initial_step<F>(
    rhs: &mut F,
    t: f64,
    y: &[f64],
    f0: &[f64],
    span: f64,
    opts: &IntegratorOptions,
) -> Result<f64, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    if n == 0 {
        return Ok(span);
    }
    let sc: Vec<f64> = y.iter().map(|v| opts.abs_tol + opts.rel_tol * v.abs()).collect();
    let norm = |v: &[f64]| {
        (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / n as f64).sqrt()
    };
    let d0 = norm(y);
    let d1 = norm(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; n];
    rhs(t + h0, &y1, &mut f1);
    check_finite(&f1, t)?;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(span))
}
