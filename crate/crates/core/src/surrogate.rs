//! Surrogate functions fitted to lumped-model output.
//!
//! The surviving fraction is fitted with a decreasing logistic
//! `X - Y / (1 + exp(-Z (t - D)))` and the effective metabolic rate with a
//! rational law `A / (t + B) + C`. Both fits use a damped Gauss–Newton
//! (Levenberg–Marquardt) iteration with analytic Jacobians on a normalized
//! time axis `u = (t - t_0) / (t_max - t_0)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

pub const MAX_ITERATIONS: usize = 500;
const SS_REL_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum SurrogateError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("times must be strictly increasing and finite")]
    BadTimes,
    #[error("values must be finite")]
    NonFinite,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("zero variance")]
    ZeroVariance,
    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),
    #[error("pole at t = {0} inside the data window")]
    PoleInWindow(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmoidFit {
    #[serde(rename = "X")]
    pub x: f64,
    #[serde(rename = "Y")]
    pub y: f64,
    #[serde(rename = "Z")]
    pub z: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub r_squared: f64,
    pub ks_statistic: Option<f64>,
    /// Set when the data are constant and only `X` is meaningful.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RationalFit {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub r_squared: f64,
    pub ks_statistic: Option<f64>,
    pub degenerate: bool,
}

pub fn eval_sigmoid(fit: &SigmoidFit, t: f64) -> f64 {
    sigmoid(fit.x, fit.y, fit.z, fit.d, t)
}

fn sigmoid(x: f64, y: f64, z: f64, d: f64, t: f64) -> f64 {
    x - y / (1.0 + (-z * (t - d)).exp())
}

/// Evaluates the rational law; errors at or behind the pole `t = -B`.
pub fn eval_rational(fit: &RationalFit, t: f64) -> Result<f64, SurrogateError> {
    if t + fit.b <= 0.0 {
        return Err(SurrogateError::PoleInWindow(-fit.b));
    }
    Ok(fit.a / (t + fit.b) + fit.c)
}

/// Coefficient of determination `1 - SS_res / SS_tot`.
pub fn r_squared(observed: &[f64], predicted: &[f64]) -> Result<f64, SurrogateError> {
    if observed.len() != predicted.len() {
        return Err(SurrogateError::LengthMismatch(observed.len(), predicted.len()));
    }
    if observed.len() < 2 {
        return Err(SurrogateError::TooFewSamples {
            needed: 2,
            got: observed.len(),
        });
    }
    let mean = observed.iter().sum::<f64>() / observed.len() as f64;
    let ss_tot: f64 = observed.iter().map(|o| (o - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(SurrogateError::ZeroVariance);
    }
    let ss_res: f64 = observed
        .iter()
        .zip(predicted)
        .map(|(o, p)| (o - p).powi(2))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Kolmogorov–Smirnov distance between the empirical CDF of the
/// standardized residuals and the standard normal CDF.
pub fn ks_statistic(residuals: &[f64]) -> Result<f64, SurrogateError> {
    let n = residuals.len();
    if n < 2 {
        return Err(SurrogateError::TooFewSamples { needed: 2, got: n });
    }
    if residuals.iter().any(|r| !r.is_finite()) {
        return Err(SurrogateError::NonFinite);
    }
    let mean = residuals.iter().sum::<f64>() / n as f64;
    let var = residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var <= 0.0 {
        return Err(SurrogateError::ZeroVariance);
    }
    let sd = var.sqrt();
    let mut z: Vec<f64> = residuals.iter().map(|r| (r - mean) / sd).collect();
    z.sort_by(f64::total_cmp);
    let normal = Normal::standard();
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, zi) in z.iter().enumerate() {
        let f = normal.cdf(*zi);
        d = d.max((i + 1) as f64 / nf - f).max(f - i as f64 / nf);
    }
    Ok(d)
}

/// Validates a sample window and returns `(t0, span)` for normalization.
fn check_samples(times: &[f64], values: &[f64], needed: usize) -> Result<(f64, f64), SurrogateError> {
    if times.len() != values.len() {
        return Err(SurrogateError::LengthMismatch(times.len(), values.len()));
    }
    if times.len() < needed {
        return Err(SurrogateError::TooFewSamples {
            needed,
            got: times.len(),
        });
    }
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SurrogateError::BadTimes);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(SurrogateError::NonFinite);
    }
    let t0 = times[0];
    Ok((t0, times[times.len() - 1] - t0))
}

fn is_constant(values: &[f64]) -> bool {
    let (lo, hi) = min_max(values);
    hi - lo <= 1e-14 * hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE)
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

fn goodness(observed: &[f64], predicted: &[f64]) -> (f64, Option<f64>) {
    let r2 = r_squared(observed, predicted).unwrap_or(1.0);
    let residuals: Vec<f64> = observed.iter().zip(predicted).map(|(o, p)| o - p).collect();
    let ks = if residuals.len() >= 5 {
        ks_statistic(&residuals).ok()
    } else {
        None
    };
    (r2, ks)
}

/// Default logistic initializer `[X, Y, Z, D]` from the data shape.
pub fn sigmoid_initial_guess(times: &[f64], values: &[f64]) -> [f64; 4] {
    let (lo, hi) = min_max(values);
    let amp = hi - lo;
    let mut steepest = 0.0;
    let mut t_steep = times[0];
    for i in 0..times.len() - 1 {
        let slope = (values[i + 1] - values[i]) / (times[i + 1] - times[i]);
        if slope < steepest {
            steepest = slope;
            t_steep = 0.5 * (times[i] + times[i + 1]);
        }
    }
    let z = if amp > 0.0 { 4.0 * steepest.abs() / amp } else { 0.0 };
    [hi, amp, z, t_steep]
}

/// Fits the decreasing logistic to `(times, values)`.
pub fn fit_sigmoid(
    times: &[f64],
    values: &[f64],
    init: Option<[f64; 4]>,
) -> Result<SigmoidFit, SurrogateError> {
    let (t0, span) = check_samples(times, values, 8)?;
    if is_constant(values) {
        return Ok(SigmoidFit {
            x: values[0],
            y: 0.0,
            z: 0.0,
            d: t0 + 0.5 * span,
            r_squared: 1.0,
            ks_statistic: None,
            degenerate: true,
        });
    }
    let [x, y, z, d] = init.unwrap_or_else(|| sigmoid_initial_guess(times, values));
    let u: Vec<f64> = times.iter().map(|t| (t - t0) / span).collect();
    let theta0 = [x, y, z * span, (d - t0) / span];

    let model = |p: &[f64], out: &mut [f64], jac: Option<&mut DMatrix<f64>>| {
        let mut jac = jac;
        for (i, &ui) in u.iter().enumerate() {
            let e = (-p[2] * (ui - p[3])).exp();
            let s = 1.0 / (1.0 + e);
            out[i] = p[0] - p[1] * s;
            if let Some(j) = jac.as_deref_mut() {
                // ds/dz = (u - d) s (1 - s), ds/dd = -z s (1 - s)
                let ss = s * (1.0 - s);
                j[(i, 0)] = 1.0;
                j[(i, 1)] = -s;
                j[(i, 2)] = -p[1] * (ui - p[3]) * ss;
                j[(i, 3)] = p[1] * p[2] * ss;
            }
        }
        true
    };
    let p = levenberg_marquardt(&theta0, values, model)?;
    let (mut x, mut y, mut z, mut d) = (p[0], p[1], p[2] / span, t0 + p[3] * span);
    if z < 0.0 {
        // Same curve with the opposite orientation of the logistic.
        x -= y;
        y = -y;
        z = -z;
    }
    if y < 0.0 {
        // An increasing curve cannot satisfy Y >= 0 with Z >= 0; keep the
        // least-squares optimum but report it through the flag.
        let pred: Vec<f64> = times.iter().map(|&t| sigmoid(x, y, z, d, t)).collect();
        let (r2, ks) = goodness(values, &pred);
        return Ok(SigmoidFit {
            x,
            y,
            z,
            d,
            r_squared: r2,
            ks_statistic: ks,
            degenerate: true,
        });
    }
    if !d.is_finite() {
        d = t0 + 0.5 * span;
    }
    let pred: Vec<f64> = times.iter().map(|&t| sigmoid(x, y, z, d, t)).collect();
    let (r2, ks) = goodness(values, &pred);
    Ok(SigmoidFit {
        x,
        y,
        z,
        d,
        r_squared: r2,
        ks_statistic: ks,
        degenerate: false,
    })
}

/// Default rational initializer `[A, B, C]`.
pub fn rational_initial_guess(times: &[f64], values: &[f64]) -> [f64; 3] {
    let t_first = times[0];
    let b0 = (times[times.len() - 1] - t_first) / 10.0;
    let first = values[0];
    let last = values[values.len() - 1];
    [(first - last) * (t_first + b0), b0, last]
}

/// Largest pole offset, in units of the data span. Beyond it the rational
/// law is a straight line over the window to within 1e-12 relative
/// curvature, and data with linear or convex trends would otherwise drive
/// the pole to infinity without converging.
pub const MAX_POLE_OFFSET: f64 = 1e6;

/// Fits `A / (t + B) + C` with the pole kept left of the data window.
///
/// Without an explicit initializer the fit is started both from
/// [`rational_initial_guess`] and from the best point of the profile over
/// the pole offset (for fixed `B` the law is linear in `A` and `C`), and the
/// better optimum is returned.
pub fn fit_rational(
    times: &[f64],
    values: &[f64],
    init: Option<[f64; 3]>,
) -> Result<RationalFit, SurrogateError> {
    let (t0, span) = check_samples(times, values, 6)?;
    if is_constant(values) {
        return Ok(RationalFit {
            a: 0.0,
            b: rational_initial_guess(times, values)[1],
            c: values[0],
            r_squared: 1.0,
            ks_statistic: None,
            degenerate: true,
        });
    }
    let starts: Vec<[f64; 3]> = match init {
        Some(i) => vec![i],
        None => vec![
            rational_initial_guess(times, values),
            rational_profile_guess(times, values),
        ],
    };

    let u: Vec<f64> = times.iter().map(|t| (t - t0) / span).collect();
    // Parameters (A/span, ln((B + t0)/span), C); the log keeps the pole
    // left of the window.
    let model = |p: &[f64], out: &mut [f64], jac: Option<&mut DMatrix<f64>>| {
        let b = p[1].exp();
        if !(b > 0.0 && b <= MAX_POLE_OFFSET) {
            return false;
        }
        let mut jac = jac;
        for (i, &ui) in u.iter().enumerate() {
            let w = 1.0 / (ui + b);
            out[i] = p[0] * w + p[2];
            if let Some(j) = jac.as_deref_mut() {
                j[(i, 0)] = w;
                j[(i, 1)] = -p[0] * w * w * b;
                j[(i, 2)] = 1.0;
            }
        }
        true
    };

    let mut best: Option<(f64, RationalFit)> = None;
    let mut last_err = None;
    for [a, b, c] in starts {
        if t0 + b <= 0.0 {
            last_err = Some(SurrogateError::PoleInWindow(-b));
            continue;
        }
        let theta0 = [a / span, ((b + t0) / span).ln(), c];
        let p = match levenberg_marquardt(&theta0, values, model) {
            Ok(p) => p,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let fit = RationalFit {
            a: p[0] * span,
            b: p[1].exp() * span - t0,
            c: p[2],
            r_squared: 0.0,
            ks_statistic: None,
            degenerate: false,
        };
        let Ok(pred) = times
            .iter()
            .map(|&t| eval_rational(&fit, t))
            .collect::<Result<Vec<_>, _>>()
        else {
            last_err = Some(SurrogateError::PoleInWindow(-fit.b));
            continue;
        };
        let ss: f64 = values.iter().zip(&pred).map(|(o, q)| (o - q).powi(2)).sum();
        if best.as_ref().is_none_or(|(s, _)| ss < *s) {
            let (r2, ks) = goodness(values, &pred);
            best = Some((
                ss,
                RationalFit {
                    r_squared: r2,
                    ks_statistic: ks,
                    ..fit
                },
            ));
        }
    }
    match best {
        Some((_, fit)) => Ok(fit),
        None => Err(last_err.expect("at least one start")),
    }
}

/// Linear least squares for `A, C` at a fixed normalized pole offset `b`;
/// returns `(A, C, SS)`.
fn rational_linear_solve(u: &[f64], values: &[f64], b: f64) -> (f64, f64, f64) {
    let n = u.len() as f64;
    let (mut sw, mut sww, mut sy, mut swy) = (0.0, 0.0, 0.0, 0.0);
    for (&ui, &y) in u.iter().zip(values) {
        let w = 1.0 / (ui + b);
        sw += w;
        sww += w * w;
        sy += y;
        swy += w * y;
    }
    let det = n * sww - sw * sw;
    let (a, c) = if det.abs() <= 1e-300 {
        (0.0, sy / n)
    } else {
        ((n * swy - sw * sy) / det, (sww * sy - sw * swy) / det)
    };
    let ss = u
        .iter()
        .zip(values)
        .map(|(&ui, &y)| (y - a / (ui + b) - c).powi(2))
        .sum();
    (a, c, ss)
}

/// Initializer `[A, B, C]` minimizing the residual over the pole offset on
/// a logarithmic grid between 1e-4 and [`MAX_POLE_OFFSET`] spans, refined by
/// golden-section search.
pub fn rational_profile_guess(times: &[f64], values: &[f64]) -> [f64; 3] {
    let t0 = times[0];
    let span = times[times.len() - 1] - t0;
    let u: Vec<f64> = times.iter().map(|t| (t - t0) / span).collect();
    let (lo, hi) = ((1e-4f64).ln(), MAX_POLE_OFFSET.ln());
    let n_grid = 121;
    let at = |i: usize| lo + (hi - lo) * i as f64 / (n_grid - 1) as f64;
    let profile = |lb: f64| rational_linear_solve(&u, values, lb.exp()).2;
    let best = (0..n_grid)
        .min_by(|&i, &j| profile(at(i)).total_cmp(&profile(at(j))))
        .expect("grid is not empty");
    let (mut a, mut b) = (at(best.saturating_sub(1)), at((best + 1).min(n_grid - 1)));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        if profile(x1) <= profile(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let lb = 0.5 * (a + b);
    let (amp, c, _) = rational_linear_solve(&u, values, lb.exp());
    [amp * span, lb.exp() * span - t0, c]
}

/// Damped Gauss–Newton with Marquardt diagonal scaling.
///
/// `model(p, out, jac)` writes predictions (and the Jacobian when asked) and
/// returns `false` if `p` lies outside the admissible region; such trial
/// steps are rejected like steps that increase the residual.
fn levenberg_marquardt<F>(theta0: &[f64], data: &[f64], mut model: F) -> Result<Vec<f64>, SurrogateError>
where
    F: FnMut(&[f64], &mut [f64], Option<&mut DMatrix<f64>>) -> bool,
{
    let m = data.len();
    let n = theta0.len();
    let data_scale: f64 = data.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut p = theta0.to_vec();
    let mut pred = vec![0.0; m];
    let mut jac = DMatrix::zeros(m, n);
    if !model(&p, &mut pred, Some(&mut jac)) {
        return Err(SurrogateError::NoConvergence(0));
    }
    let ss_of = |pred: &[f64]| -> f64 { pred.iter().zip(data).map(|(a, b)| (b - a).powi(2)).sum() };
    let mut ss = ss_of(&pred);
    let mut lambda = 1e-3;
    let mut trial = vec![0.0; n];
    let mut trial_pred = vec![0.0; m];

    for _ in 0..MAX_ITERATIONS {
        if ss <= 1e-28 * data_scale {
            return Ok(p);
        }
        let r = DVector::from_iterator(m, data.iter().zip(&pred).map(|(d, q)| d - q));
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let diag: Vec<f64> = (0..n).map(|i| jtj[(i, i)].max(1e-300)).collect();

        let mut improved = false;
        while lambda < 1e20 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * diag[i];
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&g)) else {
                lambda *= 10.0;
                continue;
            };
            for i in 0..n {
                trial[i] = p[i] + step[i];
            }
            if trial.iter().all(|v| v.is_finite()) && model(&trial, &mut trial_pred, None) {
                let trial_ss = ss_of(&trial_pred);
                if trial_ss.is_finite() && trial_ss <= ss {
                    let change = ss - trial_ss;
                    p.copy_from_slice(&trial);
                    model(&p, &mut pred, Some(&mut jac));
                    ss = trial_ss;
                    lambda = (lambda / 10.0).max(1e-12);
                    if change <= SS_REL_TOL * ss {
                        return Ok(p);
                    }
                    improved = true;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            // No descent direction left at machine precision.
            return Ok(p);
        }
    }
    Err(SurrogateError::NoConvergence(MAX_ITERATIONS))
}

/// Rows `(t, observed, predicted, residual)` as CSV.
pub fn residual_csv(times: &[f64], observed: &[f64], predicted: &[f64]) -> String {
    let mut out = String::from("t,observed,predicted,residual\n");
    for ((t, o), p) in times.iter().zip(observed).zip(predicted) {
        out.push_str(&format!("{t:.16e},{o:.16e},{p:.16e},{:.16e}\n", o - p));
    }
    out
}
