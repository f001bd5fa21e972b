//! Global sensitivity analysis: Morris elementary effects and Sobol indices
//! (Saltelli sampling).
//!
//! Models are functions from physical parameter vectors (ordered as the
//! [`ParameterBounds`]) to a vector of quantities of interest. All designs
//! live in the unit cube and are mapped affinely onto the bounds; elementary
//! effects are reported in unit-cube coordinates so that they are
//! comparable across parameters.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::params::ParameterBounds;

/// Largest fraction of failed evaluations a Morris run tolerates.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum SensitivityError {
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error("expected {expected} outputs, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("need at least 2 elementary effects, got {0}")]
    TooFewEffects(usize),
    #[error("{failed} of {total} model evaluations failed")]
    TooManyFailures { failed: usize, total: usize },
    #[error("model evaluation {index} failed: {message}")]
    EvaluationFailed { index: usize, message: String },
    #[error("zero output variance for `{0}`")]
    ZeroVariance(String),
}

/// One Morris trajectory: `k + 1` unit-cube points, consecutive points
/// differing in exactly one coordinate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MorrisTrajectory {
    pub points: Vec<Vec<f64>>,
    /// Coordinate changed between point `j` and `j + 1`.
    pub order: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MorrisDesign {
    pub k: usize,
    pub p: usize,
    pub delta: f64,
    pub r: usize,
    pub trajectories: Vec<MorrisTrajectory>,
    pub seed: u64,
    pub bounds: ParameterBounds,
}

impl MorrisDesign {
    pub fn n_points(&self) -> usize {
        self.r * (self.k + 1)
    }

    /// All unit-cube points, trajectory by trajectory.
    pub fn unit_points(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.trajectories.iter().flat_map(|t| t.points.iter())
    }
}

/// Builds `r` random trajectories on the `p`-level grid with step
/// `delta = p / (2 (p - 1))`.
pub fn build_trajectories(
    k: usize,
    p: usize,
    r: usize,
    bounds: &ParameterBounds,
    seed: u64,
) -> Result<MorrisDesign, SensitivityError> {
    if k == 0 || r == 0 {
        return Err(SensitivityError::InvalidDesign("need k >= 1 and r >= 1".into()));
    }
    if p < 2 || p % 2 != 0 {
        return Err(SensitivityError::InvalidDesign(format!(
            "grid levels must be even and >= 2, got {p}"
        )));
    }
    if bounds.len() != k {
        return Err(SensitivityError::InvalidDesign(format!(
            "{} bounds for k = {k}",
            bounds.len()
        )));
    }
    let last = p - 1;
    let jump = p / 2;
    let level = |j: usize| j as f64 / last as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trajectories = Vec::with_capacity(r);
    for _ in 0..r {
        let mut base = Vec::with_capacity(k);
        let mut up = Vec::with_capacity(k);
        for _ in 0..k {
            // Levels 0..p/2 can step up by p/2 levels, the rest step down.
            let j = rng.random_range(0..p);
            base.push(j);
            up.push(j < jump);
        }
        let mut order: Vec<usize> = (0..k).collect();
        order.shuffle(&mut rng);
        let mut points = Vec::with_capacity(k + 1);
        let mut current = base.clone();
        points.push(current.iter().map(|&j| level(j)).collect());
        for &i in &order {
            current[i] = if up[i] {
                current[i] + jump
            } else {
                current[i] - jump
            };
            points.push(current.iter().map(|&j| level(j)).collect());
        }
        trajectories.push(MorrisTrajectory { points, order });
    }
    Ok(MorrisDesign {
        k,
        p,
        delta: p as f64 / (2.0 * last as f64),
        r,
        trajectories,
        seed,
        bounds: bounds.clone(),
    })
}

/// Elementary effects per QoI as `r x k` matrices; `None` where one of the
/// two points failed.
pub fn elementary_effects(
    design: &MorrisDesign,
    outputs: &[Option<Vec<f64>>],
) -> Result<Vec<Vec<Vec<Option<f64>>>>, SensitivityError> {
    if outputs.len() != design.n_points() {
        return Err(SensitivityError::LengthMismatch {
            expected: design.n_points(),
            got: outputs.len(),
        });
    }
    let n_qoi = outputs
        .iter()
        .flatten()
        .map(Vec::len)
        .next()
        .unwrap_or(0);
    let mut ee = vec![vec![vec![None; design.k]; design.r]; n_qoi];
    for (t, traj) in design.trajectories.iter().enumerate() {
        let base = t * (design.k + 1);
        for (step, &i) in traj.order.iter().enumerate() {
            let dx = traj.points[step + 1][i] - traj.points[step][i];
            let (Some(y0), Some(y1)) = (&outputs[base + step], &outputs[base + step + 1]) else {
                continue;
            };
            for q in 0..n_qoi {
                ee[q][t][i] = Some((y1[q] - y0[q]) / dx);
            }
        }
    }
    Ok(ee)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MorrisStats {
    pub mu: f64,
    pub mu_star: f64,
    pub sigma: f64,
    /// Undefined (`None`) when `mu_star` is zero.
    pub sigma_over_mu_star: Option<f64>,
}

/// Mean, mean absolute value and sample standard deviation of a set of
/// elementary effects.
pub fn morris_stats(ee: &[f64]) -> Result<MorrisStats, SensitivityError> {
    let r = ee.len();
    if r < 2 {
        return Err(SensitivityError::TooFewEffects(r));
    }
    let n = r as f64;
    let mu = ee.iter().sum::<f64>() / n;
    let mu_star = ee.iter().map(|e| e.abs()).sum::<f64>() / n;
    let sigma = (ee.iter().map(|e| (e - mu).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    Ok(MorrisStats {
        mu,
        mu_star,
        sigma,
        sigma_over_mu_star: (mu_star > 0.0).then(|| sigma / mu_star),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterRecord {
    pub parameter: String,
    #[serde(flatten)]
    pub stats: MorrisStats,
    /// Elementary effects that entered the statistics.
    pub n_effects: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QoiRecord {
    pub qoi: String,
    pub parameters: Vec<ParameterRecord>,
}

impl QoiRecord {
    pub fn get(&self, parameter: &str) -> Option<&MorrisStats> {
        self.parameters
            .iter()
            .find(|p| p.parameter == parameter)
            .map(|p| &p.stats)
    }

    /// Parameter names sorted by decreasing `mu_star`.
    pub fn ranking(&self) -> Vec<&str> {
        let mut v: Vec<&ParameterRecord> = self.parameters.iter().collect();
        v.sort_by(|a, b| b.stats.mu_star.total_cmp(&a.stats.mu_star));
        v.into_iter().map(|p| p.parameter.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub parameters: Vec<String>,
    pub qoi_labels: Vec<String>,
    pub records: Vec<QoiRecord>,
    pub evaluations: usize,
    pub failed_evaluations: usize,
    pub r: usize,
    pub p: usize,
    pub delta: f64,
    pub seed: u64,
}

impl SensitivityReport {
    pub fn qoi(&self, label: &str) -> Option<&QoiRecord> {
        self.records.iter().find(|r| r.qoi == label)
    }

    /// One row per (QoI, parameter).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("qoi,parameter,mu,mu_star,sigma,sigma_over_mu_star,n_effects\n");
        for rec in &self.records {
            for p in &rec.parameters {
                let ratio = p
                    .stats
                    .sigma_over_mu_star
                    .map_or_else(String::new, |v| format!("{v:.16e}"));
                out.push_str(&format!(
                    "{},{},{:.16e},{:.16e},{:.16e},{},{}\n",
                    rec.qoi, p.parameter, p.stats.mu, p.stats.mu_star, p.stats.sigma, ratio, p.n_effects
                ));
            }
        }
        out
    }

    /// Points of the `(mu_star, sigma)` plane, one block per QoI.
    pub fn scatter_csv(&self) -> String {
        let mut out = String::from("qoi,parameter,mu_star,sigma\n");
        for rec in &self.records {
            for p in &rec.parameters {
                out.push_str(&format!(
                    "{},{},{:.16e},{:.16e}\n",
                    rec.qoi, p.parameter, p.stats.mu_star, p.stats.sigma
                ));
            }
        }
        out
    }
}

/// Evaluates `model` at every point (in parallel, results in input order).
/// Failures and non-finite outputs become `None`.
fn evaluate_all<F, E>(model: &F, points: &[Vec<f64>], n_qoi: usize) -> Vec<Option<Vec<f64>>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, E> + Sync,
{
    points
        .par_iter()
        .map(|x| match model(x) {
            Ok(y) if y.len() == n_qoi && y.iter().all(|v| v.is_finite()) => Some(y),
            _ => None,
        })
        .collect()
}

/// Morris screening of `model` over `bounds`.
///
/// `model` receives physical parameter values in bound order and returns
/// one value per label in `qoi_labels`. Failed evaluations drop only the
/// elementary effects that touch them; more than
/// [`MAX_FAILURE_FRACTION`] failures abort the analysis.
pub fn run_morris<F, E>(
    model: F,
    bounds: &ParameterBounds,
    r: usize,
    p: usize,
    seed: u64,
    qoi_labels: &[&str],
) -> Result<SensitivityReport, SensitivityError>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, E> + Sync,
{
    let design = build_trajectories(bounds.len(), p, r, bounds, seed)?;
    let points: Vec<Vec<f64>> = design.unit_points().map(|u| bounds.scale(u)).collect();
    let outputs = evaluate_all(&model, &points, qoi_labels.len());
    report_from_outputs(&design, &outputs, qoi_labels)
}

/// Aggregates precomputed outputs (aligned with the design points).
pub fn report_from_outputs(
    design: &MorrisDesign,
    outputs: &[Option<Vec<f64>>],
    qoi_labels: &[&str],
) -> Result<SensitivityReport, SensitivityError> {
    let total = outputs.len();
    let failed = outputs.iter().filter(|o| o.is_none()).count();
    if failed as f64 > MAX_FAILURE_FRACTION * total as f64 {
        return Err(SensitivityError::TooManyFailures { failed, total });
    }
    let ee = elementary_effects(design, outputs)?;
    let names = design.bounds.names();
    let mut records = Vec::with_capacity(qoi_labels.len());
    for (q, label) in qoi_labels.iter().enumerate() {
        let mut params = Vec::with_capacity(design.k);
        for (i, name) in names.iter().enumerate() {
            let effects: Vec<f64> = ee
                .get(q)
                .map(|m| m.iter().filter_map(|row| row[i]).collect())
                .unwrap_or_default();
            params.push(ParameterRecord {
                parameter: name.clone(),
                stats: morris_stats(&effects)?,
                n_effects: effects.len(),
            });
        }
        records.push(QoiRecord {
            qoi: label.to_string(),
            parameters: params,
        });
    }
    if failed > 0 {
        eprintln!("warning: {failed} of {total} model evaluations failed and were skipped");
    }
    Ok(SensitivityReport {
        parameters: names,
        qoi_labels: qoi_labels.iter().map(|s| s.to_string()).collect(),
        records,
        evaluations: total,
        failed_evaluations: failed,
        r: design.r,
        p: design.p,
        delta: design.delta,
        seed: design.seed,
    })
}

/// Saltelli design: base matrices `A`, `B` and the cross matrices `A_B^(i)`
/// (column `i` of `A` replaced by that of `B`), all in the unit cube.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SobolDesign {
    pub k: usize,
    pub n: usize,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub ab: Vec<Vec<Vec<f64>>>,
    pub seed: u64,
    pub bounds: ParameterBounds,
}

impl SobolDesign {
    pub fn n_evaluations(&self) -> usize {
        self.n * (self.k + 2)
    }

    /// Evaluation order: `A`, `B`, then `A_B^(1..k)`.
    pub fn unit_points(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.a
            .iter()
            .chain(self.b.iter())
            .chain(self.ab.iter().flat_map(|m| m.iter()))
    }
}

/// Largest supported sample count (Sobol sequence length).
pub const MAX_SOBOL_SAMPLES: usize = 1 << 16;

/// Draws `A` and `B` from one Owen-scrambled Sobol sequence (dimensions
/// `0..k` and `k..2k`).
pub fn saltelli_sample(
    k: usize,
    n: usize,
    bounds: &ParameterBounds,
    seed: u64,
) -> Result<SobolDesign, SensitivityError> {
    if k == 0 || bounds.len() != k {
        return Err(SensitivityError::InvalidDesign(format!(
            "{} bounds for k = {k}",
            bounds.len()
        )));
    }
    if !(2..=MAX_SOBOL_SAMPLES).contains(&n) {
        return Err(SensitivityError::InvalidDesign(format!(
            "n must lie in [2, {MAX_SOBOL_SAMPLES}], got {n}"
        )));
    }
    if 2 * k > sobol_burley::NUM_DIMENSIONS as usize {
        return Err(SensitivityError::InvalidDesign(format!("k = {k} is too large")));
    }
    let s = (seed ^ (seed >> 32)) as u32;
    let row = |j: usize, offset: usize| -> Vec<f64> {
        (0..k)
            .map(|d| sobol_burley::sample(j as u32, (offset + d) as u32, s) as f64)
            .collect()
    };
    let a: Vec<Vec<f64>> = (0..n).map(|j| row(j, 0)).collect();
    let b: Vec<Vec<f64>> = (0..n).map(|j| row(j, k)).collect();
    let ab = (0..k)
        .map(|i| {
            a.iter()
                .zip(&b)
                .map(|(ra, rb)| {
                    let mut x = ra.clone();
                    x[i] = rb[i];
                    x
                })
                .collect()
        })
        .collect();
    Ok(SobolDesign {
        k,
        n,
        a,
        b,
        ab,
        seed,
        bounds: bounds.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SobolIndex {
    /// First-order index (raw estimate, may be slightly negative).
    pub s_i: f64,
    /// Total-effect index.
    pub s_ti: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SobolQoi {
    pub qoi: String,
    pub variance: f64,
    pub indices: Vec<(String, SobolIndex)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SobolReport {
    pub parameters: Vec<String>,
    pub records: Vec<SobolQoi>,
    pub n: usize,
    pub evaluations: usize,
    pub seed: u64,
}

impl SobolReport {
    pub fn qoi(&self, label: &str) -> Option<&SobolQoi> {
        self.records.iter().find(|r| r.qoi == label)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("qoi,parameter,s_i,s_ti\n");
        for rec in &self.records {
            for (name, idx) in &rec.indices {
                out.push_str(&format!("{},{},{:.16e},{:.16e}\n", rec.qoi, name, idx.s_i, idx.s_ti));
            }
        }
        out
    }
}

impl SobolQoi {
    pub fn get(&self, parameter: &str) -> Option<&SobolIndex> {
        self.indices
            .iter()
            .find(|(n, _)| n == parameter)
            .map(|(_, i)| i)
    }
}

/// First-order and total-effect estimators over precomputed outputs in
/// [`SobolDesign::unit_points`] order (Saltelli 2010 first-order form,
/// Jansen total effect).
pub fn sobol_indices(
    design: &SobolDesign,
    outputs: &[Vec<f64>],
    qoi_labels: &[&str],
) -> Result<SobolReport, SensitivityError> {
    let n = design.n;
    let k = design.k;
    if outputs.len() != design.n_evaluations() {
        return Err(SensitivityError::LengthMismatch {
            expected: design.n_evaluations(),
            got: outputs.len(),
        });
    }
    let names = design.bounds.names();
    let mut records = Vec::with_capacity(qoi_labels.len());
    for (q, label) in qoi_labels.iter().enumerate() {
        let f = |j: usize| outputs[j][q];
        let fa: Vec<f64> = (0..n).map(f).collect();
        let fb: Vec<f64> = (n..2 * n).map(f).collect();
        let all = fa.iter().chain(&fb);
        let mean = all.clone().sum::<f64>() / (2 * n) as f64;
        let var = all.map(|y| (y - mean).powi(2)).sum::<f64>() / (2 * n) as f64;
        if !(var > 0.0) {
            return Err(SensitivityError::ZeroVariance(label.to_string()));
        }
        let mut indices = Vec::with_capacity(k);
        for (i, name) in names.iter().enumerate() {
            let base = (2 + i) * n;
            let mut first = 0.0;
            let mut total = 0.0;
            for j in 0..n {
                let fab = f(base + j);
                first += fb[j] * (fab - fa[j]);
                total += (fa[j] - fab).powi(2);
            }
            indices.push((
                name.clone(),
                SobolIndex {
                    s_i: first / n as f64 / var,
                    s_ti: total / (2.0 * n as f64) / var,
                },
            ));
        }
        records.push(SobolQoi {
            qoi: label.to_string(),
            variance: var,
            indices,
        });
    }
    Ok(SobolReport {
        parameters: names,
        records,
        n,
        evaluations: outputs.len(),
        seed: design.seed,
    })
}

/// Sobol analysis of `model` with `n` base samples (`n (k + 2)` runs).
/// Any failed evaluation aborts, since the estimators need complete rows.
pub fn run_sobol<F, E>(
    model: F,
    bounds: &ParameterBounds,
    n: usize,
    seed: u64,
    qoi_labels: &[&str],
) -> Result<SobolReport, SensitivityError>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, E> + Sync,
    E: std::fmt::Display,
{
    let design = saltelli_sample(bounds.len(), n, bounds, seed)?;
    let points: Vec<Vec<f64>> = design.unit_points().map(|u| bounds.scale(u)).collect();
    let outputs: Vec<Vec<f64>> = points
        .par_iter()
        .enumerate()
        .map(|(index, x)| match model(x) {
            Ok(y) if y.len() == qoi_labels.len() && y.iter().all(|v| v.is_finite()) => Ok(y),
            Ok(_) => Err(SensitivityError::EvaluationFailed {
                index,
                message: "wrong length or non-finite output".into(),
            }),
            Err(e) => Err(SensitivityError::EvaluationFailed {
                index,
                message: e.to_string(),
            }),
        })
        .collect::<Result<_, _>>()?;
    sobol_indices(&design, &outputs, qoi_labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    #[test]
    fn small_design_shape() {
        let d = build_trajectories(2, 4, 1, &ParameterBounds::unit(2), 7).unwrap();
        assert_eq!(d.delta, 2.0 / 3.0);
        assert_eq!(d.trajectories.len(), 1);
        let t = &d.trajectories[0];
        assert_eq!(t.points.len(), 3);
        assert!(t.points.iter().all(|p| p.len() == 2));
        for (s, &i) in t.order.iter().enumerate() {
            for j in 0..2 {
                let diff = (t.points[s + 1][j] - t.points[s][j]).abs();
                if j == i {
                    assert!((diff - 2.0 / 3.0).abs() < 1e-15);
                } else {
                    assert_eq!(diff, 0.0);
                }
            }
        }
    }

    #[test]
    fn design_rejects_bad_levels() {
        let b = ParameterBounds::unit(2);
        assert!(build_trajectories(2, 3, 1, &b, 0).is_err());
        assert!(build_trajectories(2, 0, 1, &b, 0).is_err());
        assert!(build_trajectories(2, 4, 0, &b, 0).is_err());
        assert!(build_trajectories(3, 4, 1, &b, 0).is_err());
    }

    #[test]
    fn stats_examples() {
        let s = morris_stats(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!((s.mu, s.mu_star, s.sigma), (1.0, 1.0, 0.0));
        let s = morris_stats(&[1.0, -1.0]).unwrap();
        assert_eq!((s.mu, s.mu_star), (0.0, 1.0));
        assert!((s.sigma - 2f64.sqrt()).abs() < 1e-15);
        let s = morris_stats(&[0.0, 0.0]).unwrap();
        assert_eq!(s.sigma_over_mu_star, None);
        assert_eq!(morris_stats(&[1.0]), Err(SensitivityError::TooFewEffects(1)));
    }

    #[test]
    fn linear_model_ranking() {
        let b = ParameterBounds::unit(2);
        let rep = run_morris(
            |x: &[f64]| Ok::<_, Infallible>(vec![3.0 * x[0] + x[1]]),
            &b,
            10,
            4,
            1,
            &["y"],
        )
        .unwrap();
        let q = rep.qoi("y").unwrap();
        assert_eq!(q.ranking(), vec!["x1", "x2"]);
        let ratio = q.get("x1").unwrap().mu_star / q.get("x2").unwrap().mu_star;
        assert!((ratio - 3.0).abs() < 1e-12);
    }

    #[test]
    fn saltelli_counts() {
        let d = saltelli_sample(3, 4, &ParameterBounds::unit(3), 5).unwrap();
        assert_eq!(d.n_evaluations(), 20);
        assert_eq!(d.unit_points().count(), 20);
        assert!(d.unit_points().flatten().all(|v| (0.0..=1.0).contains(v)));
        let d = saltelli_sample(14, 4, &ParameterBounds::unit(14), 5).unwrap();
        assert_eq!(d.n_evaluations(), 64);
        assert_eq!(d, saltelli_sample(14, 4, &ParameterBounds::unit(14), 5).unwrap());
    }

    #[test]
    fn failures_are_counted_and_capped() {
        let b = ParameterBounds::unit(3);
        // fails at a single corner value only
        let model = |x: &[f64]| {
            if x[0] == 0.0 && x[1] == 0.0 && x[2] == 0.0 {
                Err("corner")
            } else {
                Ok(vec![x[0] + x[1]])
            }
        };
        let rep = run_morris(model, &b, 40, 4, 3, &["y"]).unwrap();
        assert!(rep.failed_evaluations > 0);
        assert!(rep.qoi("y").unwrap().parameters[0].n_effects < 40);

        let always = |_: &[f64]| Err::<Vec<f64>, _>("no");
        assert!(matches!(
            run_morris(always, &b, 5, 4, 3, &["y"]),
            Err(SensitivityError::TooManyFailures { .. })
        ));
    }
}
