use std::convert::Infallible;

use hapsim_core::params::{ParameterBounds, ParameterRange};
use hapsim_core::sensitivity::*;
use proptest::prelude::*;

fn linear(a: Vec<f64>) -> impl Fn(&[f64]) -> Result<Vec<f64>, Infallible> + Sync {
    move |x: &[f64]| Ok(vec![a.iter().zip(x).map(|(a, x)| a * x).sum()])
}

#[test]
fn linear_model_effects_equal_coefficients() {
    let a = vec![3.0, -1.5, 0.25, 7.0, 0.0];
    let bounds = ParameterBounds::unit(a.len());
    let design = build_trajectories(a.len(), 4, 12, &bounds, 9).unwrap();
    let model = linear(a.clone());
    let outputs: Vec<Option<Vec<f64>>> = design.unit_points().map(|x| model(x).ok()).collect();
    let ee = elementary_effects(&design, &outputs).unwrap();
    for traj in &ee[0] {
        for (i, e) in traj.iter().enumerate() {
            assert!((e.unwrap() - a[i]).abs() < 1e-12);
        }
    }
    let report = run_morris(linear(a.clone()), &bounds, 12, 4, 9, &["y"]).unwrap();
    for (rec, ai) in report.qoi("y").unwrap().parameters.iter().zip(&a) {
        assert!((rec.stats.mu - ai).abs() < 1e-12);
        assert!((rec.stats.mu_star - ai.abs()).abs() < 1e-12);
        assert!(rec.stats.sigma <= 1e-12);
    }
}

#[test]
fn effects_scale_with_physical_ranges() {
    // on x3 in [2, 6] a projection has unit-cube effect 4
    let bounds = ParameterBounds::new(
        [(0.0, 1.0), (-1.0, 1.0), (2.0, 6.0)]
            .iter()
            .enumerate()
            .map(|(i, &(min, max))| ParameterRange {
                name: format!("p{i}"),
                min,
                max,
            })
            .collect(),
    )
    .unwrap();
    let report = run_morris(|x: &[f64]| Ok::<_, Infallible>(vec![x[2]]), &bounds, 6, 4, 1, &["y"]).unwrap();
    let q = report.qoi("y").unwrap();
    assert_eq!(q.get("p0").unwrap().mu_star, 0.0);
    assert_eq!(q.get("p1").unwrap().mu_star, 0.0);
    assert!((q.get("p2").unwrap().mu_star - 4.0).abs() < 1e-12);
}

#[test]
fn constant_model_has_zero_effects() {
    let bounds = ParameterBounds::unit(3);
    let report = run_morris(|_: &[f64]| Ok::<_, Infallible>(vec![2.5]), &bounds, 5, 4, 2, &["y"]).unwrap();
    for rec in &report.qoi("y").unwrap().parameters {
        assert_eq!((rec.stats.mu, rec.stats.mu_star, rec.stats.sigma), (0.0, 0.0, 0.0));
        assert_eq!(rec.stats.sigma_over_mu_star, None);
    }
}

#[test]
fn absolute_value_model_gives_both_signs() {
    let p = 4;
    let delta = p as f64 / (2.0 * (p as f64 - 1.0));
    // every admissible base level and its elementary effect
    let levels: Vec<f64> = (0..p).map(|i| i as f64 / (p - 1) as f64).collect();
    let f = |x: f64| (x - 0.5).abs();
    let possible: Vec<f64> = levels
        .iter()
        .filter(|&&x| x + delta <= 1.0 + 1e-12)
        .map(|&x| (f(x + delta) - f(x)) / delta)
        .collect();
    assert!(possible.iter().any(|&e| e > 0.0) && possible.iter().any(|&e| e < 0.0));

    let bounds = ParameterBounds::unit(2);
    let design = build_trajectories(2, p, 40, &bounds, 4).unwrap();
    let outputs: Vec<Option<Vec<f64>>> = design.unit_points().map(|x| Some(vec![f(x[0])])).collect();
    let ee = elementary_effects(&design, &outputs).unwrap();
    let e1: Vec<f64> = ee[0].iter().map(|t| t[0].unwrap()).collect();
    for e in &e1 {
        assert!(possible.iter().any(|p| (p - e).abs() < 1e-12), "{e}");
    }
    assert!(e1.iter().any(|&e| e > 0.0) && e1.iter().any(|&e| e < 0.0));
    let s = morris_stats(&e1).unwrap();
    assert!(s.mu.abs() < s.mu_star);
}

#[test]
fn morris_design_counts() {
    let bounds = ParameterBounds::unit(14);
    let design = build_trajectories(14, 4, 70, &bounds, 42).unwrap();
    assert_eq!(design.n_points(), 1050);
    assert_eq!(design.unit_points().count(), 1050);
    let small = build_trajectories(2, 4, 1, &ParameterBounds::unit(2), 0).unwrap();
    assert_eq!(small.trajectories[0].points.len(), 3);
    assert!((small.delta - 2.0 / 3.0).abs() < 1e-15);
}

#[test]
fn same_seed_same_report() {
    let bounds = ParameterBounds::unit(4);
    let model = |x: &[f64]| Ok::<_, Infallible>(vec![x[0] * x[1] + x[2].sin(), x[3]]);
    let a = run_morris(model, &bounds, 8, 4, 17, &["a", "b"]).unwrap();
    let b = run_morris(model, &bounds, 8, 4, 17, &["a", "b"]).unwrap();
    assert_eq!(a, b);
    let c = run_morris(model, &bounds, 8, 4, 18, &["a", "b"]).unwrap();
    assert_ne!(a, c);
}

#[test]
fn sobol_additive_model_matches_variance_shares() {
    let a = vec![1.0, 2.0, 3.0, 0.5];
    let total: f64 = a.iter().map(|v| v * v).sum();
    let bounds = ParameterBounds::unit(a.len());
    let report = run_sobol(linear(a.clone()), &bounds, 1 << 14, 5, &["y"]).unwrap();
    assert_eq!(report.evaluations, (1 << 14) * 6);
    let q = report.qoi("y").unwrap();
    for (i, (_, idx)) in q.indices.iter().enumerate() {
        let exact = a[i] * a[i] / total;
        assert!((idx.s_i - exact).abs() < 0.02, "S_{i} = {}", idx.s_i);
        assert!((idx.s_ti - idx.s_i).abs() < 0.02);
    }
}

#[test]
fn sobol_single_factor() {
    let bounds = ParameterBounds::unit(3);
    let report = run_sobol(|x: &[f64]| Ok::<_, Infallible>(vec![x[0]]), &bounds, 1 << 12, 1, &["y"]).unwrap();
    let q = report.qoi("y").unwrap();
    let x1 = q.get("x1").unwrap();
    assert!((x1.s_i - 1.0).abs() < 0.02 && (x1.s_ti - 1.0).abs() < 0.02);
    for name in ["x2", "x3"] {
        let idx = q.get(name).unwrap();
        assert!(idx.s_i.abs() < 0.02 && idx.s_ti.abs() < 0.02);
    }
}

/// First-order and total indices of `f` on the unit square by midpoint
/// quadrature on an `m x m` grid.
fn tensor_indices(f: impl Fn(f64, f64) -> f64, m: usize) -> [(f64, f64); 2] {
    let g: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) / m as f64).collect();
    let y: Vec<Vec<f64>> = g.iter().map(|&a| g.iter().map(|&b| f(a, b)).collect()).collect();
    let n = (m * m) as f64;
    let mean = y.iter().flatten().sum::<f64>() / n;
    let var = y.iter().flatten().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let row_means: Vec<f64> = y.iter().map(|r| r.iter().sum::<f64>() / m as f64).collect();
    let col_means: Vec<f64> = (0..m).map(|j| y.iter().map(|r| r[j]).sum::<f64>() / m as f64).collect();
    let v_of = |means: &[f64]| means.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m as f64;
    let (v1, v2) = (v_of(&row_means), v_of(&col_means));
    // total effect of x1 = 1 - V(E[Y | x2]) / V
    [(v1 / var, 1.0 - v2 / var), (v2 / var, 1.0 - v1 / var)]
}

#[test]
fn sobol_pure_interaction() {
    let f = |a: f64, b: f64| (a - 0.5) * (b - 0.5);
    let oracle = tensor_indices(f, 400);
    let bounds = ParameterBounds::unit(2);
    let report = run_sobol(|x: &[f64]| Ok::<_, Infallible>(vec![f(x[0], x[1])]), &bounds, 1 << 14, 3, &["y"]).unwrap();
    let q = report.qoi("y").unwrap();
    for (i, (_, idx)) in q.indices.iter().enumerate() {
        assert!((idx.s_i - oracle[i].0).abs() < 0.05, "S_{i} {}", idx.s_i);
        assert!((idx.s_ti - oracle[i].1).abs() < 0.05, "S_T{i} {}", idx.s_ti);
    }
    assert!(oracle[0].0.abs() < 1e-12 && (oracle[0].1 - 1.0).abs() < 1e-12);
}

#[test]
fn saltelli_design_shape_and_determinism() {
    let bounds = ParameterBounds::unit(3);
    let d = saltelli_sample(3, 4, &bounds, 11).unwrap();
    assert_eq!(d.n_evaluations(), 20);
    assert_eq!(d.unit_points().count(), 20);
    assert!(d.unit_points().flatten().all(|&v| (0.0..=1.0).contains(&v)));
    assert_eq!(d, saltelli_sample(3, 4, &bounds, 11).unwrap());
    let wide = saltelli_sample(14, 4, &ParameterBounds::unit(14), 0).unwrap();
    assert_eq!(wide.n_evaluations(), 64);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn trajectories_change_each_coordinate_once(k in 1usize..16, half_p in 1usize..5, r in 1usize..6, seed in any::<u64>()) {
        let p = 2 * half_p;
        let design = build_trajectories(k, p, r, &ParameterBounds::unit(k), seed).unwrap();
        prop_assert_eq!(design.trajectories.len(), r);
        for traj in &design.trajectories {
            let mut order = traj.order.clone();
            order.sort_unstable();
            prop_assert_eq!(order, (0..k).collect::<Vec<_>>());
            for (j, w) in traj.points.windows(2).enumerate() {
                let changed: Vec<usize> = (0..k).filter(|&i| w[0][i] != w[1][i]).collect();
                prop_assert_eq!(changed, vec![traj.order[j]]);
                let i = traj.order[j];
                prop_assert!(((w[1][i] - w[0][i]).abs() - design.delta).abs() < 1e-12);
            }
            for x in &traj.points {
                for &v in x {
                    prop_assert!((0.0..=1.0).contains(&v));
                    let level = v * (p - 1) as f64;
                    prop_assert!((level - level.round()).abs() < 1e-9);
                }
            }
        }
    }
}
