use hapsim_core::params::{default_protocol, ParameterSet};
use hapsim_core::pkpd0d::{simulate_0d_at, Sim0dOptions, EPSILON_C};
use hapsim_core::surrogate::*;
use proptest::prelude::*;

fn uniform(n: usize, t_max: f64) -> Vec<f64> {
    (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect()
}

fn logistic(p: [f64; 4], t: f64) -> f64 {
    p[0] - p[1] / (1.0 + (-p[2] * (t - p[3])).exp())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn sigmoid_round_trip_from_reference_values() {
    let truth = [1.0658, 0.6013, 0.00065, 4002.48];
    let t = uniform(200, 21600.0);
    let v: Vec<f64> = t.iter().map(|&t| logistic(truth, t)).collect();
    let f = fit_sigmoid(&t, &v, None).unwrap();
    for (got, want) in [f.x, f.y, f.z, f.d].into_iter().zip(truth) {
        assert!(rel(got, want) < 1e-4, "{f:?}");
    }
    assert!(f.r_squared >= 1.0 - 1e-10);
    assert!(!f.degenerate);
}

#[test]
fn sigmoid_optimum_does_not_depend_on_initializer() {
    let truth = [1.0658, 0.6013, 0.00065, 4002.48];
    let t = uniform(200, 21600.0);
    let v: Vec<f64> = t.iter().map(|&t| logistic(truth, t)).collect();
    let ss = |f: &SigmoidFit| -> f64 {
        t.iter()
            .zip(&v)
            .map(|(&t, o)| (o - eval_sigmoid(f, t)).powi(2))
            .sum()
    };
    let base = fit_sigmoid(&t, &v, None).unwrap();
    for scale in [0.7f64, 0.9, 1.1, 1.3] {
        let init = [
            truth[0] * scale.min(1.0 / scale),
            truth[1] * scale,
            truth[2] / scale,
            truth[3] * scale,
        ];
        let f = fit_sigmoid(&t, &v, Some(init)).unwrap();
        assert!((ss(&f) - ss(&base)).abs() < 1e-6, "scale {scale}: {f:?}");
    }
}

#[test]
fn sigmoid_tolerates_small_noise() {
    let truth = [1.0, 0.5, 0.001, 8000.0];
    let t = uniform(200, 21600.0);
    let v: Vec<f64> = t
        .iter()
        .enumerate()
        .map(|(i, &t)| logistic(truth, t) + 1e-3 * (0.7 * i as f64).sin())
        .collect();
    let f = fit_sigmoid(&t, &v, None).unwrap();
    for (got, want) in [f.x, f.y, f.z, f.d].into_iter().zip(truth) {
        assert!(rel(got, want) < 3e-2, "{f:?}");
    }
    assert!(f.r_squared >= 0.999);
    assert!(f.ks_statistic.is_some());
}

#[test]
fn rational_round_trip_from_reference_values() {
    let t = uniform(200, 21600.0);
    let v: Vec<f64> = t.iter().map(|&t| 4.7865 / (t + 331.6163) + 0.00247).collect();
    let f = fit_rational(&t, &v, None).unwrap();
    assert!(rel(f.a, 4.7865) < 1e-4 && rel(f.b, 331.6163) < 1e-4 && rel(f.c, 0.00247) < 1e-4);
    assert!(f.r_squared >= 1.0 - 1e-10);
}

#[test]
fn ks_on_normal_quantiles_is_small() {
    // Residuals placed at the normal quantiles of ranks (i - 0.5)/n; the
    // only gap left is the ECDF step of 1/(2n) plus the standardization bias.
    let n = 200;
    let normal = statrs::distribution::Normal::standard();
    use statrs::distribution::ContinuousCDF;
    let r: Vec<f64> = (0..n)
        .map(|i| normal.inverse_cdf((i as f64 + 0.5) / n as f64))
        .collect();
    let d = ks_statistic(&r).unwrap();
    assert!(d <= 1.0 / (2.0 * n as f64) + 5e-3, "{d}");
}

#[test]
fn baseline_lumped_series_fit_quality() {
    let p = ParameterSet::default();
    let proto = default_protocol(&p).unwrap();
    let times = uniform(200, 21600.0);
    let ts = simulate_0d_at(&p, &proto, &Sim0dOptions::default().integrator, &times).unwrap();
    let (t, sf): (Vec<f64>, Vec<f64>) = ts
        .times
        .iter()
        .zip(&ts.sf)
        .filter(|(t, _)| times.contains(t))
        .map(|(a, b)| (*a, *b))
        .unzip();
    let s = fit_sigmoid(&t, &sf, None).unwrap();
    assert!(s.r_squared >= 0.999, "{s:?}");

    let (t, r): (Vec<f64>, Vec<f64>) = ts
        .times
        .iter()
        .zip(&ts.r_eff)
        .zip(&ts.c_t_tpz)
        .filter(|((t, _), c)| times.contains(t) && **c > EPSILON_C)
        .map(|((t, r), _)| (*t, *r))
        .unzip();
    let f = fit_rational(&t, &r, None).unwrap();
    assert!((0.4..=0.99).contains(&f.r_squared), "{f:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sigmoid_round_trip(
        x in 0.5f64..1.5,
        y in 0.05f64..0.9,
        zt in 2.0f64..50.0,
        dfrac in 0.2f64..0.8,
    ) {
        let t_max = 21600.0;
        let truth = [x, y, zt / t_max, dfrac * t_max];
        let t = uniform(200, t_max);
        let v: Vec<f64> = t.iter().map(|&t| logistic(truth, t)).collect();
        let f = fit_sigmoid(&t, &v, None).unwrap();
        for (got, want) in [f.x, f.y, f.z, f.d].into_iter().zip(truth) {
            prop_assert!(rel(got, want) < 1e-3, "{:?} vs {:?}", f, truth);
        }
    }

    #[test]
    fn rational_round_trip(
        a in 0.5f64..10.0,
        b in 50.0f64..2000.0,
        c in 1e-4f64..1e-2,
    ) {
        let t = uniform(100, 21600.0);
        let v: Vec<f64> = t.iter().map(|&t| a / (t + b) + c).collect();
        let f = fit_rational(&t, &v, None).unwrap();
        prop_assert!(rel(f.a, a) < 1e-4 && rel(f.b, b) < 1e-4 && rel(f.c, c) < 1e-4, "{:?}", f);
    }
}
