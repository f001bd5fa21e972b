use hapsim_core::backend::{surrogates_for, Surrogates, TissueSetup};
use hapsim_core::params::{default_protocol, ParameterSet};
use hapsim_core::pkpd0d::{vascular_tpz, Sim0dOptions};
use hapsim_core::surrogate::{RationalFit, SigmoidFit};
use hapsim_core::tissue::network::{BoundaryKind, BoundaryNode, Domain, Node, Segment};
use hapsim_core::tissue::*;

const UM: f64 = 1e-6;

fn small_network() -> VesselNetwork {
    VesselNetwork {
        domain: Some(Domain {
            extents: [400.0 * UM; 3],
            cells: [8; 3],
        }),
        nodes: vec![
            Node { id: 1, x: 0.0, y: 180.0 * UM, z: 220.0 * UM },
            Node { id: 2, x: 400.0 * UM, y: 230.0 * UM, z: 170.0 * UM },
        ],
        segments: vec![Segment {
            id: 1,
            n0: 1,
            n1: 2,
            radius: 8.0 * UM,
            elements: 10,
        }],
        inlets: vec![BoundaryNode {
            node: 1,
            kind: BoundaryKind::Nominal,
            value: None,
        }],
        outlets: vec![BoundaryNode {
            node: 2,
            kind: BoundaryKind::Nominal,
            value: None,
        }],
    }
}

fn baseline_surrogates(p: &ParameterSet) -> Surrogates {
    let proto = default_protocol(p).unwrap();
    surrogates_for(p, &proto, &Sim0dOptions::default()).unwrap()
}

fn run(setup: &TissueSetup, p: &ParameterSet, opts: TpzOptions) -> TpzSolution {
    setup.simulate(p, &Sim0dOptions::default(), &opts).unwrap().1
}

fn value_at(sol: &TpzSolution, series: &[f64], t: f64) -> f64 {
    series[sol.times.iter().position(|&s| s == t).unwrap()]
}

#[test]
fn sealed_tissue_conserves_drug_mass() {
    let mut p = ParameterSet::default();
    p.tpz.p_tpz = 0.0;
    p.tpz.sigma_tpz = 1.0;
    p.tpz.beta_tpz = 0.0;
    p.flow.lp_lf = 0.0;
    let setup = TissueSetup::new(VesselNetwork::default_network(), &p).unwrap();
    let nc = setup.grid.n_cells();
    let initial: Vec<f64> = (0..nc).map(|i| 0.01 + 0.02 * setup.grid.center(i)[0] / 5e-4).collect();
    let proto = default_protocol(&p).unwrap();
    let flat_r = RationalFit {
        a: 0.0,
        b: 1.0,
        c: 0.0,
        r_squared: 1.0,
        ks_statistic: None,
        degenerate: true,
    };
    let sf = baseline_surrogates(&ParameterSet::default()).sf;
    let opts = TpzOptions {
        initial_tissue: Some(initial),
        snapshot_times: Vec::new(),
        ..TpzOptions::default()
    };
    let sol = simulate_tpz(&setup.mesh, &setup.coupling, &setup.grid, &setup.flow, &sf, &flat_r, &proto, &p, &opts).unwrap();
    assert_eq!(*sol.times.last().unwrap(), 21600.0);
    assert!(sol.mass_drift < 1e-10, "drift {}", sol.mass_drift);
    // the field still moves: diffusion flattens the initial ramp
    let spread = |f: &[f64]| f.iter().cloned().fold(f64::MIN, f64::max) - f.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread(&sol.c_t) < 0.5 * 0.02);
    // no metabolism: surviving fraction untouched
    assert!(sol.sf.iter().all(|&s| s == 1.0));
}

#[test]
fn inlet_follows_injection_profile() {
    let p = ParameterSet::default();
    let setup = TissueSetup::new(small_network(), &p).unwrap();
    let proto = default_protocol(&p).unwrap();
    let t_p = proto.t_p();
    let sol = run(
        &setup,
        &p,
        TpzOptions {
            snapshot_times: vec![t_p],
            ..TpzOptions::default()
        },
    );
    assert_eq!(sol.snapshots.len(), 1);
    assert_eq!(sol.snapshots[0].t, t_p);
    let c0 = p.tpz.c_v0_tpz;
    assert!((vascular_tpz(t_p, &proto) - c0).abs() <= 1e-15 * c0);
    assert!((sol.snapshots[0].c_v[0] - c0).abs() <= 1e-15 * c0);
}

#[test]
fn implicit_euler_converges_at_first_order() {
    let p = ParameterSet::default();
    let setup = TissueSetup::new(small_network(), &p).unwrap();
    let means: Vec<f64> = [40.0, 20.0, 10.0]
        .iter()
        .map(|&dt| {
            let sol = run(
                &setup,
                &p,
                TpzOptions {
                    dt,
                    snapshot_times: Vec::new(),
                    ..TpzOptions::default()
                },
            );
            value_at(&sol, &sol.mean_c_t, 7200.0)
        })
        .collect();
    let ratio = (means[0] - means[1]) / (means[1] - means[2]);
    assert!((ratio - 2.0).abs() < 0.2, "error ratio {ratio}, means {means:?}");
}

#[test]
fn repeated_runs_are_identical() {
    let p = ParameterSet::default();
    let setup = TissueSetup::new(small_network(), &p).unwrap();
    let a = run(&setup, &p, TpzOptions::default());
    let b = run(&setup, &p, TpzOptions::default());
    assert_eq!(a.mean_c_t, b.mean_c_t);
    assert_eq!(a.c_t, b.c_t);
    assert_eq!(a.sf, b.sf);
}

#[test]
fn default_network_baseline_run() {
    let p = ParameterSet::default();
    let setup = TissueSetup::new(VesselNetwork::default_network(), &p).unwrap();
    let sol = run(&setup, &p, TpzOptions::default());
    assert_eq!(sol.snapshots.len(), 3);
    for snap in &sol.snapshots {
        assert!(snap.c_t.iter().chain(&snap.c_v).all(|&c| c >= 0.0), "negative at {}", snap.t);
        assert!(snap.sf.iter().all(|&s| s > 0.0 && s <= 1.0));
    }
    assert!(sol.budget_defect < 1e-10, "budget defect {}", sol.budget_defect);
    assert!(sol.mean_sf.windows(2).all(|w| w[1] <= w[0]));

    // vessel-intersected cells see more drug at the end of administration
    let at = sol.snapshots.iter().find(|s| s.t == 7200.0).unwrap();
    let hit = setup.coupling.intersected_cells(setup.grid.n_cells());
    let mean = |want: bool| {
        let v: Vec<f64> = at.c_t.iter().zip(&hit).filter(|(_, &h)| h == want).map(|(c, _)| *c).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(mean(true) > mean(false));
}

#[test]
fn oversized_step_is_rejected() {
    let p = ParameterSet::default();
    let setup = TissueSetup::new(VesselNetwork::default_network(), &p).unwrap();
    let s = baseline_surrogates(&p);
    let proto = default_protocol(&p).unwrap();
    let opts = TpzOptions {
        dt: 600.0,
        ..TpzOptions::default()
    };
    let err = simulate_tpz(&setup.mesh, &setup.coupling, &setup.grid, &setup.flow, &s.sf, &s.r, &proto, &p, &opts).unwrap_err();
    assert!(matches!(err, TissueError::CourantExceeded { .. }), "{err}");
}

#[test]
fn frozen_surviving_fraction_without_drug_effect() {
    let mut p = ParameterSet::default();
    p.tpz.alpha_pd = 0.0;
    let setup = TissueSetup::new(small_network(), &p).unwrap();
    let sol = run(&setup, &p, TpzOptions::default());
    assert!(sol.sf.iter().all(|&s| s == 1.0));
    let sf: &SigmoidFit = &baseline_surrogates(&p).sf;
    assert!(sf.degenerate || sf.y.abs() < 1e-9);
}
