use hapsim_core::params::ParameterSet;
use hapsim_core::tissue::oxygen::{bound_oxygen, hill_saturation};
use hapsim_core::tissue::*;

fn default_setup(params: &ParameterSet) -> (TissueGrid, VesselMesh, LineCouplingMap, FlowSolution, Vec<f64>) {
    let net = VesselNetwork::default_network();
    let grid = net.grid().unwrap();
    let fp = &params.flow;
    let mesh = VesselMesh::build(&net, fp.p_0 + fp.delta_p, fp.p_0);
    let coupling = build_coupling(&mesh, &grid).unwrap();
    let flow = solve_flow(&mesh, &coupling, &grid, fp).unwrap();
    let h = solve_hematocrit(&mesh, &flow, fp.h_in).unwrap();
    (grid, mesh, coupling, flow, h)
}

#[test]
fn hill_half_saturation() {
    let p = ParameterSet::default();
    let ox = &p.oxygen;
    let c50 = ox.alpha_pl * ox.p_s50;
    assert!((hill_saturation(c50, ox.gamma, ox.k_2()) - 0.5).abs() < 1e-12);
    let expected = ox.k_1 * 0.45 / 2.0;
    assert!((bound_oxygen(c50, 0.45, &p) - expected).abs() < 1e-12 * expected);
    assert_eq!(hill_saturation(0.0, ox.gamma, ox.k_2()), 0.0);
}

#[test]
fn no_consumption_reaches_exchange_equilibrium() {
    let mut p = ParameterSet::default();
    p.oxygen.v_max_ox = 0.0;
    p.oxygen.beta_ox = 0.0;
    p.flow.lp = 0.0;
    p.flow.lp_lf = 0.0;
    let (grid, mesh, coupling, flow, h) = default_setup(&p);
    let opts = OxygenOptions {
        free_oxygen_only: true,
        no_advection: true,
        ..OxygenOptions::default()
    };
    let sol = solve_oxygen(&mesh, &coupling, &grid, &flow, &h, &p, &opts).unwrap();
    let c = p.oxygen.c_v0_ox;
    for v in sol.c_t.iter().chain(&sol.c_v) {
        assert!((v - c).abs() < 1e-8 * c, "{v} vs {c}");
    }
    assert!(sol.exchange.iter().all(|j| j.abs() < 1e-20));
}

/// Steady `D c'' = k c` on `[0, L]` with `-D c' = beta (c0 - c)` at both
/// ends (symmetric about the middle).
fn slab(z: f64, l: f64, d: f64, k: f64, beta: f64, c0: f64) -> f64 {
    let m = (k / d).sqrt();
    let half = 0.5 * m * l;
    let a = beta * c0 / (beta * half.cosh() + d * m * half.sinh());
    a * (m * (z - 0.5 * l)).cosh()
}

#[test]
fn pseudo_one_dimensional_slab_matches_closed_form() {
    let mut p = ParameterSet::default();
    let ox = &mut p.oxygen;
    let l = 400e-6;
    let n = 40;
    // Michaelis constant far above any concentration: the sink is linear
    ox.p_m50 = 1.0e3 / ox.alpha_t_ox;
    let k_m = ox.k_m_ox();
    let k = 4.0 * ox.d_t_ox / (l * l) * 9.0;
    ox.v_max_ox = k * k_m / p.tpz.phi_0;
    ox.beta_ox = 2e-6;
    let h = l / n as f64;
    let grid = TissueGrid::new([4.0 * h, 4.0 * h, l], [4, 4, n]).unwrap();
    let mesh = VesselMesh::empty();
    let coupling = build_coupling(&mesh, &grid).unwrap();
    let flow = FlowSolution::quiescent(&grid, 0.0);
    let opts = OxygenOptions {
        robin_faces: [false, false, false, false, true, true],
        ..OxygenOptions::default()
    };
    let sol = solve_oxygen(&mesh, &coupling, &grid, &flow, &[], &p, &opts).unwrap();
    let ox = &p.oxygen;
    let mut worst: f64 = 0.0;
    for (i, v) in sol.c_t.iter().enumerate() {
        let z = grid.center(i)[2];
        let exact = slab(z, l, ox.d_t_ox, k, ox.beta_ox, ox.c0_ox);
        worst = worst.max(((v - exact) / exact).abs());
    }
    assert!(worst < 0.02, "max relative error {worst}");
    // a real profile: centre well below the rim
    let centre = sol.c_t[grid.index(1, 1, n / 2)];
    let rim = sol.c_t[grid.index(1, 1, 0)];
    assert!(centre < 0.5 * rim);
}

#[test]
fn maximum_principle_with_consumption() {
    let p = ParameterSet::default();
    let (grid, mesh, coupling, flow, h) = default_setup(&p);
    let sol = solve_oxygen(&mesh, &coupling, &grid, &flow, &h, &p, &OxygenOptions::default()).unwrap();
    let upper = p.oxygen.c_v0_ox.max(p.oxygen.c0_ox);
    for v in sol.c_t.iter().chain(&sol.c_v) {
        assert!(*v >= -1e-12 && *v <= upper * (1.0 + 1e-9), "{v}");
    }
    assert!(sol.history.last().unwrap() < &1e-8);
    // tissue is drawn down below the inflow level
    assert!(spatial_average(&sol.c_t, &grid) < p.oxygen.c_v0_ox);
}

#[test]
fn non_convergence_is_reported_with_history() {
    let p = ParameterSet::default();
    let (grid, mesh, coupling, flow, h) = default_setup(&p);
    let opts = OxygenOptions {
        max_iterations: 3,
        ..OxygenOptions::default()
    };
    match solve_oxygen(&mesh, &coupling, &grid, &flow, &h, &p, &opts) {
        Err(TissueError::OxygenNoConvergence { iterations, history, .. }) => {
            assert_eq!(iterations, 3);
            assert_eq!(history.len(), 3);
        }
        other => panic!("expected non-convergence, got {other:?}"),
    }
}
