use std::f64::consts::PI;

use hapsim_core::params::{FlowParams, ParameterSet};
use hapsim_core::tissue::network::{BoundaryKind, BoundaryNode, Domain, Node, Segment};
use hapsim_core::tissue::*;

const UM: f64 = 1e-6;

fn straight_tube(radius: f64, elements: usize) -> VesselNetwork {
    VesselNetwork {
        domain: Some(Domain {
            extents: [400.0 * UM; 3],
            cells: [8; 3],
        }),
        nodes: vec![
            Node { id: 1, x: 0.0, y: 210.0 * UM, z: 190.0 * UM },
            Node { id: 2, x: 400.0 * UM, y: 210.0 * UM, z: 190.0 * UM },
        ],
        segments: vec![Segment {
            id: 7,
            n0: 1,
            n1: 2,
            radius,
            elements,
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

fn setup(net: &VesselNetwork, fp: &FlowParams) -> (TissueGrid, VesselMesh, LineCouplingMap, FlowSolution) {
    let grid = net.grid().unwrap();
    net.validate(&grid).unwrap();
    let mesh = VesselMesh::build(net, fp.p_0 + fp.delta_p, fp.p_0);
    let coupling = build_coupling(&mesh, &grid).unwrap();
    let flow = solve_flow(&mesh, &coupling, &grid, fp).unwrap();
    (grid, mesh, coupling, flow)
}

fn sealed() -> FlowParams {
    FlowParams {
        lp: 0.0,
        lp_lf: 0.0,
        ..ParameterSet::default().flow
    }
}

#[test]
fn single_tube_matches_poiseuille() {
    let fp = sealed();
    let r = 6.0 * UM;
    let (_, _, _, flow) = setup(&straight_tube(r, 12), &fp);
    let expected = PI * r.powi(4) * fp.delta_p / (8.0 * fp.mu_v * 400.0 * UM);
    for q in &flow.q {
        assert!(((q - expected) / expected).abs() < 1e-10, "{q} vs {expected}");
    }
    assert!(((flow.inflow - expected) / expected).abs() < 1e-10);
}

#[test]
fn sealed_walls_hold_tissue_pressure() {
    let fp = FlowParams {
        p_l: 150.0,
        ..sealed()
    };
    let (_, _, _, flow) = setup(&VesselNetwork::default_network(), &fp);
    for p in &flow.p_t {
        assert!((p - fp.p_l).abs() < 1e-10);
    }
    assert!(flow.exchange.iter().all(|&f| f == 0.0));
}

#[test]
fn default_network_conserves_fluid() {
    let fp = ParameterSet::default().flow;
    let (_, _, _, flow) = setup(&VesselNetwork::default_network(), &fp);
    assert!(flow.mass_balance_residual < 1e-8, "{}", flow.mass_balance_residual);
    assert!(flow.inflow > 0.0);
    // extravasation is positive at baseline pressures
    assert!(flow.exchange.iter().sum::<f64>() > 0.0);
}

#[test]
fn mirror_symmetric_network_gives_mirror_pressures() {
    let fp = ParameterSet::default().flow;
    let (grid, mesh, _, flow) = setup(&VesselNetwork::default_network(), &fp);
    let side = grid.extents[1];
    let scale = fp.p_0 + fp.delta_p;
    for (i, p) in mesh.points.iter().enumerate() {
        let mirror = [p[0], side - p[1], p[2]];
        let j = mesh
            .points
            .iter()
            .position(|o| network::distance(*o, mirror) < 1e-12)
            .expect("mirror point exists");
        assert!((flow.p_v[i] - flow.p_v[j]).abs() < 1e-9 * scale);
    }
    let [nx, ny, nz] = grid.cells;
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let a = flow.p_t[grid.index(i, j, k)];
                let b = flow.p_t[grid.index(i, ny - 1 - j, k)];
                assert!((a - b).abs() < 1e-9 * scale);
            }
        }
    }
}

#[test]
fn hematocrit_is_constant_without_plasma_loss() {
    let fp = sealed();
    let (_, mesh, _, flow) = setup(&straight_tube(6.0 * UM, 10), &fp);
    let h = solve_hematocrit(&mesh, &flow, 0.45).unwrap();
    assert!(h.iter().all(|&v| v == 0.45));
}

#[test]
fn symmetric_bifurcation_splits_hematocrit_equally() {
    let (_, mesh, _, flow) = setup(&VesselNetwork::default_network(), &sealed());
    let h = solve_hematocrit(&mesh, &flow, 0.45).unwrap();
    assert!(h.iter().all(|&v| (v - 0.45).abs() < 1e-14));

    let fp = ParameterSet::default().flow;
    let (_, mesh, _, flow) = setup(&VesselNetwork::default_network(), &fp);
    let h = solve_hematocrit(&mesh, &flow, 0.45).unwrap();
    // nodes 3 and 4 are the two daughters of the first bifurcation
    assert!((h[2] - h[3]).abs() < 1e-12);
    assert!(h.iter().all(|&v| v >= 0.45 && v < 1.0));
}

/// Marches the tube from the inlet: red cells entering a point leave with
/// the plasma that is not lost through the wall around it.
fn upwind_reference(q: &[f64], wall: &[f64], h_in: f64) -> Vec<f64> {
    let mut h = vec![h_in];
    for i in 0..q.len() {
        let lost = 0.5 * wall[i] + if i + 1 < q.len() { 0.5 * wall[i + 1] } else { 0.0 };
        let next = q[i] * h[i] / (q[i] - lost);
        h.push(next);
    }
    h
}

#[test]
fn tube_with_extravasation_matches_upwind_reference() {
    let fp = FlowParams {
        lp: 5e-11,
        ..ParameterSet::default().flow
    };
    let n = 16;
    let (_, mesh, _, flow) = setup(&straight_tube(6.0 * UM, n), &fp);
    // filtration upstream, reabsorption near the outlet
    assert!(flow.exchange[0] > 0.0 && flow.exchange[n - 1] < 0.0);
    let h = solve_hematocrit(&mesh, &flow, 0.45).unwrap();
    let reference = upwind_reference(&flow.q, &flow.exchange, 0.45);
    // mesh points: two end nodes, then the interior points in order
    let order: Vec<usize> = std::iter::once(0).chain(2..mesh.n_points()).chain(std::iter::once(1)).collect();
    for (k, &p) in order.iter().enumerate() {
        assert!((h[p] - reference[k]).abs() < 1e-12, "point {p}: {} vs {}", h[p], reference[k]);
    }
    assert!((reference[n] - 0.45).abs() > 1e-6);
}

#[test]
fn outside_segment_is_named() {
    let mut net = straight_tube(6.0 * UM, 4);
    net.nodes[1].x = 450.0 * UM;
    let grid = net.grid().unwrap();
    let err = net.validate(&grid).unwrap_err();
    assert!(err.to_string().contains('7'), "{err}");
}
