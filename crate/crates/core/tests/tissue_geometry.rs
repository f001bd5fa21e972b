use hapsim_core::tissue::network::{BoundaryKind, BoundaryNode, Domain, Node, Segment};
use hapsim_core::tissue::*;
use proptest::prelude::*;

const UM: f64 = 1e-6;

fn tube(a: [f64; 3], b: [f64; 3], side: f64, cells: usize, elements: usize) -> (VesselNetwork, TissueGrid) {
    let net = VesselNetwork {
        domain: Some(Domain {
            extents: [side; 3],
            cells: [cells; 3],
        }),
        nodes: vec![
            Node { id: 1, x: a[0], y: a[1], z: a[2] },
            Node { id: 2, x: b[0], y: b[1], z: b[2] },
        ],
        segments: vec![Segment {
            id: 1,
            n0: 1,
            n1: 2,
            radius: 5.0 * UM,
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
    };
    let grid = net.grid().unwrap();
    net.validate(&grid).unwrap();
    (net, grid)
}

#[test]
fn axis_aligned_segment_spans_three_cells() {
    let h = 100.0 * UM;
    let (net, grid) = tube([0.0, 150.0 * UM, 150.0 * UM], [3.0 * h, 150.0 * UM, 150.0 * UM], 4.0 * h, 4, 1);
    let mesh = VesselMesh::build(&net, 1.0, 0.0);
    let map = build_coupling(&mesh, &grid).unwrap();
    assert_eq!(map.entries.len(), 1);
    let entries = &map.entries[0];
    assert_eq!(entries.len(), 3);
    let total: f64 = entries.iter().map(|e| e.1).sum();
    assert!((total - 3.0 * h).abs() < 1e-15);
    for &(cell, len) in entries {
        assert!((len - h).abs() < 1e-15);
        assert_eq!(grid.ijk(cell)[1], 1);
        assert_eq!(grid.ijk(cell)[2], 1);
    }
}

#[test]
fn segment_inside_one_cell() {
    let a = [110.0 * UM, 110.0 * UM, 110.0 * UM];
    let b = [190.0 * UM, 150.0 * UM, 120.0 * UM];
    let (net, grid) = tube(a, b, 400.0 * UM, 4, 1);
    let mesh = VesselMesh::build(&net, 1.0, 0.0);
    let map = build_coupling(&mesh, &grid).unwrap();
    assert_eq!(map.entries[0].len(), 1);
    assert_eq!(map.entries[0][0].0, grid.index(1, 1, 1));
    assert!((map.entries[0][0].1 - network::distance(a, b)).abs() < 1e-18);
    let weights: Vec<(usize, f64)> = map.weights(0).collect();
    assert_eq!(weights, vec![(grid.index(1, 1, 1), 1.0)]);
}

#[test]
fn intersected_cells_flags_only_touched_cells() {
    let h = 100.0 * UM;
    let (net, grid) = tube([0.0, 150.0 * UM, 150.0 * UM], [3.0 * h, 150.0 * UM, 150.0 * UM], 4.0 * h, 4, 3);
    let mesh = VesselMesh::build(&net, 1.0, 0.0);
    let map = build_coupling(&mesh, &grid).unwrap();
    let hit = map.intersected_cells(grid.n_cells());
    assert_eq!(hit.iter().filter(|&&b| b).count(), 3);
}

#[test]
fn spatial_average_of_constant_and_coordinate() {
    let grid = TissueGrid::new([1.0, 2.0, 0.5], [5, 4, 6]).unwrap();
    assert!((spatial_average(&vec![0.3; grid.n_cells()], &grid) - 0.3).abs() < 1e-15);
    let x: Vec<f64> = (0..grid.n_cells()).map(|i| grid.center(i)[0]).collect();
    assert!((spatial_average(&x, &grid) - 0.5).abs() < 1e-15);
}

#[test]
fn spatial_average_matches_naive_sum() {
    use rand::{Rng, SeedableRng};
    let grid = TissueGrid::cube(1.0, 7).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let field: Vec<f64> = (0..grid.n_cells()).map(|_| rng.random::<f64>()).collect();
    let mut sum = 0.0;
    for v in &field {
        sum += v;
    }
    assert_eq!(spatial_average(&field, &grid), sum / grid.n_cells() as f64);
}

fn point_in_box() -> impl Strategy<Value = [f64; 3]> {
    [0.0..500.0f64, 0.0..500.0f64, 0.0..500.0f64].prop_map(|p| p.map(|v| v * UM))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coupling_lengths_sum_to_segment_length(a in point_in_box(), b in point_in_box(), n in 1usize..6) {
        prop_assume!(network::distance(a, b) > 1.0 * UM);
        let (net, grid) = tube(a, b, 500.0 * UM, 9, n);
        let mesh = VesselMesh::build(&net, 1.0, 0.0);
        let map = build_coupling(&mesh, &grid).unwrap();
        let total: f64 = map.entries.iter().flatten().map(|e| e.1).sum();
        let length = network::distance(a, b);
        prop_assert!((total - length).abs() <= 1e-10 * length);
        for e in 0..mesh.elements.len() {
            let w: f64 = map.weights(e).map(|x| x.1).sum();
            prop_assert!((w - 1.0).abs() < 1e-12);
        }
    }
}
