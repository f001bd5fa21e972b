use hapsim_core::tissue::diffusivity::*;
use hapsim_core::tissue::output::{field_csv, vessel_csv, vtk_structured_points};
use hapsim_core::tissue::*;

fn coefficients(c: f64) -> DiffusivityCoefficients {
    DiffusivityCoefficients {
        a: -4.0,
        b: -0.5,
        c,
        w: 0.7,
        x: 1.2,
        y: 0.3,
        z: -0.1,
        unit_scale: 1e-4,
    }
}

#[test]
fn sigmoid_term_off_leaves_power_law() {
    let k = coefficients(0.0);
    let got = log10_diffusivity(246.0, 0.5, 2.0, 7.0, &k).unwrap();
    assert!((got - (k.a + k.b * 246f64.log10())).abs() < 1e-14);
}

#[test]
fn sigmoid_midpoint_gives_half_amplitude() {
    let k = coefficients(1.3);
    // logP - x + y HD + z HA = 0
    let (hd, ha) = (2.0, 1.0);
    let log_p = k.x - k.y * hd - k.z * ha;
    let got = log10_diffusivity(100.0, log_p, hd, ha, &k).unwrap();
    assert!((got - (k.a + k.b * 2.0 + 0.65)).abs() < 1e-14);
}

#[test]
fn all_zero_coefficients_give_unit_diffusivity() {
    let k = DiffusivityCoefficients {
        a: 0.0,
        b: 0.0,
        c: 0.0,
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
        unit_scale: 1.0,
    };
    assert_eq!(predict_diffusivity(1.0, 0.3, 1.0, 1.0, &k).unwrap(), 1.0);
}

#[test]
fn named_sets_load_from_toml_and_validate() {
    let sets: CoefficientSets = toml::from_str(
        "[tpz]\na = -4.0\nb = -0.5\nc = 0.0\nw = 1.0\nx = 0.0\ny = 0.0\nz = 0.0\nunit_scale = 1e-4\n",
    )
    .unwrap();
    let d = predict_diffusivity_named(&sets, "tpz", 100.0, 0.0, 0.0, 0.0).unwrap();
    assert!((d - 1e-4 * 1e-5).abs() < 1e-22);
    assert_eq!(
        predict_diffusivity_named(&sets, "other", 100.0, 0.0, 0.0, 0.0),
        Err(DiffusivityError::MissingCoefficients("other".into()))
    );
    assert_eq!(
        predict_diffusivity(0.0, 0.0, 0.0, 0.0, &coefficients(0.0)),
        Err(DiffusivityError::MolecularWeight(0.0))
    );
}

#[test]
fn field_outputs_have_one_row_per_entry() {
    let grid = TissueGrid::cube(1e-4, 4).unwrap();
    let field: Vec<f64> = (0..grid.n_cells()).map(|i| i as f64 * 0.25).collect();
    let csv = field_csv(&grid, &field);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "cell,x,y,z,value");
    assert_eq!(lines.len(), grid.n_cells() + 1);
    let last: Vec<f64> = lines[64].split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(last[4], 63.0 * 0.25);

    let vtk = vtk_structured_points(&grid, "drug\nfield", &[("c_t", &field), ("sf", &field)]);
    assert!(vtk.starts_with("# vtk DataFile Version 3.0\ndrug field\nASCII\n"));
    assert!(vtk.contains("DIMENSIONS 5 5 5"));
    assert!(vtk.contains("CELL_DATA 64"));
    assert_eq!(vtk.matches("LOOKUP_TABLE default").count(), 2);

    let net = VesselNetwork::default_network();
    let mesh = VesselMesh::build(&net, 1.0, 0.0);
    let values = vec![1.5; mesh.n_points()];
    assert_eq!(vessel_csv(&mesh, &values).lines().count(), mesh.n_points() + 1);
}

#[test]
fn network_json_round_trips() {
    let net = VesselNetwork::default_network();
    let back = VesselNetwork::from_json(&net.to_json()).unwrap();
    assert_eq!(net, back);
    assert!(VesselNetwork::from_json("{\"nodes\": []}").is_err());
}
