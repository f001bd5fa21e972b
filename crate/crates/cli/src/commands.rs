use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use hapsim_core::backend::{
    lumped_model, qoi_vector, tissue_model, TissueSetup, QOI_LABELS, QOI_TIMES,
};
use hapsim_core::params::{
    default_bounds, default_protocol, load_parameters, reduced_bounds, resolve_config_path, ParamError,
    ParameterBounds, ParameterSet,
};
use hapsim_core::pkpd0d::{simulate_0d, Sim0dOptions, EPSILON_C};
use hapsim_core::sensitivity::{run_morris, run_sobol};
use hapsim_core::surrogate::{
    eval_rational, eval_sigmoid, fit_rational, fit_sigmoid, residual_csv, RationalFit, SigmoidFit,
};
use hapsim_core::tissue::output::{field_csv, vessel_csv, vtk_structured_points};
use hapsim_core::tissue::{
    build_coupling, solve_flow, solve_hematocrit, solve_oxygen, OxygenOptions, TpzOptions, VesselMesh,
    VesselNetwork,
};
use serde::{Deserialize, Serialize};

use crate::error::{stage, CliError};
use crate::manifest::{RunManifest, RunWriter};

/// Options of a single tissue run, read from the `[run3d]` config table.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Run3dConfig {
    /// Drop the metabolic sink.
    pub no_metabolism: bool,
    /// No-flux outer faces instead of Robin faces.
    pub sealed: bool,
    /// Uniform tissue drug level at t = 0, mol/m^3.
    pub initial_c_t_tpz: Option<f64>,
}

pub struct LoadedConfig {
    pub path: Option<PathBuf>,
    pub params: ParameterSet,
    pub run3d: Run3dConfig,
}

pub fn load_config(explicit: Option<&Path>) -> Result<LoadedConfig, CliError> {
    let path = resolve_config_path(explicit);
    let text = match &path {
        Some(p) => fs::read_to_string(p).map_err(|source| CliError::Read {
            path: p.clone(),
            source,
        })?,
        None => String::new(),
    };
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ParamError::Parse(e.to_string()))?;
    let run3d = match table.remove("run3d") {
        Some(v) => v
            .try_into()
            .map_err(|e: toml::de::Error| ParamError::Parse(format!("[run3d]: {e}")))?,
        None => Run3dConfig::default(),
    };
    let rest = toml::to_string(&table).map_err(|e| ParamError::Parse(e.to_string()))?;
    Ok(LoadedConfig {
        path,
        params: load_parameters(&rest)?,
        run3d,
    })
}

fn load_network(path: Option<&Path>) -> Result<VesselNetwork, CliError> {
    let Some(path) = path else {
        return Ok(VesselNetwork::default_network());
    };
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    VesselNetwork::from_json(&text).map_err(stage("network"))
}

fn labelled(values: &[f64]) -> BTreeMap<String, f64> {
    QOI_LABELS.iter().map(|l| l.to_string()).zip(values.iter().copied()).collect()
}

fn qoi_csv(values: &[f64]) -> String {
    let mut out = String::from("qoi,value\n");
    for (label, v) in QOI_LABELS.iter().zip(values) {
        out.push_str(&format!("{label},{v:.16e}\n"));
    }
    out
}

pub fn cmd_run0d(config: Option<&Path>, out_dir: &Path) -> Result<RunManifest, CliError> {
    let cfg = load_config(config)?;
    let mut w = RunWriter::create(out_dir)?;
    let proto = default_protocol(&cfg.params)?;
    let ts = simulate_0d(&cfg.params, &proto, &Sim0dOptions::default()).map_err(|e| CliError::Model(e.into()))?;
    let q = qoi_vector(&ts.times, &ts.c_t_tpz, &ts.sf)?;
    w.write("timeseries.csv", ts.to_csv().as_bytes())?;
    w.write_json("summary.json", &labelled(&q))?;
    w.finish("run0d", cfg.path, None)
}

/// Columns of a lumped time series used by the surrogate fits.
struct Series {
    t: Vec<f64>,
    sf: Vec<f64>,
    c_t_tpz: Option<Vec<f64>>,
    r_eff: Option<Vec<f64>>,
}

fn read_series(path: &Path) -> Result<Series, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| CliError::Input(format!("{} is empty", path.display())))?
        .split(',')
        .map(str::trim)
        .collect();
    let mut columns = vec![Vec::new(); header.len()];
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != header.len() {
            return Err(CliError::Input(format!("row {} has {} fields, expected {}", row + 1, fields.len(), header.len())));
        }
        for (col, f) in columns.iter_mut().zip(fields) {
            col.push(f.parse::<f64>().map_err(|e| CliError::Input(format!("row {}: `{f}`: {e}", row + 1)))?);
        }
    }
    let mut take = |name: &str| header.iter().position(|h| *h == name).map(|i| std::mem::take(&mut columns[i]));
    let t = take("t").ok_or_else(|| CliError::Input("missing column `t`".into()))?;
    let sf = take("sf").ok_or_else(|| CliError::Input("missing column `sf`".into()))?;
    Ok(Series {
        t,
        sf,
        c_t_tpz: take("c_t_tpz"),
        r_eff: take("r_eff"),
    })
}

#[derive(Debug, Serialize)]
struct Fits {
    samples: usize,
    sigmoid: SigmoidFit,
    rational: Option<RationalFit>,
    /// First time of the rate-law window, s.
    rational_window_start: Option<f64>,
}

pub fn cmd_fit_surrogates(
    timeseries: Option<&Path>,
    config: Option<&Path>,
    out_dir: &Path,
) -> Result<RunManifest, CliError> {
    let mut w = RunWriter::create(out_dir)?;
    let (series, config_path) = match timeseries {
        Some(path) => (read_series(path)?, None),
        None => {
            let cfg = load_config(config)?;
            let proto = default_protocol(&cfg.params)?;
            let ts =
                simulate_0d(&cfg.params, &proto, &Sim0dOptions::default()).map_err(|e| CliError::Model(e.into()))?;
            let series = Series {
                t: ts.times,
                sf: ts.sf,
                c_t_tpz: Some(ts.c_t_tpz),
                r_eff: Some(ts.r_eff),
            };
            (series, cfg.path)
        }
    };
    let sigmoid = fit_sigmoid(&series.t, &series.sf, None)?;
    let predicted: Vec<f64> = series.t.iter().map(|&t| eval_sigmoid(&sigmoid, t)).collect();
    let sig_csv = residual_csv(&series.t, &series.sf, &predicted);

    let mut rational = None;
    let mut window_start = None;
    let mut rat_csv = None;
    if let Some(r_eff) = &series.r_eff {
        let keep = |i: usize| match &series.c_t_tpz {
            Some(c) => c[i] > EPSILON_C,
            None => r_eff[i] > 0.0,
        };
        let (t, r): (Vec<f64>, Vec<f64>) = (0..series.t.len()).filter(|&i| keep(i)).map(|i| (series.t[i], r_eff[i])).unzip();
        let fit = fit_rational(&t, &r, None)?;
        let predicted = t.iter().map(|&s| eval_rational(&fit, s)).collect::<Result<Vec<f64>, _>>()?;
        rat_csv = Some(residual_csv(&t, &r, &predicted));
        window_start = t.first().copied();
        rational = Some(fit);
    }

    w.write_json(
        "fits.json",
        &Fits {
            samples: series.t.len(),
            sigmoid,
            rational,
            rational_window_start: window_start,
        },
    )?;
    w.write("sigmoid_residuals.csv", sig_csv.as_bytes())?;
    if let Some(csv) = rat_csv {
        w.write("rational_residuals.csv", csv.as_bytes())?;
    }
    w.value("sigmoid_r_squared", sigmoid.r_squared);
    if let Some(r) = rational {
        w.value("rational_r_squared", r.r_squared);
    }
    w.finish("fit", config_path, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Backend {
    #[value(name = "0d")]
    Lumped,
    #[value(name = "3d")]
    Tissue,
}

pub struct MorrisArgs<'a> {
    pub config: Option<&'a Path>,
    pub backend: Backend,
    pub network: Option<&'a Path>,
    pub r: usize,
    pub p: usize,
    pub seed: u64,
    pub dt: f64,
}

fn split_by_qoi(csv: &str, label: &str) -> String {
    let mut lines = csv.lines();
    let mut out = format!("{}\n", lines.next().unwrap_or_default());
    let prefix = format!("{label},");
    for line in lines.filter(|l| l.starts_with(&prefix)) {
        out.push_str(line);
        out.push('\n');
    }
    out
}

pub fn cmd_morris(args: &MorrisArgs, out_dir: &Path) -> Result<RunManifest, CliError> {
    let cfg = load_config(args.config)?;
    let mut w = RunWriter::create(out_dir)?;
    let report = match args.backend {
        Backend::Lumped => {
            let bounds = default_bounds();
            let model = lumped_model(&cfg.params, &bounds, Sim0dOptions::default());
            run_morris(model, &bounds, args.r, args.p, args.seed, &QOI_LABELS)?
        }
        Backend::Tissue => {
            let bounds = reduced_bounds();
            let setup = TissueSetup::new(load_network(args.network)?, &cfg.params)?;
            let opts = TpzOptions {
                dt: args.dt,
                ..TpzOptions::default()
            };
            let model = tissue_model(&setup, &cfg.params, &bounds, Sim0dOptions::default(), opts);
            run_morris(model, &bounds, args.r, args.p, args.seed, &QOI_LABELS)?
        }
    };
    w.write_json("morris.json", &report)?;
    let table = report.to_csv();
    for label in &report.qoi_labels {
        w.write(&format!("morris_{label}.csv"), split_by_qoi(&table, label).as_bytes())?;
    }
    w.write("morris_scatter.csv", report.scatter_csv().as_bytes())?;
    w.count("evaluations", report.evaluations);
    w.count("failed_evaluations", report.failed_evaluations);
    w.finish("morris", cfg.path, Some(args.seed))
}

/// Coefficients of the linear test model `y = sum a_i x_i` on the unit cube.
pub fn linear_test_coefficients(k: usize) -> Vec<f64> {
    (1..=k).map(|i| i as f64).collect()
}

pub fn cmd_sobol(
    config: Option<&Path>,
    n: usize,
    seed: u64,
    linear_test: bool,
    out_dir: &Path,
) -> Result<RunManifest, CliError> {
    let cfg = load_config(config)?;
    let mut w = RunWriter::create(out_dir)?;
    let k = default_bounds().len();
    let report = if linear_test {
        let a = linear_test_coefficients(k);
        let model = |x: &[f64]| Ok::<_, std::convert::Infallible>(vec![a.iter().zip(x).map(|(a, x)| a * x).sum()]);
        run_sobol(model, &ParameterBounds::unit(k), n, seed, &["y"])?
    } else {
        let bounds = default_bounds();
        let model = lumped_model(&cfg.params, &bounds, Sim0dOptions::default());
        run_sobol(model, &bounds, n, seed, &QOI_LABELS)?
    };
    w.write_json("sobol.json", &report)?;
    w.write("sobol.csv", report.to_csv().as_bytes())?;
    w.count("evaluations", report.evaluations);
    w.finish("sobol", cfg.path, Some(seed))
}

pub fn cmd_run3d(config: Option<&Path>, network: Option<&Path>, dt: f64, out_dir: &Path) -> Result<RunManifest, CliError> {
    let cfg = load_config(config)?;
    let mut w = RunWriter::create(out_dir)?;
    let params = &cfg.params;
    let network = load_network(network)?;
    let grid = network.grid().map_err(stage("network"))?;
    network.validate(&grid).map_err(stage("network"))?;
    let fp = &params.flow;
    let mesh = VesselMesh::build(&network, fp.p_0 + fp.delta_p, fp.p_0);
    let coupling = build_coupling(&mesh, &grid).map_err(stage("coupling"))?;
    let flow = solve_flow(&mesh, &coupling, &grid, fp).map_err(stage("flow"))?;
    let hematocrit = solve_hematocrit(&mesh, &flow, fp.h_in).map_err(stage("hematocrit"))?;
    let oxygen =
        solve_oxygen(&mesh, &coupling, &grid, &flow, &hematocrit, params, &OxygenOptions::default()).map_err(stage("oxygen"))?;
    let setup = TissueSetup {
        network,
        grid,
        mesh,
        coupling,
        flow,
        hematocrit,
    };

    let run = &cfg.run3d;
    let opts = TpzOptions {
        dt,
        robin_faces: [!run.sealed; 6],
        initial_tissue: run.initial_c_t_tpz.map(|c| vec![c; setup.grid.n_cells()]),
        no_metabolism: run.no_metabolism,
        snapshot_times: QOI_TIMES.to_vec(),
        ..TpzOptions::default()
    };
    let (surrogates, sol) = setup.simulate(params, &Sim0dOptions::default(), &opts).map_err(|e| match e {
        hapsim_core::backend::BackendError::Tissue(source) => CliError::Tissue { stage: "tpz", source },
        other => CliError::Model(other),
    })?;
    let q = qoi_vector(&sol.times, &sol.mean_c_t, &sol.mean_sf)?;
    w.write("qoi.csv", qoi_csv(&q).as_bytes())?;
    w.write("series.csv", sol.series_csv().as_bytes())?;
    w.write("oxygen_tissue.csv", field_csv(&setup.grid, &oxygen.c_t).as_bytes())?;
    w.write("oxygen_vessel.csv", vessel_csv(&setup.mesh, &oxygen.c_v).as_bytes())?;
    for snap in &sol.snapshots {
        let t = snap.t;
        w.write(&format!("c_t_tpz_{t:.0}.csv"), field_csv(&setup.grid, &snap.c_t).as_bytes())?;
        w.write(&format!("sf_{t:.0}.csv"), field_csv(&setup.grid, &snap.sf).as_bytes())?;
        w.write(&format!("c_v_tpz_{t:.0}.csv"), vessel_csv(&setup.mesh, &snap.c_v).as_bytes())?;
        let vtk = vtk_structured_points(
            &setup.grid,
            &format!("tissue fields at t = {t} s"),
            &[("c_t_tpz", &snap.c_t), ("sf", &snap.sf), ("c_t_ox", &oxygen.c_t)],
        );
        w.write(&format!("fields_{t:.0}.vtk"), vtk.as_bytes())?;
    }
    w.write_json(
        "surrogates.json",
        &serde_json::json!({
            "sigmoid": surrogates.sf,
            "rational": surrogates.r,
            "rational_window_start": surrogates.r_window_start,
        }),
    )?;
    w.value("mass_balance_residual", setup.flow.mass_balance_residual);
    w.value("mass_drift", sol.mass_drift);
    w.value("budget_defect", sol.budget_defect);
    w.value("courant", sol.courant);
    w.count("oxygen_iterations", oxygen.iterations);
    w.count("cells", setup.grid.n_cells());
    w.count("vessel_points", setup.mesh.n_points());
    for (label, v) in QOI_LABELS.iter().zip(&q) {
        w.value(&format!("qoi_{label}"), *v);
    }
    w.finish("run3d", cfg.path, None)
}
