//! Mixed-dimensional tissue model: a 1D vessel network embedded in a 3D
//! finite-volume tissue grid, coupled through line sources.
//!
//! The solve is a chain of stages: steady flow, steady hematocrit, steady
//! oxygen, then transient drug transport driven by the lumped-model
//! surrogates.

use thiserror::Error;

pub mod coupling;
pub mod diffusivity;
pub mod flow;
pub mod grid;
pub mod network;
pub mod output;
pub mod oxygen;
pub mod sparse;
pub mod tpz;
mod transport;

pub use coupling::{build_coupling, LineCouplingMap};
pub use flow::{solve_flow, solve_hematocrit, FlowSolution};
pub use grid::{spatial_average, TissueGrid};
pub use network::{VesselMesh, VesselNetwork};
pub use oxygen::{solve_oxygen, OxygenOptions, OxygenSolution};
pub use tpz::{simulate_tpz, TpzOptions, TpzSolution};

#[derive(Debug, Error)]
pub enum TissueError {
    #[error("grid: {0}")]
    Grid(String),
    #[error("network: {0}")]
    Network(String),
    #[error("segment {0} is outside the tissue box")]
    SegmentOutsideBox(u32),
    #[error("linear solver: {0}")]
    Solver(String),
    #[error("flow reversal at boundary node {0}: inflow hematocrit is undefined")]
    FlowReversal(u32),
    #[error("hematocrit: {0}")]
    Hematocrit(String),
    #[error("oxygen fixed point did not converge in {iterations} iterations (last relative change {last:e})")]
    OxygenNoConvergence {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },
    #[error("time step {dt} s gives advective Courant number {courant:e} above the bound {bound:e}")]
    CourantExceeded { dt: f64, courant: f64, bound: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("negative concentration {value:e} in {field} at t = {t} s")]
    Negative { field: &'static str, value: f64, t: f64 },
}
