//! Empirical tissue diffusivity from molecular descriptors:
//! `log10 D = a + b log10(MW) + c / (1 + exp((logP - x + y HD + z HA) / w))`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DiffusivityError {
    #[error("no coefficient set named {0:?}")]
    MissingCoefficients(String),
    #[error("molecular weight must be positive, got {0}")]
    MolecularWeight(f64),
    #[error("coefficient w must be nonzero")]
    ZeroWidth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusivityCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Factor converting `10^log10 D` to m^2/s (1e-4 for cm^2/s sets).
    #[serde(default = "unit_scale_default")]
    pub unit_scale: f64,
}

fn unit_scale_default() -> f64 {
    1.0
}

/// Named coefficient sets, e.g. loaded from a TOML table of tables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoefficientSets(pub BTreeMap<String, DiffusivityCoefficients>);

impl CoefficientSets {
    pub fn get(&self, name: &str) -> Result<&DiffusivityCoefficients, DiffusivityError> {
        self.0
            .get(name)
            .ok_or_else(|| DiffusivityError::MissingCoefficients(name.to_string()))
    }
}

/// `log10` of the predicted diffusivity, in the units of the set.
pub fn log10_diffusivity(
    mw: f64,
    log_p74: f64,
    hd: f64,
    ha: f64,
    k: &DiffusivityCoefficients,
) -> Result<f64, DiffusivityError> {
    if !(mw > 0.0) {
        return Err(DiffusivityError::MolecularWeight(mw));
    }
    if k.w == 0.0 {
        return Err(DiffusivityError::ZeroWidth);
    }
    let arg = (log_p74 - k.x + k.y * hd + k.z * ha) / k.w;
    Ok(k.a + k.b * mw.log10() + k.c / (1.0 + arg.exp()))
}

/// Predicted diffusivity in m^2/s.
pub fn predict_diffusivity(
    mw: f64,
    log_p74: f64,
    hd: f64,
    ha: f64,
    k: &DiffusivityCoefficients,
) -> Result<f64, DiffusivityError> {
    Ok(k.unit_scale * 10f64.powf(log10_diffusivity(mw, log_p74, hd, ha, k)?))
}

/// Looks up `name` in `sets` and predicts with it.
pub fn predict_diffusivity_named(
    sets: &CoefficientSets,
    name: &str,
    mw: f64,
    log_p74: f64,
    hd: f64,
    ha: f64,
) -> Result<f64, DiffusivityError> {
    predict_diffusivity(mw, log_p74, hd, ha, sets.get(name)?)
}
