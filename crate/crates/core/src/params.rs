//! Model parameters, sensitivity ranges and the injection protocol.
//!
//! Configuration files are TOML documents with the sections `flow`,
//! `oxygen`, `tpz`, `lumped` and `protocol`. Every key is optional: values
//! that carry a sensitivity range fall back to the midpoint of that range,
//! everything else to the shipped `defaults.toml`.

use std::env;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::{Table, Value};

/// Environment variable consulted for a config path when none is given.
pub const CONFIG_ENV_VAR: &str = "HAPSIM_CONFIG";

/// The shipped defaults for every parameter without a sensitivity range.
pub const DEFAULTS_TOML: &str = include_str!("defaults.toml");

const SECTIONS: [&str; 5] = ["flow", "oxygen", "tpz", "lumped", "protocol"];

#[derive(Debug, Error)]
pub enum ParamError {
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("config sets both `{0}` and `{1}`")]
    Conflict(String, String),
    #[error("invalid injection protocol: {0}")]
    Protocol(String),
    #[error("invalid parameter bounds: {0}")]
    Bounds(String),
    #[error("unknown sensitivity parameter `{0}`")]
    UnknownParameter(String),
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowParams {
    /// Vessel wall hydraulic conductivity, m/(Pa s).
    pub lp: f64,
    /// Lymphatic wall hydraulic permeability, m/(Pa s).
    pub lp_lf: f64,
    /// Exchange surface density, 1/m.
    pub s_over_v: f64,
    pub p_l: f64,
    pub sigma_oncotic: f64,
    pub pi_v: f64,
    pub pi_t: f64,
    /// Tissue permeability, m^2.
    pub kappa: f64,
    pub mu_t: f64,
    pub mu_v: f64,
    pub p_0: f64,
    pub delta_p: f64,
    pub h_in: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OxygenParams {
    pub d_v_ox: f64,
    pub d_t_ox: f64,
    pub p_ox: f64,
    pub sigma_ox: f64,
    /// Huefner factor times MCHC, mol/m^3.
    pub k_1: f64,
    /// Plasma solubility, mol/(m^3 mmHg).
    pub alpha_pl: f64,
    /// Hemoglobin half-saturation partial pressure, mmHg.
    pub p_s50: f64,
    pub gamma: f64,
    pub v_max_ox: f64,
    /// Partial pressure at half consumption, mmHg.
    pub p_m50: f64,
    /// Tissue solubility, mol/(m^3 mmHg).
    pub alpha_t_ox: f64,
    pub beta_ox: f64,
    pub c0_ox: f64,
    pub c_v0_ox: f64,
}

impl OxygenParams {
    /// Michaelis constant of oxygen consumption, mol/m^3.
    pub fn k_m_ox(&self) -> f64 {
        self.alpha_t_ox * self.p_m50
    }

    /// Hill constant `(alpha_pl p_s50)^gamma`.
    pub fn k_2(&self) -> f64 {
        (self.alpha_pl * self.p_s50).powf(self.gamma)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TpzParams {
    pub c_v0_tpz: f64,
    pub d_v_tpz: f64,
    pub d_t_tpz: f64,
    pub p_tpz: f64,
    pub sigma_tpz: f64,
    /// First-order metabolic rate, 1/s.
    pub k_met: f64,
    pub v_max_tpz: f64,
    pub k_m_tpz: f64,
    /// Oxygen concentration halving the metabolic rate, mol/m^3.
    pub k_half_ox: f64,
    /// Pharmacodynamic sensitivity, (mol/m^3)^-2.
    pub alpha_pd: f64,
    pub phi_0: f64,
    pub beta_tpz: f64,
    pub c0_tpz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LumpedParams {
    /// Perivascular diffusion distance, m.
    pub l_diff: f64,
}

/// Phase boundaries of the three-phase infusion, in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolTimes {
    pub t_p: f64,
    pub t_admin: f64,
    pub tau: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterSet {
    pub flow: FlowParams,
    pub oxygen: OxygenParams,
    pub tpz: TpzParams,
    pub lumped: LumpedParams,
    pub protocol: ProtocolTimes,
}

impl Default for ParameterSet {
    fn default() -> Self {
        load_parameters("").expect("shipped defaults are valid")
    }
}

impl ParameterSet {
    /// Serializes to the config format accepted by [`load_parameters`].
    pub fn to_config_string(&self) -> String {
        toml::to_string(self).expect("parameter set serializes")
    }

    /// All parameters as `section.key` / value pairs in declaration order.
    pub fn flatten(&self) -> Vec<(String, f64)> {
        let value = Value::try_from(self).expect("parameter set serializes");
        let mut out = Vec::new();
        if let Value::Table(sections) = value {
            for section in SECTIONS {
                if let Some(Value::Table(t)) = sections.get(section) {
                    for (key, v) in t {
                        if let Some(x) = v.as_float() {
                            out.push((format!("{section}.{key}"), x));
                        }
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        for (key, value) in self.flatten() {
            if !value.is_finite() {
                return Err(invalid(&key, "must be finite"));
            }
            let signed = matches!(key.as_str(), "flow.p_l" | "flow.p_0");
            if !signed && value < 0.0 {
                return Err(invalid(&key, "must be nonnegative"));
            }
        }
        let positive = [
            ("flow.mu_t", self.flow.mu_t),
            ("flow.mu_v", self.flow.mu_v),
            ("oxygen.alpha_pl", self.oxygen.alpha_pl),
            ("oxygen.alpha_t_ox", self.oxygen.alpha_t_ox),
            ("oxygen.p_s50", self.oxygen.p_s50),
            ("oxygen.p_m50", self.oxygen.p_m50),
            ("tpz.k_m_tpz", self.tpz.k_m_tpz),
            ("tpz.k_half_ox", self.tpz.k_half_ox),
            ("lumped.l_diff", self.lumped.l_diff),
        ];
        for (key, value) in positive {
            if value <= 0.0 {
                return Err(invalid(key, "must be positive"));
            }
        }
        if !(self.tpz.phi_0 > 0.0 && self.tpz.phi_0 <= 1.0) {
            return Err(invalid("tpz.phi_0", "must lie in (0, 1]"));
        }
        if self.flow.h_in >= 1.0 {
            return Err(invalid("flow.h_in", "must lie in [0, 1)"));
        }
        for (key, value) in [
            ("flow.sigma_oncotic", self.flow.sigma_oncotic),
            ("oxygen.sigma_ox", self.oxygen.sigma_ox),
            ("tpz.sigma_tpz", self.tpz.sigma_tpz),
        ] {
            if value > 1.0 {
                return Err(invalid(key, "must lie in [0, 1]"));
            }
        }
        if self.oxygen.gamma < 1.0 {
            return Err(invalid("oxygen.gamma", "must be at least 1"));
        }
        default_protocol(self).map(|_| ())
    }
}

fn invalid(key: &str, reason: &str) -> ParamError {
    ParamError::Invalid {
        key: key.to_string(),
        reason: reason.to_string(),
    }
}

/// Keys that may be given in mmHg, with the solubility used to convert them.
const MMHG_KEYS: [(&str, &str, &str); 4] = [
    ("oxygen", "c_v0_ox", "alpha_pl"),
    ("oxygen", "c0_ox", "alpha_t_ox"),
    ("oxygen", "v_max_ox", "alpha_t_ox"),
    ("tpz", "k_half_ox", "alpha_t_ox"),
];

/// Parses a config document and returns the validated parameter set.
///
/// An empty document yields the baseline parameter set.
pub fn load_parameters(source: &str) -> Result<ParameterSet, ParamError> {
    let user: Table = source
        .parse()
        .map_err(|e: toml::de::Error| ParamError::Parse(e.to_string()))?;
    let mut merged: Table = DEFAULTS_TOML
        .parse()
        .map_err(|e: toml::de::Error| ParamError::Parse(format!("defaults: {e}")))?;

    for (section, body) in &user {
        if !SECTIONS.contains(&section.as_str()) {
            return Err(ParamError::Parse(format!("unknown section `{section}`")));
        }
        let Value::Table(body) = body else {
            return Err(ParamError::Parse(format!("`{section}` must be a table")));
        };
        let target = merged
            .entry(section.clone())
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .expect("defaults sections are tables");
        for (key, value) in body {
            let value = match value {
                Value::Integer(i) => Value::Float(*i as f64),
                Value::Float(_) => value.clone(),
                _ => {
                    return Err(ParamError::Parse(format!(
                        "`{section}.{key}` must be a number"
                    )))
                }
            };
            target.insert(key.clone(), value);
        }
    }

    convert_mmhg(&mut merged, &user)?;
    fill_midpoints(&mut merged);

    let params: ParameterSet = Value::Table(merged)
        .try_into()
        .map_err(|e: toml::de::Error| ParamError::Parse(e.to_string()))?;
    params.validate()?;
    Ok(params)
}

fn get_f64(table: &Table, section: &str, key: &str) -> Option<f64> {
    table.get(section)?.get(key)?.as_float()
}

/// Rewrites `_mmhg` keys of the merged table. Conflicts are judged against
/// the user table only, since the defaults carry the plain keys.
fn convert_mmhg(table: &mut Table, user: &Table) -> Result<(), ParamError> {
    for (section, key, alpha_key) in MMHG_KEYS {
        let mmhg_key = format!("{key}_mmhg");
        let Some(mmhg) = get_f64(table, section, &mmhg_key) else {
            continue;
        };
        if user.get(section).and_then(|t| t.get(key)).is_some() {
            return Err(ParamError::Conflict(
                format!("{section}.{key}"),
                format!("{section}.{mmhg_key}"),
            ));
        }
        let alpha = get_f64(table, "oxygen", alpha_key).ok_or_else(|| {
            ParamError::Parse(format!("missing solubility `oxygen.{alpha_key}`"))
        })?;
        let body = table[section].as_table_mut().expect("section is a table");
        body.remove(&mmhg_key);
        body.insert(key.to_string(), Value::Float(mmhg * alpha));
    }
    Ok(())
}

fn fill_midpoints(table: &mut Table) {
    for range in default_bounds().ranges() {
        let param = SaParameter::from_name(&range.name).expect("default bounds are known");
        let (section, key) = param.config_key();
        if get_f64(table, section, key).is_some() {
            continue;
        }
        let mut value = range.midpoint();
        if param == SaParameter::KmOx {
            let alpha = get_f64(table, "oxygen", "alpha_t_ox").unwrap_or(1.0);
            value /= alpha;
        }
        table
            .entry(section.to_string())
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .expect("section is a table")
            .insert(key.to_string(), Value::Float(value));
    }
}

pub fn load_parameters_from_path(path: &Path) -> Result<ParameterSet, ParamError> {
    let text = fs::read_to_string(path).map_err(|source| ParamError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    load_parameters(&text)
}

/// Resolves the config path: an explicit path wins over [`CONFIG_ENV_VAR`].
pub fn resolve_config_path(explicit: Option<&Path>) -> Option<PathBuf> {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| env::var_os(CONFIG_ENV_VAR).map(PathBuf::from))
}

/// The fourteen parameters screened by the sensitivity analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SaParameter {
    CV0Tpz,
    DTpz,
    PTpz,
    KMet,
    VMaxTpz,
    KmTpz,
    KHalfOx,
    AlphaPd,
    Phi0,
    CV0Ox,
    VMaxOx,
    KmOx,
    POx,
    DOx,
}

impl SaParameter {
    pub const ALL: [SaParameter; 14] = [
        SaParameter::CV0Tpz,
        SaParameter::DTpz,
        SaParameter::PTpz,
        SaParameter::KMet,
        SaParameter::VMaxTpz,
        SaParameter::KmTpz,
        SaParameter::KHalfOx,
        SaParameter::AlphaPd,
        SaParameter::Phi0,
        SaParameter::CV0Ox,
        SaParameter::VMaxOx,
        SaParameter::KmOx,
        SaParameter::POx,
        SaParameter::DOx,
    ];

    /// Subset used for the tissue-scale screening.
    pub const REDUCED: [SaParameter; 7] = [
        SaParameter::CV0Tpz,
        SaParameter::KMet,
        SaParameter::KHalfOx,
        SaParameter::AlphaPd,
        SaParameter::CV0Ox,
        SaParameter::VMaxOx,
        SaParameter::POx,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SaParameter::CV0Tpz => "c_v0_tpz",
            SaParameter::DTpz => "D_tpz",
            SaParameter::PTpz => "P_tpz",
            SaParameter::KMet => "k_met",
            SaParameter::VMaxTpz => "V_max_tpz",
            SaParameter::KmTpz => "K_m_tpz",
            SaParameter::KHalfOx => "K",
            SaParameter::AlphaPd => "alpha_pd",
            SaParameter::Phi0 => "phi_0",
            SaParameter::CV0Ox => "c_v0_ox",
            SaParameter::VMaxOx => "V_max_ox",
            SaParameter::KmOx => "K_m_ox",
            SaParameter::POx => "P_ox",
            SaParameter::DOx => "D_ox",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    /// Config location of the underlying value. `K_m_ox` is stored as the
    /// half-consumption pressure `p_m50` (in mmHg).
    fn config_key(self) -> (&'static str, &'static str) {
        match self {
            SaParameter::CV0Tpz => ("tpz", "c_v0_tpz"),
            SaParameter::DTpz => ("tpz", "d_t_tpz"),
            SaParameter::PTpz => ("tpz", "p_tpz"),
            SaParameter::KMet => ("tpz", "k_met"),
            SaParameter::VMaxTpz => ("tpz", "v_max_tpz"),
            SaParameter::KmTpz => ("tpz", "k_m_tpz"),
            SaParameter::KHalfOx => ("tpz", "k_half_ox"),
            SaParameter::AlphaPd => ("tpz", "alpha_pd"),
            SaParameter::Phi0 => ("tpz", "phi_0"),
            SaParameter::CV0Ox => ("oxygen", "c_v0_ox"),
            SaParameter::VMaxOx => ("oxygen", "v_max_ox"),
            SaParameter::KmOx => ("oxygen", "p_m50"),
            SaParameter::POx => ("oxygen", "p_ox"),
            SaParameter::DOx => ("oxygen", "d_t_ox"),
        }
    }

    pub fn get(self, p: &ParameterSet) -> f64 {
        match self {
            SaParameter::CV0Tpz => p.tpz.c_v0_tpz,
            SaParameter::DTpz => p.tpz.d_t_tpz,
            SaParameter::PTpz => p.tpz.p_tpz,
            SaParameter::KMet => p.tpz.k_met,
            SaParameter::VMaxTpz => p.tpz.v_max_tpz,
            SaParameter::KmTpz => p.tpz.k_m_tpz,
            SaParameter::KHalfOx => p.tpz.k_half_ox,
            SaParameter::AlphaPd => p.tpz.alpha_pd,
            SaParameter::Phi0 => p.tpz.phi_0,
            SaParameter::CV0Ox => p.oxygen.c_v0_ox,
            SaParameter::VMaxOx => p.oxygen.v_max_ox,
            SaParameter::KmOx => p.oxygen.k_m_ox(),
            SaParameter::POx => p.oxygen.p_ox,
            SaParameter::DOx => p.oxygen.d_t_ox,
        }
    }

    pub fn set(self, p: &mut ParameterSet, value: f64) {
        match self {
            SaParameter::CV0Tpz => p.tpz.c_v0_tpz = value,
            SaParameter::DTpz => p.tpz.d_t_tpz = value,
            SaParameter::PTpz => p.tpz.p_tpz = value,
            SaParameter::KMet => p.tpz.k_met = value,
            SaParameter::VMaxTpz => p.tpz.v_max_tpz = value,
            SaParameter::KmTpz => p.tpz.k_m_tpz = value,
            SaParameter::KHalfOx => p.tpz.k_half_ox = value,
            SaParameter::AlphaPd => p.tpz.alpha_pd = value,
            SaParameter::Phi0 => p.tpz.phi_0 = value,
            SaParameter::CV0Ox => p.oxygen.c_v0_ox = value,
            SaParameter::VMaxOx => p.oxygen.v_max_ox = value,
            SaParameter::KmOx => p.oxygen.p_m50 = value / p.oxygen.alpha_t_ox,
            SaParameter::POx => p.oxygen.p_ox = value,
            SaParameter::DOx => p.oxygen.d_t_ox = value,
        }
    }
}

impl fmt::Display for SaParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterRange {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

impl ParameterRange {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.min + self.max)
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }
}

/// Named `(min, max)` ranges spanning the input space of an analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterBounds {
    ranges: Vec<ParameterRange>,
}

impl ParameterBounds {
    pub fn new(ranges: Vec<ParameterRange>) -> Result<Self, ParamError> {
        if ranges.is_empty() {
            return Err(ParamError::Bounds("no parameters".into()));
        }
        for (i, r) in ranges.iter().enumerate() {
            if !(r.min.is_finite() && r.max.is_finite() && r.min < r.max) {
                return Err(ParamError::Bounds(format!(
                    "`{}` needs finite min < max, got [{}, {}]",
                    r.name, r.min, r.max
                )));
            }
            if ranges[..i].iter().any(|o| o.name == r.name) {
                return Err(ParamError::Bounds(format!("duplicate `{}`", r.name)));
            }
        }
        Ok(Self { ranges })
    }

    /// Unit ranges `[0, 1]` named `x1..xk`, handy for analytic test models.
    pub fn unit(k: usize) -> Self {
        Self::new(
            (1..=k)
                .map(|i| ParameterRange {
                    name: format!("x{i}"),
                    min: 0.0,
                    max: 1.0,
                })
                .collect(),
        )
        .expect("unit bounds are valid")
    }

    pub fn ranges(&self) -> &[ParameterRange] {
        &self.ranges
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.ranges.iter().map(|r| r.name.clone()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&ParameterRange> {
        self.ranges.iter().find(|r| r.name == name)
    }

    /// Restriction to the named parameters, in the order given.
    pub fn subset(&self, names: &[&str]) -> Result<Self, ParamError> {
        let ranges = names
            .iter()
            .map(|n| {
                self.get(n)
                    .cloned()
                    .ok_or_else(|| ParamError::UnknownParameter(n.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(ranges)
    }

    /// Affine map from the unit cube to physical values.
    pub fn scale(&self, unit: &[f64]) -> Vec<f64> {
        self.ranges
            .iter()
            .zip(unit)
            .map(|(r, u)| r.min + u * (r.max - r.min))
            .collect()
    }
}

/// Sensitivity ranges of the fourteen screened parameters (SI units).
pub fn default_bounds() -> ParameterBounds {
    let table = [
        (SaParameter::CV0Tpz, 1.78e-2, 4.73e-2),
        (SaParameter::DTpz, 1.80e-11, 1.25e-10),
        (SaParameter::PTpz, 3.75e-5, 6.25e-5),
        (SaParameter::KMet, 5.00e-3, 3.33e-2),
        (SaParameter::VMaxTpz, 1.07e-4, 1.78e-4),
        (SaParameter::KmTpz, 2.63e-3, 4.38e-3),
        (SaParameter::KHalfOx, 2.60e-3, 1.30e-2),
        (SaParameter::AlphaPd, 1.75e1, 2.91e1),
        (SaParameter::Phi0, 3.88e-1, 6.46e-1),
        (SaParameter::CV0Ox, 3.90e-2, 1.30e-1),
        (SaParameter::VMaxOx, 1.30e-3, 1.04e-2),
        (SaParameter::KmOx, 6.50e-4, 1.30e-3),
        (SaParameter::POx, 3.50e-5, 3.00e-4),
        (SaParameter::DOx, 1.81e-9, 3.01e-9),
    ];
    ParameterBounds::new(
        table
            .into_iter()
            .map(|(p, min, max)| ParameterRange {
                name: p.name().to_string(),
                min,
                max,
            })
            .collect(),
    )
    .expect("default bounds are valid")
}

/// The seven-parameter subset of [`default_bounds`].
pub fn reduced_bounds() -> ParameterBounds {
    let names: Vec<&str> = SaParameter::REDUCED.iter().map(|p| p.name()).collect();
    default_bounds()
        .subset(&names)
        .expect("reduced names are in the default bounds")
}

/// Applies physical values for the named sensitivity parameters to a copy
/// of `base`.
pub fn apply_sa_values(
    base: &ParameterSet,
    bounds: &ParameterBounds,
    values: &[f64],
) -> Result<ParameterSet, ParamError> {
    let mut p = base.clone();
    for (range, &v) in bounds.ranges().iter().zip(values) {
        let param = SaParameter::from_name(&range.name)
            .ok_or_else(|| ParamError::UnknownParameter(range.name.clone()))?;
        param.set(&mut p, v);
    }
    Ok(p)
}

/// Three-phase intravenous infusion: linear ramp, plateau, exponential
/// clearance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InjectionProtocol {
    c_v0_tpz: f64,
    t_p: f64,
    t_admin: f64,
    tau: f64,
    t_end: f64,
}

impl InjectionProtocol {
    pub fn new(
        c_v0_tpz: f64,
        t_p: f64,
        t_admin: f64,
        tau: f64,
        t_end: f64,
    ) -> Result<Self, ParamError> {
        let all_finite = [c_v0_tpz, t_p, t_admin, tau, t_end]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(ParamError::Protocol("values must be finite".into()));
        }
        if c_v0_tpz < 0.0 {
            return Err(ParamError::Protocol("plateau concentration < 0".into()));
        }
        if !(t_p > 0.0 && t_p <= t_admin) {
            return Err(ParamError::Protocol(format!(
                "need 0 < T_P <= T, got T_P = {t_p}, T = {t_admin}"
            )));
        }
        if tau <= 0.0 {
            return Err(ParamError::Protocol("tau must be positive".into()));
        }
        if t_end < t_admin {
            return Err(ParamError::Protocol(format!(
                "horizon {t_end} s ends before administration ({t_admin} s)"
            )));
        }
        Ok(Self {
            c_v0_tpz,
            t_p,
            t_admin,
            tau,
            t_end,
        })
    }

    /// Ramp slope, mol/(m^3 s).
    pub fn slope_a(&self) -> f64 {
        self.c_v0_tpz / self.t_p
    }
    pub fn c_v0_tpz(&self) -> f64 {
        self.c_v0_tpz
    }
    pub fn t_p(&self) -> f64 {
        self.t_p
    }
    pub fn t_admin(&self) -> f64 {
        self.t_admin
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn t_end(&self) -> f64 {
        self.t_end
    }
    /// Time after which the vascular concentration is set to zero.
    pub fn t_washout(&self) -> f64 {
        self.t_admin + 5.0 * self.tau
    }

    /// Corner times of the profile inside `(0, t_end)`, ascending.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(3);
        for t in [self.t_p, self.t_admin, self.t_washout()] {
            if t > 0.0 && t < self.t_end && out.last().map_or(true, |&l| t > l) {
                out.push(t);
            }
        }
        out
    }
}

/// The protocol configured in `params.protocol`, with the plateau level
/// taken from `params.tpz.c_v0_tpz`.
pub fn default_protocol(params: &ParameterSet) -> Result<InjectionProtocol, ParamError> {
    let t = &params.protocol;
    InjectionProtocol::new(params.tpz.c_v0_tpz, t.t_p, t.t_admin, t.tau, t.t_end)
}
