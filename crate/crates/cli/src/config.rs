//! Flat TOML run configuration: one section per command, scalar keys only.

use std::path::Path;

use serde::Deserialize;
use symlab_core::Error;

fn default_m() -> f64 {
    1.0
}
fn default_sigma1() -> f64 {
    0.1
}
fn default_sigma2() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub n: usize,
    #[serde(default = "default_m")]
    pub m_lower: f64,
    #[serde(default = "default_m")]
    pub m_upper: f64,
    #[serde(default = "default_sigma1")]
    pub sigma1: f64,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalFormConfig {
    /// "nonres1" or "nonres2"
    pub preset: String,
}

fn default_grid() -> usize {
    200
}
fn default_trials() -> usize {
    10_000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub n: usize,
    pub k: i64,
    #[serde(default = "default_sigma1")]
    pub sigma1: f64,
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftConfig {
    /// currently only "quad1"
    pub system: String,
    /// symplectic-euler | stormer-verlet | yoshida4 | exact-flow
    pub method: String,
    pub h: Vec<f64>,
    pub steps: u64,
    pub actions: Vec<f64>,
    pub angles: Vec<f64>,
    /// compare against the theorem envelope when set
    #[serde(default)]
    pub epsilon: Option<f64>,
}

fn default_confine_box() -> f64 {
    2.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfineConfig {
    pub epsilon: f64,
    pub steps: u64,
    pub x0: f64,
    pub y0: f64,
    pub k: i64,
    #[serde(default = "default_sigma1")]
    pub sigma1: f64,
    /// half-width of the action window around x0 used for classification
    #[serde(default = "default_confine_box")]
    pub half_width: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub bounds: Option<BoundsConfig>,
    pub normalform: Option<NormalFormConfig>,
    pub geometry: Option<GeometryConfig>,
    pub drift: Option<DriftConfig>,
    pub confine: Option<ConfineConfig>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::parameter("config", format!("cannot read {path:?}: {e}")))?;
        toml::from_str(&text)
            .map_err(|e| Error::parameter("config", format!("invalid TOML in {path:?}: {e}")))
    }

    pub fn section<'a, T>(opt: &'a Option<T>, name: &str) -> Result<&'a T, Error> {
        opt.as_ref()
            .ok_or_else(|| Error::parameter(name, "section missing from the config file"))
    }
}

pub fn validate_drift(cfg: &DriftConfig) -> Result<(), Error> {
    if cfg.system != "quad1" {
        return Err(Error::parameter(
            "drift.system",
            format!("unknown system `{}` (available: quad1)", cfg.system),
        ));
    }
    if cfg.h.is_empty() {
        return Err(Error::parameter("drift.h", "need at least one step size"));
    }
    if cfg.h.iter().any(|&h| !(h > 0.0)) {
        return Err(Error::parameter("drift.h", "step sizes must be > 0"));
    }
    if cfg.actions.len() != cfg.angles.len() || cfg.actions.is_empty() {
        return Err(Error::parameter(
            "drift.actions/angles",
            "need matching nonempty action and angle lists",
        ));
    }
    Ok(())
}

pub fn validate_geometry(cfg: &GeometryConfig) -> Result<(), Error> {
    if cfg.n == 0 || cfg.n > 3 {
        return Err(Error::parameter("geometry.n", "need 1 <= n <= 3"));
    }
    if !(cfg.lo < cfg.hi) {
        return Err(Error::parameter("geometry.lo/hi", "need lo < hi"));
    }
    if cfg.grid < 2 {
        return Err(Error::parameter("geometry.grid", "need >= 2 points per axis"));
    }
    Ok(())
}

pub fn validate_confine(cfg: &ConfineConfig) -> Result<(), Error> {
    if !(cfg.epsilon >= 0.0) {
        return Err(Error::parameter("confine.epsilon", "must be >= 0"));
    }
    if !(cfg.half_width > 0.0) {
        return Err(Error::parameter("confine.half_width", "must be > 0"));
    }
    Ok(())
}
