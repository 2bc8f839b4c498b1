//! Flat `key = value` configuration, keys namespaced by module.

use std::str::FromStr;

use crate::enhance::EnhanceParams;
use crate::error::{Error, Result};
use crate::gvf::GvfParams;
use crate::trachea::GrowParams;
use crate::tracer::{LeakParams, VoiSizing};
use crate::tube::TubeParams;

/// Split text into `(key, value)` pairs. Blank lines and `#` comments are
/// skipped; a line without `=` is an error.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::ConfigValue {
                key: line.to_string(),
                message: format!("line {} is not of the form key = value", n + 1),
            });
        };
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| Error::ConfigValue { key: key.to_string(), message: e.to_string() })
}

fn parse_auto(key: &str, value: &str) -> Result<Option<f64>> {
    if value.eq_ignore_ascii_case("auto") {
        Ok(None)
    } else {
        parse_value(key, value).map(Some)
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|s| parse_value(key, s.trim())).collect()
}

fn show_auto(v: Option<f64>) -> String {
    v.map_or_else(|| "auto".to_string(), |x| x.to_string())
}

/// Every tracing parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub grow: GrowParams,
    pub enhance: EnhanceParams,
    pub gvf: GvfParams,
    pub tube: TubeParams,
    pub leak: LeakParams,
    pub voi: VoiSizing,
    pub generation_cap: usize,
    /// Safety cap on segmented voxels.
    pub voxel_budget: usize,
    /// VOI lattice pitch (mm); `None` uses the finest input spacing.
    pub pitch: Option<f64>,
    pub max_vois_per_branch: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            grow: GrowParams::default(),
            enhance: EnhanceParams::default(),
            gvf: GvfParams::default(),
            tube: TubeParams::default(),
            leak: LeakParams::default(),
            voi: VoiSizing::default(),
            generation_cap: 12,
            voxel_budget: 20_000_000,
            pitch: None,
            max_vois_per_branch: 64,
        }
    }
}

impl Config {
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "grow.hu_start" => self.grow.hu_start = parse_value(key, v)?,
            "grow.hu_step" => self.grow.hu_step = parse_value(key, v)?,
            "grow.hu_max" => self.grow.hu_max = parse_value(key, v)?,
            "grow.explosion_ratio" => self.grow.explosion_ratio = parse_value(key, v)?,
            "enhance.beta" => self.enhance.beta = parse_value(key, v)?,
            "enhance.log_sigma" => self.enhance.log_sigma = parse_value(key, v)?,
            "enhance.cef_hu_threshold" => self.enhance.cef_hu_threshold = parse_value(key, v)?,
            "enhance.cef_scales" => self.enhance.cef_scales = parse_list(key, v)?,
            "enhance.cef_score_threshold" => self.enhance.cef_score_threshold = parse_value(key, v)?,
            "gvf.sigma" => self.gvf.sigma = parse_value(key, v)?,
            "gvf.f_max" => self.gvf.f_max = parse_auto(key, v)?,
            "gvf.mu" => self.gvf.mu = parse_value(key, v)?,
            "gvf.max_iters" => self.gvf.max_iters = parse_value(key, v)?,
            "gvf.tol" => self.gvf.tol = parse_value(key, v)?,
            "tube.t_l" => self.tube.t_l = parse_value(key, v)?,
            "tube.t_m" => self.tube.t_m = parse_value(key, v)?,
            "tube.r_max" => self.tube.r_max = parse_value(key, v)?,
            "tube.samples" => self.tube.samples = parse_value(key, v)?,
            "tube.edge_stop" => self.tube.edge_stop = parse_value(key, v)?,
            "leak.s_ratio_max" => self.leak.s_ratio_max = parse_value(key, v)?,
            "leak.circularity_min" => self.leak.circularity_min = parse_value(key, v)?,
            "voi.cross_factor" => self.voi.cross_factor = parse_value(key, v)?,
            "voi.cross_floor" => self.voi.cross_floor = parse_value(key, v)?,
            "voi.cross_radius_factor" => self.voi.cross_radius_factor = parse_value(key, v)?,
            "voi.length_factor" => self.voi.length_factor = parse_value(key, v)?,
            "voi.step_factor" => self.voi.step_factor = parse_value(key, v)?,
            "voi.max_length_factor" => self.voi.max_length_factor = parse_value(key, v)?,
            "trace.generation_cap" => self.generation_cap = parse_value(key, v)?,
            "trace.voxel_budget" => self.voxel_budget = parse_value(key, v)?,
            "trace.pitch" => self.pitch = parse_auto(key, v)?,
            "trace.max_vois_per_branch" => self.max_vois_per_branch = parse_value(key, v)?,
            _ => return Err(Error::UnknownConfigKey(key.to_string())),
        }
        Ok(())
    }

    /// All keys with their current values, in documentation order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let scales = self.enhance.cef_scales.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",");
        vec![
            ("grow.hu_start", self.grow.hu_start.to_string()),
            ("grow.hu_step", self.grow.hu_step.to_string()),
            ("grow.hu_max", self.grow.hu_max.to_string()),
            ("grow.explosion_ratio", self.grow.explosion_ratio.to_string()),
            ("enhance.beta", self.enhance.beta.to_string()),
            ("enhance.log_sigma", self.enhance.log_sigma.to_string()),
            ("enhance.cef_hu_threshold", self.enhance.cef_hu_threshold.to_string()),
            ("enhance.cef_scales", scales),
            ("enhance.cef_score_threshold", self.enhance.cef_score_threshold.to_string()),
            ("gvf.sigma", self.gvf.sigma.to_string()),
            ("gvf.f_max", show_auto(self.gvf.f_max)),
            ("gvf.mu", self.gvf.mu.to_string()),
            ("gvf.max_iters", self.gvf.max_iters.to_string()),
            ("gvf.tol", self.gvf.tol.to_string()),
            ("tube.t_l", self.tube.t_l.to_string()),
            ("tube.t_m", self.tube.t_m.to_string()),
            ("tube.r_max", self.tube.r_max.to_string()),
            ("tube.samples", self.tube.samples.to_string()),
            ("tube.edge_stop", self.tube.edge_stop.to_string()),
            ("leak.s_ratio_max", self.leak.s_ratio_max.to_string()),
            ("leak.circularity_min", self.leak.circularity_min.to_string()),
            ("voi.cross_factor", self.voi.cross_factor.to_string()),
            ("voi.cross_floor", self.voi.cross_floor.to_string()),
            ("voi.cross_radius_factor", self.voi.cross_radius_factor.to_string()),
            ("voi.length_factor", self.voi.length_factor.to_string()),
            ("voi.step_factor", self.voi.step_factor.to_string()),
            ("voi.max_length_factor", self.voi.max_length_factor.to_string()),
            ("trace.generation_cap", self.generation_cap.to_string()),
            ("trace.voxel_budget", self.voxel_budget.to_string()),
            ("trace.pitch", show_auto(self.pitch)),
            ("trace.max_vois_per_branch", self.max_vois_per_branch.to_string()),
        ]
    }

    /// `key = value` lines for every parameter.
    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Defaults overridden by `text`; unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (k, v) in parse_kv(text)? {
            c.set(&k, &v)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.grow.validate()?;
        self.enhance.validate()?;
        self.gvf.validate()?;
        self.tube.validate()?;
        self.leak.validate()?;
        self.voi.validate()?;
        if self.pitch.is_some_and(|p| !(p > 0.0)) {
            return Err(Error::InvalidParameter("trace.pitch must be > 0".into()));
        }
        if self.max_vois_per_branch == 0 {
            return Err(Error::InvalidParameter("trace.max_vois_per_branch must be >= 1".into()));
        }
        Ok(())
    }
}
