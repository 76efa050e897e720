//! Flat `key = value` run configuration.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::PhaseGrid;
use crate::quadrature::QuadratureConfig;
use crate::states::{FilterGaussian, ParticleGaussian, DEFAULT_REGIME_THRESHOLD};

/// Every recognised key, in the order the effective config is echoed.
pub const KEYS: [&str; 20] = [
    "scenario",
    "x0",
    "k0",
    "delta",
    "q0",
    "sigma",
    "t",
    "eps",
    "x_min",
    "x_max",
    "x_points",
    "y_min",
    "y_max",
    "y_points",
    "times",
    "regime_threshold",
    "rel_tol",
    "abs_tol",
    "max_subdivisions",
    "truncation_radius",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub scenario: String,
    pub particle: ParticleGaussian,
    pub filter: FilterGaussian,
    pub t: f64,
    /// Regularization gap for the time moments; `None` means `|k₀|/10`.
    pub eps: Option<f64>,
    pub grid: PhaseGrid,
    pub quadrature: QuadratureConfig,
    /// Evolution times of the per-t sections.
    pub times: Vec<f64>,
    pub regime_threshold: f64,
    #[serde(skip)]
    pub output_path: PathBuf,
}

impl RunConfig {
    /// Parameters shared by the figure scenarios: `x₀ = 1`, `k₀ = 40`,
    /// `δ = σ = 0.1`, `q₀ = 3.5`.
    pub fn figure_defaults(scenario: &str, t: f64, grid: PhaseGrid) -> Self {
        Self {
            scenario: scenario.into(),
            particle: ParticleGaussian { x0: 1.0, k0: 40.0, delta: 0.1 },
            filter: FilterGaussian { q0: 3.5, sigma: 0.1 },
            t,
            eps: None,
            grid,
            quadrature: QuadratureConfig::default(),
            times: vec![t],
            regime_threshold: DEFAULT_REGIME_THRESHOLD,
            output_path: PathBuf::from("."),
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.eps.unwrap_or(self.particle.k0.abs() / 10.0)
    }

    fn value_of(&self, key: &str) -> Option<String> {
        let num = |v: f64| Some(format!("{v:?}"));
        match key {
            "scenario" => Some(self.scenario.clone()),
            "x0" => num(self.particle.x0),
            "k0" => num(self.particle.k0),
            "delta" => num(self.particle.delta),
            "q0" => num(self.filter.q0),
            "sigma" => num(self.filter.sigma),
            "t" => num(self.t),
            "eps" => self.eps.and_then(num),
            "x_min" => num(self.grid.x.min),
            "x_max" => num(self.grid.x.max),
            "x_points" => Some(self.grid.x.points.to_string()),
            "y_min" => num(self.grid.y.min),
            "y_max" => num(self.grid.y.max),
            "y_points" => Some(self.grid.y.points.to_string()),
            "times" => Some(self.times.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(", ")),
            "regime_threshold" => num(self.regime_threshold),
            "rel_tol" => num(self.quadrature.rel_tol),
            "abs_tol" => num(self.quadrature.abs_tol),
            "max_subdivisions" => Some(self.quadrature.max_subdivisions.to_string()),
            "truncation_radius" => num(self.quadrature.truncation_radius),
            _ => None,
        }
    }

    /// The effective config in the same format [`parse_config`] reads.
    /// Floats use the shortest representation that round-trips.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            if let Some(v) = self.value_of(key) {
                let _ = writeln!(out, "{key} = {v}");
            }
        }
        out
    }

    /// Single-line form for the CSV `# params:` row.
    pub fn to_params_line(&self) -> String {
        KEYS.iter()
            .filter_map(|k| self.value_of(k).map(|v| format!("{k}={}", v.replace(' ', ""))))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Sets one key; `line` is used for diagnostics only.
    pub fn set(&mut self, key: &str, value: &str, line: Option<usize>) -> Result<()> {
        let bad = |what: &str| Error::config(line, Some(key), format!("expected {what}, found `{value}`"));
        let float = || value.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| bad("a finite number"));
        let count = || value.parse::<usize>().map_err(|_| bad("a non-negative integer"));
        match key {
            "scenario" => {
                if value != self.scenario {
                    return Err(Error::config(
                        line,
                        Some(key),
                        format!("config is for `{value}` but the scenario is `{}`", self.scenario),
                    ));
                }
            }
            "x0" => self.particle.x0 = float()?,
            "k0" => self.particle.k0 = float()?,
            "delta" => self.particle.delta = float()?,
            "q0" => self.filter.q0 = float()?,
            "sigma" => self.filter.sigma = float()?,
            "t" => self.t = float()?,
            "eps" => self.eps = Some(float()?),
            "x_min" => self.grid.x.min = float()?,
            "x_max" => self.grid.x.max = float()?,
            "x_points" => self.grid.x.points = count()?,
            "y_min" => self.grid.y.min = float()?,
            "y_max" => self.grid.y.max = float()?,
            "y_points" => self.grid.y.points = count()?,
            "times" => {
                self.times = value
                    .split(',')
                    .map(|s| s.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| bad("a comma-separated list of numbers"))?;
            }
            "regime_threshold" => self.regime_threshold = float()?,
            "rel_tol" => self.quadrature.rel_tol = float()?,
            "abs_tol" => self.quadrature.abs_tol = float()?,
            "max_subdivisions" => self.quadrature.max_subdivisions = count()?,
            "truncation_radius" => self.quadrature.truncation_radius = float()?,
            _ => return Err(Error::config(line, Some(key), "unknown key")),
        }
        Ok(())
    }

    /// Rejects inconsistent combinations after all keys are applied.
    pub fn check(&self) -> Result<()> {
        let wrap = |key: &str, r: Result<()>| {
            r.map_err(|e| match e {
                Error::InvalidParameter(m) => Error::config(None, Some(key), m),
                other => other,
            })
        };
        wrap("delta", self.particle.validate())?;
        wrap("sigma", self.filter.validate())?;
        wrap("x_points", self.grid.x.validate())?;
        wrap("y_points", self.grid.y.validate())?;
        wrap("rel_tol", self.quadrature.validate())?;
        if let Some(e) = self.eps {
            if !(e > 0.0) {
                return Err(Error::config(None, Some("eps"), "must be positive"));
            }
        }
        if self.times.is_empty() {
            return Err(Error::config(None, Some("times"), "needs at least one time"));
        }
        if !(self.regime_threshold >= 0.0) {
            return Err(Error::config(None, Some("regime_threshold"), "must be non-negative"));
        }
        Ok(())
    }
}

/// Applies a `key = value` document on top of `base`. Blank lines and text
/// after `#` are ignored; duplicate and unknown keys are rejected.
pub fn parse_config(text: &str, base: RunConfig) -> Result<RunConfig> {
    let mut cfg = base;
    let mut seen: Vec<String> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| Error::config(Some(line), None, format!("expected `key = value`, found `{body}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if seen.iter().any(|k| k == key) {
            return Err(Error::config(Some(line), Some(key), "duplicate key"));
        }
        cfg.set(key, value, Some(line))?;
        seen.push(key.to_owned());
    }
    cfg.check()?;
    Ok(cfg)
}
