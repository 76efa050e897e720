//! Scenario registry: one strategy object per figure or report.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Value};

use super::config::RunConfig;
use crate::arrival_time::{regularization_sweep, time_moments_asymptotic};
use crate::error::Result;
use crate::grid::{Axis, Field, PhaseGrid};
use crate::propensity::{phase_moments_closed, propensity_grid};
use crate::spectra::{
    aux_quantities, backflow_ratio, flux_closed, flux_lobe_masses, flux_normalization, slice_moments, spectra_grid,
    Spectrum,
};
use crate::states::validate_regime;
use crate::uncertainty::{commutator_leading, energy_moment, uncertainty_report, TimeSpreadMethod};
use crate::validation::CheckRegistry;

/// Tabular data written as CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// Column headers, each naming the quantity and its unit.
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

impl Peak {
    fn of(field: &Field) -> Self {
        let (i, j, value) = field.argmax();
        Self { x: field.x[i], y: field.y[j], value }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub table: Option<Table>,
    pub peak: Option<Peak>,
    /// Scenario-specific sidecar entries.
    pub extras: Value,
    /// `false` makes the run exit nonzero.
    pub success: bool,
}

pub trait Scenario: Send + Sync {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    fn defaults(&self) -> RunConfig;
    fn run(&self, cfg: &RunConfig) -> Result<ScenarioOutput>;
}

pub struct ScenarioRegistry {
    entries: BTreeMap<&'static str, Box<dyn Scenario>>,
}

impl ScenarioRegistry {
    pub fn empty() -> Self {
        Self { entries: BTreeMap::new() }
    }

    pub fn register(&mut self, scenario: Box<dyn Scenario>) {
        let name = scenario.name();
        assert!(self.entries.insert(name, scenario).is_none(), "duplicate scenario {name}");
    }

    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(Fig1));
        r.register(Box::new(Fig2));
        r.register(Box::new(Fig3));
        r.register(Box::new(Fig4));
        r.register(Box::new(Fig5));
        r.register(Box::new(Report));
        r.register(Box::new(Validate));
        r
    }

    pub fn get(&self, name: &str) -> Option<&dyn Scenario> {
        self.entries.get(name).map(|s| s.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}

fn axis(min: f64, max: f64, points: usize) -> Axis {
    Axis { min, max, points }
}

fn regime(cfg: &RunConfig) -> Value {
    json!(validate_regime(&cfg.particle, &cfg.filter, cfg.regime_threshold))
}

fn field_table(field: &Field, columns: Vec<&'static str>) -> Table {
    let mut rows = Vec::with_capacity(field.values.len());
    for (i, &x) in field.x.iter().enumerate() {
        for (j, &y) in field.y.iter().enumerate() {
            rows.push(vec![x, y, field.get(i, j)]);
        }
    }
    Table { columns, rows }
}

struct Fig1;

impl Scenario for Fig1 {
    fn name(&self) -> &'static str {
        "fig1"
    }
    fn summary(&self) -> &'static str {
        "propensity sections Pr(q, p) at fixed p for several evolution times"
    }
    fn defaults(&self) -> RunConfig {
        let mut c = RunConfig::figure_defaults("fig1", 0.0, PhaseGrid { x: axis(0.0, 5.0, 501), y: Axis::single(40.0) });
        c.times = vec![-0.05, 0.0, 0.05];
        c
    }
    fn run(&self, cfg: &RunConfig) -> Result<ScenarioOutput> {
        let mut rows = Vec::new();
        let mut peaks = Vec::new();
        let mut fields = Vec::new();
        for &t in &cfg.times {
            let field = propensity_grid(&cfg.particle, &cfg.filter, &cfg.grid, t)?;
            for (i, &q) in field.x.iter().enumerate() {
                for (j, &p) in field.y.iter().enumerate() {
                    rows.push(vec![t, q, p, field.get(i, j)]);
                }
            }
            peaks.push(json!({ "t": t, "peak": Peak::of(&field) }));
            fields.push((t, field));
        }
        // Mirror q about the window centre together with t -> -t.
        let mut mirror = Vec::new();
        for (t, a) in &fields {
            if let Some((_, b)) = fields.iter().find(|(s, _)| *s == -*t) {
                let (nx, ny) = (a.x.len(), a.y.len());
                let scale = a.values.iter().chain(&b.values).fold(0.0f64, |m, v| m.max(v.abs()));
                let mut worst = 0.0f64;
                for i in 0..nx {
                    for j in 0..ny {
                        worst = worst.max((a.get(i, j) - b.get(nx - 1 - i, j)).abs());
                    }
                }
                mirror.push(json!({ "t": t, "max_relative_difference": worst / scale }));
            }
        }
        let overall = fields
            .iter()
            .map(|(_, f)| Peak::of(f))
            .fold(None::<Peak>, |best, p| match best {
                Some(b) if b.value >= p.value => Some(b),
                _ => Some(p),
            });
        Ok(ScenarioOutput {
            table: Some(Table { columns: vec!["t[time]", "q[length]", "p[momentum]", "pr[1/(length*momentum)]"], rows }),
            peak: overall,
            extras: json!({
                "sections": peaks,
                "mirror_symmetry": mirror,
                "mirror_centre": 0.5 * (cfg.grid.x.min + cfg.grid.x.max),
                "regime": regime(cfg),
            }),
            success: true,
        })
    }
}

struct Fig2;

impl Scenario for Fig2 {
    fn name(&self) -> &'static str {
        "fig2"
    }
    fn summary(&self) -> &'static str {
        "propensity Pr(q, p, t) over a phase-space window"
    }
    fn defaults(&self) -> RunConfig {
        RunConfig::figure_defaults("fig2", 0.01, PhaseGrid { x: axis(1.0, 4.0, 200), y: axis(20.0, 60.0, 200) })
    }
    fn run(&self, cfg: &RunConfig) -> Result<ScenarioOutput> {
        let field = propensity_grid(&cfg.particle, &cfg.filter, &cfg.grid, cfg.t)?;
        let m = phase_moments_closed(&cfg.particle, &cfg.filter, cfg.t);
        Ok(ScenarioOutput {
            peak: Some(Peak::of(&field)),
            table: Some(field_table(&field, vec!["q[length]", "p[momentum]", "pr[1/(length*momentum)]"])),
            extras: json!({
                "cell": { "q": cfg.grid.x.step(), "p": cfg.grid.y.step() },
                "moments": m,
                "regime": regime(cfg),
            }),
            success: true,
        })
    }
}

struct Fig3;

impl Scenario for Fig3 {
    fn name(&self) -> &'static str {
        "fig3"
    }
    fn summary(&self) -> &'static str {
        "arrival-time flux Pr(theta, t) split into forward and backflow branches (x axis only)"
    }
    fn defaults(&self) -> RunConfig {
        let mut c = RunConfig::figure_defaults("fig3", -0.1, PhaseGrid { x: axis(-1.0, 1.0, 2001), y: Axis::single(0.0) });
        c.particle.k0 = 10.0;
        c
    }
    fn run(&self, cfg: &RunConfig) -> Result<ScenarioOutput> {
        let (p, f, t) = (&cfg.particle, &cfg.filter, cfg.t);
        let mut rows = Vec::with_capacity(cfg.grid.x.points);
        let mut best: Option<(f64, f64)> = None;
        for th in cfg.grid.x.values() {
            let x = flux_closed(p, f, th, t);
            if best.is_none_or(|(_, v)| x.total > v) {
                best = Some((th, x.total));
            }
            rows.push(vec![th, t, x.plus, x.minus, x.total]);
        }
        let (mode, peak_value) = best.unwrap_or((f64::NAN, f64::NAN));
        let (plus, minus) = flux_lobe_masses(p, f, t, &cfg.quadrature)?;
        let aux = aux_quantities(p, f, mode, t);
        Ok(ScenarioOutput {
            table: Some(Table {
                columns: vec!["theta[time]", "t[time]", "plus[1/time]", "minus[1/time]", "total[1/time]"],
                rows,
            }),
            peak: Some(Peak { x: mode, y: t, value: peak_value }),
            extras: json!({
                "lobe_masses": { "plus": plus, "minus": minus, "ratio": minus / plus },
                "normalization": flux_normalization(p, f, t, &cfg.quadrature)?,
                "classical_arrival_time": aux.t_cl_t,
                "backflow_at_peak": backflow_ratio(p, f, mode, t).ok(),
                "regime": regime(cfg),
            }),
            success: true,
        })
    }
}

struct Fig4;

impl Scenario for Fig4 {
    fn name(&self) -> &'static str {
        "fig4"
    }
    fn summary(&self) -> &'static str {
        "joint time-energy distribution Pr(theta, E)"
    }
    fn defaults(&self) -> RunConfig {
        RunConfig::figure_defaults("fig4", 0.01, PhaseGrid { x: axis(-0.5, 0.5, 200), y: axis(2.0, 1600.0, 200) })
    }
    fn run(&self, cfg: &RunConfig) -> Result<ScenarioOutput> {
        let field = spectra_grid(&cfg.particle, &cfg.filter, &cfg.grid, Spectrum::Joint { t: cfg.t })?;
        Ok(ScenarioOutput {
            peak: Some(Peak::of(&field)),
            table: Some(field_table(&field, vec!["theta[time]", "E[energy]", "pr[1/(time*energy)]"])),
            extras: json!({ "regime": regime(cfg) }),
            success: true,
        })
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SliceWidth {
    pub energy: f64,
    pub mean_theta: f64,
    pub std_theta: f64,
}

/// Mean and spread in θ of every fixed-E slice of a `(θ, E)` field.
pub fn slice_widths(field: &Field) -> Vec<SliceWidth> {
    (0..field.y.len())
        .map(|j| {
            let (mean, var) = slice_moments(&field.x, &field.column(j));
            SliceWidth { energy: field.y[j], mean_theta: mean, std_theta: var.max(0.0).sqrt() }
        })
        .collect()
}

struct Fig5;

impl Scenario for Fig5 {
    fn name(&self) -> &'static str {
        "fig5"
    }
    fn summary(&self) -> &'static str {
        "positive-momentum ridge of Pr(theta, E) with per-energy widths in theta"
    }
    fn defaults(&self) -> RunConfig {
        RunConfig::figure_defaults("fig5", 0.01, PhaseGrid { x: axis(0.0, 0.15, 301), y: axis(200.0, 1400.0, 201) })
    }
    fn run(&self, cfg: &RunConfig) -> Result<ScenarioOutput> {
        let field = spectra_grid(&cfg.particle, &cfg.filter, &cfg.grid, Spectrum::Joint { t: cfg.t })?;
        let widths = slice_widths(&field);
        Ok(ScenarioOutput {
            peak: Some(Peak::of(&field)),
            table: Some(field_table(&field, vec!["theta[time]", "E[energy]", "pr[1/(time*energy)]"])),
            extras: json!({
                "lowest_energy_slice": widths.first(),
                "highest_energy_slice": widths.last(),
                "slices": widths,
                "regime": regime(cfg),
            }),
            success: true,
        })
    }
}

struct Report;

impl Scenario for Report {
    fn name(&self) -> &'static str {
        "report"
    }
    fn summary(&self) -> &'static str {
        "moments, uncertainty product and backflow ratio for one configuration"
    }
    fn defaults(&self) -> RunConfig {
        RunConfig::figure_defaults("report", 0.0, PhaseGrid { x: Axis::single(0.0), y: Axis::single(0.0) })
    }
    fn run(&self, cfg: &RunConfig) -> Result<ScenarioOutput> {
        let (p, f, t, q) = (&cfg.particle, &cfg.filter, cfg.t, &cfg.quadrature);
        p.require_moving()?;
        let eps = cfg.epsilon();
        let sweep = [1, 2]
            .iter()
            .map(|&n| regularization_sweep(n, eps, p, f, t, q))
            .collect::<Result<Vec<_>>>()?;
        let asym = time_moments_asymptotic(p, f, t);
        let aux = aux_quantities(p, f, asym.t1, t);
        let commutator = commutator_leading(p, t, q)
            .map(|c| json!({ "re": c.re, "im": c.im }))
            .unwrap_or_else(|e| json!({ "error": e.to_string() }));
        Ok(ScenarioOutput {
            table: None,
            peak: None,
            extras: json!({
                "phase_moments": phase_moments_closed(p, f, t),
                "time_moments": {
                    "asymptotic": asym,
                    "regularized_first": sweep[0],
                    "regularized_second": sweep[1],
                },
                "energy_moments": { "first": energy_moment(1, p, f)?, "second": energy_moment(2, p, f)? },
                "uncertainty": {
                    "asymptotic": uncertainty_report(p, f, t, q, TimeSpreadMethod::Asymptotic)?,
                    "regularized": uncertainty_report(p, f, t, q, TimeSpreadMethod::Regularized { epsilon: eps })?,
                },
                "backflow_at_mean_time": {
                    "theta": asym.t1,
                    "xi": aux.xi,
                    "ratio": backflow_ratio(p, f, asym.t1, t).ok(),
                },
                "commutator": commutator,
                "regime": regime(cfg),
            }),
            success: true,
        })
    }
}

struct Validate;

impl Scenario for Validate {
    fn name(&self) -> &'static str {
        "validate"
    }
    fn summary(&self) -> &'static str {
        "run every registered consistency check; nonzero exit on any failure"
    }
    fn defaults(&self) -> RunConfig {
        RunConfig::figure_defaults("validate", 0.0, PhaseGrid { x: Axis::single(0.0), y: Axis::single(0.0) })
    }
    fn run(&self, cfg: &RunConfig) -> Result<ScenarioOutput> {
        let reports = CheckRegistry::standard().run_all(&cfg.quadrature);
        for r in &reports {
            println!("{}", r.summary_line());
        }
        let passed = reports.iter().all(|r| r.passed);
        Ok(ScenarioOutput {
            table: None,
            peak: None,
            extras: json!({ "passed": passed, "checks": reports }),
            success: passed,
        })
    }
}
