//! Command-line driver: `toa <scenario> [--config PATH] [--out DIR] [overrides]`.
//!
//! Figure scenarios write `<scenario>.csv` and `<scenario>.json`; `report`
//! and `validate` write only the JSON file. The sidecar layout is described
//! in `docs/sidecar.md`.

pub mod config;
pub mod scenarios;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;
use sha2::{Digest, Sha256};

pub use config::{parse_config, RunConfig, KEYS};
pub use scenarios::{Peak, Scenario, ScenarioOutput, ScenarioRegistry, Table};

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "toa", version, about = "Operational time-of-arrival figure data and checks")]
#[command(allow_negative_numbers = true)]
pub struct Args {
    /// fig1, fig2, fig3, fig4, fig5, report or validate
    pub scenario: String,
    /// `key = value` file applied over the scenario defaults
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub k0: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub q0: Option<f64>,
    #[arg(long)]
    pub x0: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
}

impl Args {
    fn overrides(&self) -> Vec<(&'static str, f64)> {
        [
            ("k0", self.k0),
            ("delta", self.delta),
            ("sigma", self.sigma),
            ("q0", self.q0),
            ("x0", self.x0),
            ("t", self.t),
            ("eps", self.eps),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .collect()
    }
}

/// Scenario defaults, then the config file, then command-line flags.
pub fn resolve_config(args: &Args, registry: &ScenarioRegistry) -> Result<RunConfig> {
    let scenario = registry.get(&args.scenario).ok_or_else(|| {
        Error::config(
            None,
            Some("scenario"),
            format!("unknown scenario `{}`; available: {}", args.scenario, registry.names().join(", ")),
        )
    })?;
    let text = match &args.config {
        Some(path) => fs::read_to_string(path)?,
        None => String::new(),
    };
    let mut cfg = parse_config(&text, scenario.defaults())?;
    for (key, value) in args.overrides() {
        cfg.set(key, &format!("{value:?}"), None)?;
    }
    cfg.check()?;
    cfg.output_path = args.out.clone();
    Ok(cfg)
}

/// CSV text: `# params:` row, header row, then rows with 17 significant digits.
pub fn render_csv(cfg: &RunConfig, table: &Table) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# params: {}", cfg.to_params_line());
    let _ = writeln!(out, "{}", table.columns.join(","));
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Files written by one run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub success: bool,
    pub csv: Option<PathBuf>,
    pub sidecar: PathBuf,
}

/// Runs the configured scenario and writes its files into `cfg.output_path`.
pub fn run(cfg: &RunConfig, registry: &ScenarioRegistry) -> Result<RunOutcome> {
    let scenario = registry
        .get(&cfg.scenario)
        .ok_or_else(|| Error::config(None, Some("scenario"), format!("unknown scenario `{}`", cfg.scenario)))?;
    let output = scenario.run(cfg)?;
    write_outputs(cfg, &output)
}

fn write_outputs(cfg: &RunConfig, output: &ScenarioOutput) -> Result<RunOutcome> {
    let dir: &Path = &cfg.output_path;
    fs::create_dir_all(dir)?;
    let mut csv_path = None;
    let mut csv_meta = serde_json::Value::Null;
    if let Some(table) = &output.table {
        let text = render_csv(cfg, table);
        let path = dir.join(format!("{}.csv", cfg.scenario));
        fs::write(&path, &text)?;
        csv_meta = json!({
            "file": path.file_name().map(|n| n.to_string_lossy().into_owned()),
            "columns": table.columns,
            "rows": table.rows.len(),
            "sha256": sha256_hex(text.as_bytes()),
        });
        csv_path = Some(path);
    }
    let sidecar = json!({
        "scenario": cfg.scenario,
        "config": { "text": cfg.to_text(), "values": cfg },
        "csv": csv_meta,
        "peak": output.peak,
        "extras": output.extras,
        "success": output.success,
    });
    let sidecar_path = dir.join(format!("{}.json", cfg.scenario));
    fs::write(&sidecar_path, serde_json::to_string_pretty(&sidecar)? + "\n")?;
    Ok(RunOutcome { success: output.success, csv: csv_path, sidecar: sidecar_path })
}

/// Entry point used by the binary. Exit codes: 0 success, 1 a check or
/// scenario reported failure, 2 a config, I/O or numerical error.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let registry = ScenarioRegistry::standard();
    let outcome = resolve_config(&args, &registry).and_then(|cfg| run(&cfg, &registry));
    match outcome {
        Ok(o) => {
            if let Some(csv) = &o.csv {
                eprintln!("wrote {}", csv.display());
            }
            eprintln!("wrote {}", o.sidecar.display());
            if o.success {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
