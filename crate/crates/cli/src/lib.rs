//! Batch front end for the fmto simulation and analysis chain.
//!
//! A run configuration lists scenarios; each runs one command into its own
//! output directory next to a manifest that records the resolved
//! configuration, seed and the hash of every file written.

// `!(x > 0.0)` also rejects NaN, which is the point
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod commands;
pub mod config;
pub mod manifest;

use std::path::{Path, PathBuf};

use fmto_core::{Error, Result};
use rayon::prelude::*;

pub use commands::{
    cmd_analyze, cmd_bounds, cmd_calibrate, cmd_coils, cmd_sensitivity, cmd_simulate, cmd_sweep,
    CommandOutput,
};
pub use config::{Command, RunConfig, Scenario};
pub use manifest::{Manifest, MANIFEST_FILE};

/// Bundled configuration of the reference experiment: calibration chain, field
/// sensitivity, coil and bound tables on synthetic data.
pub const PAPER_REPLICA: &str = include_str!("../configs/paper-replica.toml");

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub out: PathBuf,
    /// Replaces every scenario seed.
    pub seed: Option<u64>,
    /// Base for relative input paths.
    pub config_dir: PathBuf,
    /// Run only scenarios with this command.
    pub only: Option<Command>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub name: String,
    pub dir: PathBuf,
    pub manifest: Manifest,
}

/// Runs every selected scenario concurrently, each into `out/<name>/`.
/// All scenarios run to completion; the first failure (in config order) is
/// returned.
pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<Vec<ScenarioReport>> {
    let presets = cfg.presets();
    let selected: Vec<&Scenario> = cfg
        .scenario
        .iter()
        .filter(|s| opts.only.is_none_or(|c| c == s.command))
        .collect();
    let results: Vec<Result<ScenarioReport>> = selected
        .par_iter()
        .map(|s| {
            let mut s = (*s).clone();
            if let Some(seed) = opts.seed {
                s.seed = seed;
            }
            run_scenario(cfg, &s, &presets, opts)
        })
        .collect();
    let mut reports = Vec::with_capacity(results.len());
    for (s, r) in selected.iter().zip(results) {
        match r {
            Ok(rep) => reports.push(rep),
            Err(e) => {
                log::error!("scenario '{}' failed: {e}", s.name);
                return Err(e);
            }
        }
    }
    Ok(reports)
}

fn run_scenario(
    cfg: &RunConfig,
    s: &Scenario,
    presets: &fmto_core::presets::PresetFile,
    opts: &RunOptions,
) -> Result<ScenarioReport> {
    let dir = opts.out.join(&s.name);
    if dir.exists() {
        std::fs::remove_dir_all(&dir)?;
    }
    std::fs::create_dir_all(&dir)?;
    log::info!("scenario '{}': {}", s.name, s.command.name());
    let out = match s.command {
        Command::Simulate => cmd_simulate(s, presets, &dir, s.seed),
        Command::Analyze => cmd_analyze(s, presets, &dir, &opts.config_dir),
        Command::Calibrate => cmd_calibrate(s, presets, &dir, s.seed),
        Command::Sensitivity => cmd_sensitivity(s, presets, &dir),
        Command::Bounds => cmd_bounds(s, presets, &dir),
        Command::Coils => cmd_coils(s, &dir),
        Command::Sweep => cmd_sweep(s, presets, &dir, s.seed),
    }
    .map_err(|e| annotate(&s.name, e))?;
    let resolved = manifest::ResolvedConfig::new(cfg, s);
    let manifest = Manifest {
        format: manifest::FORMAT,
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        scenario: s.name.clone(),
        command: s.command.name(),
        seed: s.seed,
        config_sha256: manifest::sha256_hex(resolved.to_toml()?.as_bytes()),
        outputs: manifest::collect_outputs(&dir, &out.files)?,
        results: out.results,
        notes: out.notes,
        config: resolved,
    };
    manifest.write(&dir)?;
    Ok(ScenarioReport {
        name: s.name.clone(),
        dir,
        manifest,
    })
}

fn annotate(name: &str, e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("scenario '{name}': {m}")),
        other => other,
    }
}

/// Config used when a subcommand is run without `--config`: one scenario
/// with all defaults.
pub fn default_config(command: Command) -> RunConfig {
    let text = format!(
        "[[scenario]]\nname = \"{0}\"\ncommand = \"{0}\"\n",
        command.name()
    );
    RunConfig::from_toml_str(&text).expect("default scenario is valid")
}

/// Directory against which relative paths in a config file resolve.
pub fn config_dir_of(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}
