//! Config-driven experiment runner behind the `sgd-lab` binary.
//!
//! A run reads a TOML (or JSON) [`ExperimentConfig`], validates it in full,
//! runs the experiment, and only then writes `summary.json` plus any
//! trajectory CSVs into the output directory. A config error therefore
//! leaves the filesystem untouched.

mod builtins;
mod config;
mod runner;

use std::path::{Path, PathBuf};

pub use builtins::{builtin_game, list_builtins, render_catalog, CatalogEntry};
pub use config::{
    read_game_file, unit_mass_structure, Dynamics, Experiment, ExperimentConfig, GameData,
    GameSpec, KernelSpec, NoiseSpec, Params, Resolved, SigmaSpec,
};
pub use runner::{execute, Artifacts};

use crate::analysis::report::config_hash;
use crate::error::Error;

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub runs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    Io,
    ConfigError,
    NumericalFailure,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::Io => 1,
            Status::ConfigError => 2,
            Status::NumericalFailure => 3,
        }
    }
}

/// Result of [`run`]: the exit status, a diagnostic line, and the files written.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub status: Status,
    pub message: String,
    pub out_dir: Option<PathBuf>,
    pub written: Vec<PathBuf>,
}

impl RunReport {
    fn failed(status: Status, message: String) -> Self {
        Self {
            status,
            message,
            out_dir: None,
            written: Vec::new(),
        }
    }
}

fn status_of(e: &Error) -> Status {
    match e {
        Error::NumericalFailure { .. } | Error::MirrorNoConvergence { .. } => {
            Status::NumericalFailure
        }
        Error::Io(_) => Status::Io,
        _ => Status::ConfigError,
    }
}

/// Loads, validates and runs the experiment in `path`.
pub fn run(path: &Path, overrides: &Overrides) -> RunReport {
    let (mut cfg, bytes) = match ExperimentConfig::load(path) {
        Ok(v) => v,
        Err(e) => return RunReport::failed(Status::ConfigError, e.to_string()),
    };
    if let Some(seed) = overrides.seed {
        if let Some(sim) = cfg.sim.as_mut() {
            sim.seed = seed;
        }
    }
    if let Some(runs) = overrides.runs {
        cfg.runs = runs;
    }
    let resolved = match cfg.resolve() {
        Ok(r) => r,
        Err(e) => return RunReport::failed(Status::ConfigError, e.to_string()),
    };
    let artifacts = match execute(&cfg, &resolved, &config_hash(&bytes)) {
        Ok(a) => a,
        Err(e) => return RunReport::failed(status_of(&e), e.to_string()),
    };
    let out_dir = overrides
        .out_dir
        .clone()
        .unwrap_or_else(|| cfg.out_dir.clone());
    let mut written = Vec::new();
    let write = |written: &mut Vec<PathBuf>| -> std::io::Result<()> {
        std::fs::create_dir_all(&out_dir)?;
        for (name, data) in &artifacts.files {
            let p = out_dir.join(name);
            std::fs::write(&p, data)?;
            written.push(p);
        }
        Ok(())
    };
    if let Err(e) = write(&mut written) {
        return RunReport {
            status: Status::Io,
            message: format!("{}: {e}", out_dir.display()),
            out_dir: Some(out_dir),
            written,
        };
    }
    let (status, message) = match &artifacts.failure {
        Some(f) => (Status::NumericalFailure, format!("numerical failure: {f}")),
        None => (
            Status::Success,
            format!("wrote {} file(s) to {}", written.len(), out_dir.display()),
        ),
    };
    RunReport {
        status,
        message,
        out_dir: Some(out_dir),
        written,
    }
}
