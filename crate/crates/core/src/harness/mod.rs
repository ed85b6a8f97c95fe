//! Experiment configs, the runner, and report emission.
//!
//! Each run writes `report.csv`, `manifest.toml`, `config.toml` (the
//! canonical config) and one SVG per fit into its output directory under
//! the output root (`$DEGOT_OUT`, default `out`).

mod config;
mod experiments;
mod plot;
mod report;

pub use config::{
    emit_config, parse_config, EpsilonConfig, ExperimentConfig, ExperimentKind, GridConfig, SolverKind,
};
pub use experiments::{chain_exponent, grushin_kernel_is_exact, grushin_solver_order, run_experiment, Outcome};
pub use plot::{loglog_svg, Series};
pub use report::{fmt_float, manifest, summarize_csv, to_csv, Basis, Check, CsvSummary, ReportRow, CSV_HEADER};

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::error::{Error, Result};

pub const OUTPUT_ENV: &str = "DEGOT_OUT";

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"))
}

/// Summary of one finished run.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub rows: usize,
    pub asserted: usize,
    pub failed: Vec<String>,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.failed.is_empty()
    }
}

fn summary(dir: PathBuf, rows: &[ReportRow]) -> RunSummary {
    RunSummary {
        dir,
        rows: rows.len(),
        asserted: rows.iter().filter(|r| r.pass().is_some()).count(),
        failed: rows.iter().filter(|r| r.pass() == Some(false)).map(|r| r.metric.clone()).collect(),
    }
}

pub fn write_outcome(cfg: &ExperimentConfig, outcome: &Outcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.csv"), to_csv(&outcome.rows))?;
    std::fs::write(dir.join("manifest.toml"), manifest(cfg.experiment.name(), &cfg.params(), &outcome.rows))?;
    std::fs::write(dir.join("config.toml"), emit_config(cfg)?)?;
    for (name, svg) in &outcome.plots {
        std::fs::write(dir.join(name), svg)?;
    }
    Ok(())
}

/// Runs `cfg` and writes its artifacts under `root`.
pub fn run_to_dir(cfg: &ExperimentConfig, root: &Path) -> Result<RunSummary> {
    let dir = root.join(cfg.output_dir());
    let outcome = run_experiment(cfg);
    write_outcome(cfg, &outcome, &dir)?;
    Ok(summary(dir, &outcome.rows))
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

/// Config files (`*.toml`) in `dir`, sorted by name.
pub fn config_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    Ok(files)
}

/// Runs every config in `dir` as an independent job. Runs sharing an output
/// directory are written one at a time; their artifacts overwrite each
/// other in file-name order.
pub fn run_suite(dir: &Path, root: &Path) -> Result<Vec<(PathBuf, Result<RunSummary>)>> {
    let files = config_files(dir)?;
    if files.is_empty() {
        return Err(Error::invalid(format!("no .toml configs in {}", dir.display())));
    }
    let configs: Vec<(PathBuf, Result<ExperimentConfig>)> =
        files.into_iter().map(|p| { let c = load_config(&p); (p, c) }).collect();
    let mut locks: HashMap<PathBuf, Arc<Mutex<()>>> = HashMap::new();
    for (_, c) in &configs {
        if let Ok(c) = c {
            locks.entry(root.join(c.output_dir())).or_default();
        }
    }
    let out = configs
        .into_par_iter()
        .map(|(path, cfg)| {
            let res = cfg.and_then(|cfg| {
                let dir = root.join(cfg.output_dir());
                let outcome = run_experiment(&cfg);
                let lock = locks[&dir].clone();
                let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
                write_outcome(&cfg, &outcome, &dir)?;
                Ok(summary(dir, &outcome.rows))
            });
            (path, res)
        })
        .collect();
    Ok(out)
}

/// Reads every `report.csv` below `dir`.
pub fn collect_reports(dir: &Path) -> Result<Vec<(PathBuf, CsvSummary)>> {
    let mut found = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d)? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n == "report.csv") {
                let text = std::fs::read_to_string(&p)?;
                let s = summarize_csv(&text)
                    .ok_or_else(|| Error::invalid(format!("{} is not a report", p.display())))?;
                found.push((p, s));
            }
        }
    }
    found.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(found)
}
