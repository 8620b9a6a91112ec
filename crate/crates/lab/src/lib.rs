//! Experiment runner for the `vtr-core` learners: JSON configs in, CSV
//! regret traces, checkpoint summaries and SVG plots out.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;

use std::fs;
use std::path::{Path, PathBuf};

pub use config::{Experiment, ExperimentConfig};
pub use error::{LabError, Result};
pub use experiment::{run_experiment, Outcome, Summary};

use error::io_err;

pub const TRACES_FILE: &str = "traces.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const PLOT_FILE: &str = "regret.svg";

/// Loads and validates the config at `path`.
pub fn load_experiment(path: &Path) -> Result<Experiment> {
    let base = path.parent().unwrap_or(Path::new("."));
    ExperimentConfig::load(path)?.prepare(base)
}

/// Runs `exp` and writes its outputs under `out_dir`. Returns the written
/// paths and the outcome.
pub fn run_to_dir(
    exp: &Experiment,
    out_dir: &Path,
    jobs: usize,
    plot: bool,
) -> Result<(Vec<PathBuf>, Outcome)> {
    let outcome = run_experiment(exp, jobs)?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut written = vec![out_dir.join(TRACES_FILE), out_dir.join(SUMMARY_FILE)];
    output::write_csv(&outcome.traces, &written[0])?;
    output::write_summary_csv(&outcome.summary, &written[1])?;
    if plot {
        let p = out_dir.join(PLOT_FILE);
        output::emit_plot(&outcome.summary, &p)?;
        written.push(p);
    }
    Ok((written, outcome))
}
