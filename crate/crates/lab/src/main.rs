use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use vtr_core::mdp::{make_hard_instance, MdpFile};
use vtr_lab::error::LabError;
use vtr_lab::{load_experiment, run_to_dir};

#[derive(Parser)]
#[command(
    name = "vtr-lab",
    version,
    about = "Run variance-aware bandit and linear mixture MDP experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (algorithm, seed) cell of a config.
    Run {
        config: PathBuf,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Also write regret.svg.
        #[arg(long)]
        plot: bool,
        /// Output directory, overriding the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Write the hypercube-action lower-bound instance as JSON.
    HardInstance {
        #[arg(long = "d")]
        d: usize,
        #[arg(long = "K")]
        episodes: u64,
        #[arg(long = "H")]
        horizon: usize,
        #[arg(long = "B")]
        b: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<(), LabError> {
    match cli.command {
        Command::Run {
            config,
            jobs,
            plot,
            out,
        } => {
            let exp = load_experiment(&config)?;
            let dir = out.unwrap_or_else(|| exp.config.output_dir.clone());
            let (written, outcome) = run_to_dir(&exp, &dir, jobs, plot)?;
            for a in &outcome.summary.algorithms {
                for &k in &outcome.summary.checkpoints {
                    let i = k as usize - 1;
                    println!(
                        "{:<28} k={:<8} regret {:.4} ± {:.4} ({} seeds)",
                        a.algorithm, k, a.mean[i], a.std_error[i], a.seeds
                    );
                }
            }
            for p in written {
                println!("wrote {}", p.display());
            }
        }
        Command::Validate { config } => {
            let exp = load_experiment(&config)?;
            let cells = exp.algorithms.len() * exp.config.seeds.len();
            println!(
                "{}",
                json!({ "ok": true, "setting": exp.config.setting.as_str(), "cells": cells })
            );
        }
        Command::HardInstance {
            d,
            episodes,
            horizon,
            b,
            out,
            seed,
        } => {
            let hi = make_hard_instance(d, episodes, horizon, b, seed)?;
            let mut file = MdpFile::from_mdp(&hi.mdp);
            file.metadata = BTreeMap::from([
                ("generator".to_string(), json!("hard_instance")),
                ("K".to_string(), json!(episodes)),
                ("B".to_string(), json!(b)),
                ("seed".to_string(), json!(seed)),
                ("gap".to_string(), json!(hi.gap)),
                ("base_probability".to_string(), json!(hi.base_probability)),
                ("mu".to_string(), json!(hi.mu)),
                ("actions".to_string(), json!(hi.actions)),
            ]);
            let text = serde_json::to_string_pretty(&file).map_err(|source| LabError::Json {
                path: out.clone(),
                source,
            })?;
            fs::write(&out, text + "\n").map_err(|source| LabError::Io {
                path: out.clone(),
                source,
            })?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::FAILURE
        }
    }
}
