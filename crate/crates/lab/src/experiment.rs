use rayon::prelude::*;
use vtr_core::bandit::{run_bandit, BanditRunOptions};
use vtr_core::hf_ucrl::{run_mdp, MdpRunOptions};
use vtr_core::{RegretTrace, Setting};

use crate::config::{Algorithm, Environment, Experiment, LearnerParams};
use crate::error::{LabError, Result};

pub fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Random stream for the cell `(algorithm, seed_index)` under root `seed`.
pub fn cell_seed(seed: u64, algorithm: &str, seed_index: usize) -> u64 {
    splitmix(splitmix(seed) ^ fnv1a(algorithm) ^ splitmix(seed_index as u64 ^ 0xA5A5_A5A5))
}

/// Mean cumulative regret and its standard error across seeds, per round.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSummary {
    pub algorithm: String,
    pub seeds: usize,
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub setting: Setting,
    pub rounds: u64,
    pub checkpoints: Vec<u64>,
    pub algorithms: Vec<AlgorithmSummary>,
}

/// `K/4`, `K/2` and `K`, deduplicated and at least 1.
pub fn checkpoints(rounds: u64) -> Vec<u64> {
    let mut c = vec![(rounds / 4).max(1), (rounds / 2).max(1), rounds];
    c.dedup();
    c
}

impl Summary {
    /// Groups traces by algorithm in order of first appearance.
    pub fn from_traces(setting: Setting, rounds: u64, traces: &[RegretTrace]) -> Self {
        let mut names: Vec<&str> = Vec::new();
        for t in traces {
            if !names.contains(&t.algorithm.as_str()) {
                names.push(&t.algorithm);
            }
        }
        let algorithms = names
            .into_iter()
            .map(|name| {
                let group: Vec<&RegretTrace> =
                    traces.iter().filter(|t| t.algorithm == name).collect();
                let n = group.len();
                let len = group.iter().map(|t| t.len()).min().unwrap_or(0);
                let mut mean = Vec::with_capacity(len);
                let mut std_error = Vec::with_capacity(len);
                for k in 0..len {
                    let m = group.iter().map(|t| t.cumulative[k]).sum::<f64>() / n as f64;
                    let se = if n > 1 {
                        let var = group
                            .iter()
                            .map(|t| (t.cumulative[k] - m).powi(2))
                            .sum::<f64>()
                            / (n - 1) as f64;
                        (var / n as f64).sqrt()
                    } else {
                        0.0
                    };
                    mean.push(m);
                    std_error.push(se);
                }
                AlgorithmSummary {
                    algorithm: name.to_string(),
                    seeds: n,
                    mean,
                    std_error,
                }
            })
            .collect();
        Self {
            setting,
            rounds,
            checkpoints: checkpoints(rounds),
            algorithms,
        }
    }
}

pub struct Outcome {
    pub traces: Vec<RegretTrace>,
    pub summary: Summary,
}

fn run_cell(exp: &Experiment, algorithm: Algorithm, seed_index: usize) -> Result<RegretTrace> {
    let seed = exp.config.seeds[seed_index];
    let stream = cell_seed(seed, algorithm.as_str(), seed_index);
    let fail = |source| LabError::Cell {
        algorithm: algorithm.as_str().to_string(),
        seed,
        source,
    };
    let k = exp.config.rounds;
    let diagnostics = exp.config.diagnostics;
    let mut trace = match (exp.environment(seed).map_err(fail)?, algorithm, &exp.params) {
        (Environment::Bandit(env), Algorithm::Bandit(alg), LearnerParams::Bandit(p)) => {
            run_bandit(&env, alg, k, p, stream, BanditRunOptions { diagnostics }).map_err(fail)?
        }
        (Environment::Mdp(mdp), Algorithm::Mdp(alg), LearnerParams::Mdp(c)) => {
            run_mdp(&mdp, alg, k, c, stream, MdpRunOptions { diagnostics }).map_err(fail)?
        }
        _ => unreachable!("prepare pairs settings with matching environments"),
    };
    trace.seed = seed;
    Ok(trace)
}

/// Runs every `(algorithm, seed)` cell on up to `jobs` threads. Traces come
/// back in config order: algorithms outer, seeds inner.
pub fn run_experiment(exp: &Experiment, jobs: usize) -> Result<Outcome> {
    let cells: Vec<(Algorithm, usize)> = exp
        .algorithms
        .iter()
        .flat_map(|&a| (0..exp.config.seeds.len()).map(move |i| (a, i)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| LabError::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<RegretTrace>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(a, i)| run_cell(exp, a, i))
            .collect()
    });
    let traces = results.into_iter().collect::<Result<Vec<_>>>()?;
    let summary = Summary::from_traces(exp.config.setting, exp.config.rounds, &traces);
    Ok(Outcome { traces, summary })
}
