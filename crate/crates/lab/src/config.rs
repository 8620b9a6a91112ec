//! Experiment configuration files.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vtr_core::bandit::{BanditAlgorithm, BanditEnv, VarianceProfile};
use vtr_core::confidence::{bandit_defaults, RadiusParams};
use vtr_core::hf_ucrl::{HfUcrlConfig, MdpAlgorithm};
use vtr_core::mdp::{make_hard_instance, make_random_tabular, LinearMixtureMdp, MdpFile};
use vtr_core::Setting;

use crate::error::{io_err, LabError, Result};

pub const DEFAULT_DELTA: f64 = 0.05;
pub const DEFAULT_NUM_ARMS: usize = 32;
pub const DEFAULT_HARD_INSTANCE_B: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub setting: Setting,
    pub environment: EnvironmentSpec,
    pub algorithms: Vec<String>,
    #[serde(rename = "K")]
    pub rounds: u64,
    #[serde(rename = "H", default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub overrides: Overrides,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub diagnostics: bool,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

fn default_num_arms() -> usize {
    DEFAULT_NUM_ARMS
}

fn default_theta_norm() -> f64 {
    1.0
}

fn default_hard_b() -> f64 {
    DEFAULT_HARD_INSTANCE_B
}

/// Environment generator and its parameters. Unless `instance_seed` is
/// given, each run seed draws its own instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvironmentSpec {
    /// Fresh unit-sphere arms every round.
    Sphere {
        d: usize,
        #[serde(default = "default_num_arms")]
        num_arms: usize,
        #[serde(default = "default_theta_norm")]
        theta_norm: f64,
        #[serde(default)]
        variance: VarianceProfile,
        #[serde(default)]
        instance_seed: Option<u64>,
    },
    /// The same unit-sphere arms every round.
    FixedSphere {
        d: usize,
        #[serde(default = "default_num_arms")]
        num_arms: usize,
        #[serde(default = "default_theta_norm")]
        theta_norm: f64,
        #[serde(default)]
        variance: VarianceProfile,
        #[serde(default)]
        instance_seed: Option<u64>,
    },
    HardInstance {
        d: usize,
        #[serde(rename = "B", default = "default_hard_b")]
        b: f64,
        #[serde(default)]
        instance_seed: Option<u64>,
    },
    RandomTabular {
        num_states: usize,
        num_actions: usize,
        #[serde(default)]
        instance_seed: Option<u64>,
    },
    /// An instance file; relative paths resolve against the config's
    /// directory.
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
}

impl Overrides {
    fn apply(&self, p: &mut RadiusParams) {
        if let Some(v) = self.alpha {
            p.alpha = v;
        }
        if let Some(v) = self.gamma {
            p.gamma = v;
        }
        if let Some(v) = self.lambda {
            p.lambda = v;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Bandit(BanditAlgorithm),
    Mdp(MdpAlgorithm),
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Bandit(a) => a.as_str(),
            Algorithm::Mdp(a) => a.as_str(),
        }
    }
}

/// Learner parameters shared by every cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LearnerParams {
    Bandit(RadiusParams),
    Mdp(HfUcrlConfig),
}

/// A validated config ready to run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub algorithms: Vec<Algorithm>,
    pub params: LearnerParams,
    file_mdp: Option<LinearMixtureMdp>,
}

pub enum Environment {
    Bandit(BanditEnv),
    Mdp(LinearMixtureMdp),
}

fn bad(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| LabError::Json {
            path: origin.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json(&text, path)
    }

    /// Checks the config and resolves defaults. `base_dir` anchors relative
    /// instance-file paths.
    pub fn prepare(self, base_dir: &Path) -> Result<Experiment> {
        if self.rounds == 0 {
            return Err(bad("K must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(bad("seeds must be nonempty"));
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return Err(bad("seeds must be distinct"));
        }
        if self.algorithms.is_empty() {
            return Err(bad("algorithms must be nonempty"));
        }
        if self.algorithms.iter().collect::<BTreeSet<_>>().len() != self.algorithms.len() {
            return Err(bad("algorithms must be distinct"));
        }
        let algorithms = self
            .algorithms
            .iter()
            .map(|name| match self.setting {
                Setting::Bandit => name.parse().map(Algorithm::Bandit),
                Setting::Mdp => name.parse().map(Algorithm::Mdp),
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| bad(e.to_string()))?;

        let ov = &self.overrides;
        let delta = ov.delta.unwrap_or(DEFAULT_DELTA);
        let (params, file_mdp) = match (self.setting, &self.environment) {
            (
                Setting::Bandit,
                EnvironmentSpec::Sphere {
                    d,
                    theta_norm,
                    variance,
                    ..
                },
            )
            | (
                Setting::Bandit,
                EnvironmentSpec::FixedSphere {
                    d,
                    theta_norm,
                    variance,
                    ..
                },
            ) => {
                if self.horizon.is_some() {
                    return Err(bad("H applies to the mdp setting only"));
                }
                if ov.m.is_some() {
                    return Err(bad("M applies to the mdp setting only"));
                }
                variance.validate().map_err(|e| bad(e.to_string()))?;
                let b = ov.b.unwrap_or(*theta_norm);
                let r = ov.r.unwrap_or_else(|| {
                    let m = variance.max_sigma(self.rounds);
                    if m > 0.0 {
                        m
                    } else {
                        1.0
                    }
                });
                let mut p = bandit_defaults(self.rounds, *d, b, r, 1.0, delta)
                    .map_err(|e| bad(e.to_string()))?;
                ov.apply(&mut p);
                p.validate().map_err(|e| bad(e.to_string()))?;
                (LearnerParams::Bandit(p), None)
            }
            (Setting::Mdp, generator) => {
                if ov.r.is_some() {
                    return Err(bad("R is fixed to 1 in the mdp setting"));
                }
                let (d, horizon, b, file_mdp) = match generator {
                    EnvironmentSpec::HardInstance { d, b, .. } => {
                        let h = self
                            .horizon
                            .ok_or_else(|| bad("H is required for generated MDPs"))?;
                        make_hard_instance(*d, self.rounds, h, *b, 0)
                            .map_err(|e| bad(e.to_string()))?;
                        (*d, h, ov.b.unwrap_or(*b), None)
                    }
                    EnvironmentSpec::RandomTabular {
                        num_states,
                        num_actions,
                        ..
                    } => {
                        let h = self
                            .horizon
                            .ok_or_else(|| bad("H is required for generated MDPs"))?;
                        let m = make_random_tabular(*num_states, *num_actions, h, 0)
                            .map_err(|e| bad(e.to_string()))?;
                        let bound = *num_states as f64 * (*num_actions as f64).sqrt();
                        (m.dim(), h, ov.b.unwrap_or(bound), None)
                    }
                    EnvironmentSpec::File { path } => {
                        let full = base_dir.join(path);
                        let text = fs::read_to_string(&full).map_err(io_err(&full))?;
                        let file: MdpFile =
                            serde_json::from_str(&text).map_err(|source| LabError::Json {
                                path: full.clone(),
                                source,
                            })?;
                        let m = file
                            .to_mdp()
                            .map_err(|e| bad(format!("{}: {e}", full.display())))?;
                        if let Some(h) = self.horizon {
                            if h != m.horizon() {
                                return Err(bad(format!(
                                    "H = {h} disagrees with the instance file's H = {}",
                                    m.horizon()
                                )));
                            }
                        }
                        let b = ov.b.unwrap_or_else(|| m.parameter_norm());
                        (m.dim(), m.horizon(), b, Some(m))
                    }
                    _ => return Err(bad("bandit environments need setting \"bandit\"")),
                };
                let mut cfg = HfUcrlConfig::defaults(self.rounds, horizon as u64, d, b, delta)
                    .map_err(|e| bad(e.to_string()))?;
                ov.apply(&mut cfg.params);
                if let Some(m) = ov.m {
                    cfg.levels = m;
                }
                cfg.validate().map_err(|e| bad(e.to_string()))?;
                (LearnerParams::Mdp(cfg), file_mdp)
            }
            (Setting::Bandit, _) => return Err(bad("MDP environments need setting \"mdp\"")),
        };

        Ok(Experiment {
            config: self,
            algorithms,
            params,
            file_mdp,
        })
    }
}

/// Seed of the environment instance shared by every algorithm for run
/// seed `seed`.
pub fn instance_seed(seed: u64) -> u64 {
    crate::experiment::splitmix(seed ^ 0x5EED_1A57_A9CE_0000)
}

impl Experiment {
    /// Builds the environment for one run seed.
    pub fn environment(&self, seed: u64) -> vtr_core::Result<Environment> {
        let k = self.config.rounds;
        Ok(match &self.config.environment {
            EnvironmentSpec::Sphere {
                d,
                num_arms,
                theta_norm,
                variance,
                instance_seed: fixed,
            } => Environment::Bandit(BanditEnv::random_sphere(
                *d,
                *num_arms,
                *theta_norm,
                variance.clone(),
                fixed.unwrap_or_else(|| instance_seed(seed)),
            )?),
            EnvironmentSpec::FixedSphere {
                d,
                num_arms,
                theta_norm,
                variance,
                instance_seed: fixed,
            } => Environment::Bandit(BanditEnv::fixed_sphere(
                *d,
                *num_arms,
                *theta_norm,
                variance.clone(),
                fixed.unwrap_or_else(|| instance_seed(seed)),
            )?),
            EnvironmentSpec::HardInstance {
                d,
                b,
                instance_seed: fixed,
            } => {
                let h = self.config.horizon.unwrap_or(1);
                Environment::Mdp(
                    make_hard_instance(*d, k, h, *b, fixed.unwrap_or_else(|| instance_seed(seed)))?
                        .mdp,
                )
            }
            EnvironmentSpec::RandomTabular {
                num_states,
                num_actions,
                instance_seed: fixed,
            } => {
                let h = self.config.horizon.unwrap_or(1);
                Environment::Mdp(make_random_tabular(
                    *num_states,
                    *num_actions,
                    h,
                    fixed.unwrap_or_else(|| instance_seed(seed)),
                )?)
            }
            EnvironmentSpec::File { .. } => Environment::Mdp(
                self.file_mdp
                    .clone()
                    .expect("file instances are loaded during prepare"),
            ),
        })
    }
}
