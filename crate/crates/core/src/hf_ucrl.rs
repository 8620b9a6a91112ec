//! HF-UCRL-VTR+: optimistic planning on the committed level-0 estimate plus
//! per-level weighted regression on powers of the planned value function,
//! with weights from the high-order moment estimator (HOME).

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::confidence::{mdp_defaults, mdp_radius, RadiusParams};
use crate::error::{check_len, domain, Error, Result};
use crate::mdp::{LinearMixtureMdp, Policy, QTable, Step, ValueTable};
use crate::regression::RegressorState;
use crate::trace::{RegretTrace, Setting};

/// Slack when comparing the planned value against `V*`.
pub const OPTIMISM_TOL: f64 = 1e-12;

fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Which precision matrix feeds the `γ²‖φ‖` term of the HOME weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightCovariance {
    /// The within-episode precision that also receives this step's update.
    #[default]
    WithinEpisode,
    /// The precision committed at the start of the episode.
    Committed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HfUcrlConfig {
    pub params: RadiusParams,
    /// Number of moment levels `M`.
    pub levels: usize,
    #[serde(default)]
    pub weight_covariance: WeightCovariance,
}

impl HfUcrlConfig {
    /// Default parameters for `K` episodes on a `d`-dimensional instance with
    /// horizon `H`.
    pub fn defaults(episodes: u64, horizon: u64, d: usize, b: f64, delta: f64) -> Result<Self> {
        let def = mdp_defaults(episodes, horizon, d, b, delta)?;
        Ok(Self {
            params: def.params,
            levels: def.levels,
            weight_covariance: WeightCovariance::WithinEpisode,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.levels == 0 {
            return Err(domain("number of moment levels M must be at least 1"));
        }
        if self.levels > 62 {
            return Err(domain(format!(
                "number of moment levels M = {} is too large",
                self.levels
            )));
        }
        Ok(())
    }
}

/// Optimistic Q, V and the greedy policy for one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimisticPlan {
    pub q: QTable,
    pub v: ValueTable,
    pub policy: Policy,
}

/// Backward optimistic planning:
/// `Q_h(s,a) = [r(s,a) + ⟨estimate, φ_{V_{h+1}}⟩ + β‖φ_{V_{h+1}}‖_{Σ⁻¹}]_{[0,1]}`
/// with `Σ` the precision of `covariance`.
pub fn plan_with(
    mdp: &LinearMixtureMdp,
    estimate: &DVector<f64>,
    covariance: &RegressorState,
    beta: f64,
) -> Result<OptimisticPlan> {
    check_len("estimate", mdp.dim(), estimate.len())?;
    check_len("covariance", mdp.dim(), covariance.dim())?;
    if !(beta >= 0.0) {
        return Err(domain(format!("radius must be nonnegative, got {beta}")));
    }
    let (h_max, ns, na) = (mdp.horizon(), mdp.num_states(), mdp.num_actions());
    let mut v = vec![vec![0.0; ns]; h_max + 1];
    let mut q = vec![vec![vec![0.0; na]; ns]; h_max];
    for h in (0..h_max).rev() {
        for s in 0..ns {
            for a in 0..na {
                let phi = mdp.phi_v(s, a, &v[h + 1]);
                let bonus = if beta == 0.0 {
                    0.0
                } else {
                    beta * covariance.mahalanobis_inv_unchecked(&phi)
                };
                q[h][s][a] = clamp01(mdp.reward(s, a) + phi.dot(estimate) + bonus);
            }
            v[h][s] = q[h][s].iter().copied().fold(0.0, f64::max);
        }
    }
    let policy = Policy::greedy(&q);
    Ok(OptimisticPlan {
        q,
        v: ValueTable { values: v },
        policy,
    })
}

/// `[v, v², v⁴, …, v^{2^{levels−1}}]` by repeated squaring.
pub fn value_powers(v: &[f64], levels: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(levels);
    if levels == 0 {
        return out;
    }
    out.push(v.to_vec());
    for m in 1..levels {
        let sq = out[m - 1].iter().map(|x| x * x).collect();
        out.push(sq);
    }
    out
}

/// HOME output for one step. `estimates` and `widths` cover levels
/// `0..M−1`; the top level has neither.
#[derive(Debug, Clone, PartialEq)]
pub struct HomeWeights {
    pub sigma_bar_sq: Vec<f64>,
    pub estimates: Vec<f64>,
    pub widths: Vec<f64>,
}

impl HomeWeights {
    pub fn sigma_bar(&self, m: usize) -> f64 {
        self.sigma_bar_sq[m].sqrt()
    }
}

/// Everything absorbed by one [`HomeState::step_update`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// `V_{h+1}^{2^m}` for every level.
    pub powers: Vec<Vec<f64>>,
    /// `φ_{V_{h+1}^{2^m}}(s_h, a_h)`.
    pub features: Vec<DVector<f64>>,
    /// `V_{h+1}^{2^m}(s_{h+1})`.
    pub responses: Vec<f64>,
    pub weights: HomeWeights,
}

/// Per-level regressors: committed ones frozen for the episode, and
/// within-episode ones that absorb every step.
#[derive(Debug, Clone)]
pub struct HomeState {
    config: HfUcrlConfig,
    horizon: u64,
    committed: Vec<RegressorState>,
    within: Vec<RegressorState>,
    episode: u64,
    beta: f64,
}

impl HomeState {
    /// Fresh state at episode 1.
    pub fn new(config: HfUcrlConfig, horizon: u64) -> Result<Self> {
        config.validate()?;
        if horizon == 0 {
            return Err(domain("horizon H must be at least 1"));
        }
        let fresh = RegressorState::new(config.params.d, config.params.lambda)?;
        let committed = vec![fresh; config.levels];
        let within = committed.clone();
        let mut state = Self {
            config,
            horizon,
            committed,
            within,
            episode: 1,
            beta: 0.0,
        };
        state.beta = state.radius_at(1)?;
        Ok(state)
    }

    /// Builds a state from explicit regressors, e.g. to evaluate HOME at a
    /// hand-picked point.
    pub fn from_parts(
        config: HfUcrlConfig,
        horizon: u64,
        committed: Vec<RegressorState>,
        within: Vec<RegressorState>,
        episode: u64,
        beta: f64,
    ) -> Result<Self> {
        config.validate()?;
        check_len("committed regressors", config.levels, committed.len())?;
        check_len("within-episode regressors", config.levels, within.len())?;
        for r in committed.iter().chain(&within) {
            check_len("regressor", config.params.d, r.dim())?;
        }
        if episode == 0 || !(beta >= 0.0) {
            return Err(domain("episode must be ≥ 1 and radius nonnegative"));
        }
        Ok(Self {
            config,
            horizon,
            committed,
            within,
            episode,
            beta,
        })
    }

    fn radius_at(&self, k: u64) -> Result<f64> {
        let p = &self.config.params;
        if k == 1 {
            Ok(p.lambda.sqrt() * p.b)
        } else {
            mdp_radius(k, self.horizon, p)
        }
    }

    pub fn config(&self) -> &HfUcrlConfig {
        &self.config
    }

    pub fn levels(&self) -> usize {
        self.config.levels
    }

    /// Current (1-based) episode.
    pub fn episode(&self) -> u64 {
        self.episode
    }

    /// β̂ for the current episode.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn committed(&self, m: usize) -> &RegressorState {
        &self.committed[m]
    }

    pub fn within(&self, m: usize) -> &RegressorState {
        &self.within[m]
    }

    /// Optimistic plan from the committed level-0 regressor.
    pub fn plan(&self, mdp: &LinearMixtureMdp) -> Result<OptimisticPlan> {
        let base = &self.committed[0];
        plan_with(mdp, base.estimate(), base, self.beta)
    }

    /// HOME weights for the per-level features `φ_{V^{2^m}}(s,a)`.
    pub fn home_weights(&self, features: &[DVector<f64>]) -> Result<HomeWeights> {
        let levels = self.config.levels;
        check_len("level features", levels, features.len())?;
        for f in features {
            check_len("level feature", self.config.params.d, f.len())?;
        }
        let p = &self.config.params;
        let beta = self.beta;
        let alpha_sq = p.alpha * p.alpha;
        let gamma_sq = p.gamma * p.gamma;
        let mut sigma_bar_sq = Vec::with_capacity(levels);
        let mut estimates = Vec::with_capacity(levels.saturating_sub(1));
        let mut widths = Vec::with_capacity(levels.saturating_sub(1));

        for m in 0..levels {
            let phi = &features[m];
            let uncertainty = match self.config.weight_covariance {
                WeightCovariance::WithinEpisode => self.within[m].mahalanobis_inv_unchecked(phi),
                WeightCovariance::Committed => self.committed[m].mahalanobis_inv_unchecked(phi),
            };
            let floor = alpha_sq.max(gamma_sq * uncertainty);
            if m + 1 < levels {
                let next = &features[m + 1];
                let second = clamp01(next.dot(self.committed[m + 1].estimate()));
                let first = clamp01(phi.dot(self.committed[m].estimate()));
                let estimate = second - first * first;
                let width = (2.0 * beta * self.committed[m].mahalanobis_inv_unchecked(phi))
                    .min(1.0)
                    + (beta * self.committed[m + 1].mahalanobis_inv_unchecked(next)).min(1.0);
                sigma_bar_sq.push((estimate + width).max(floor));
                estimates.push(estimate);
                widths.push(width);
            } else {
                sigma_bar_sq.push(floor.max(1.0));
            }
        }
        Ok(HomeWeights {
            sigma_bar_sq,
            estimates,
            widths,
        })
    }

    /// Absorbs one transition into every within-episode regressor.
    /// `next_values` is the plan's `V_{h+1}`.
    pub fn step_update(
        &mut self,
        mdp: &LinearMixtureMdp,
        step: &Step,
        next_values: &[f64],
    ) -> Result<StepRecord> {
        check_len("next-stage values", mdp.num_states(), next_values.len())?;
        let powers = value_powers(next_values, self.config.levels);
        let features: Vec<DVector<f64>> = powers
            .iter()
            .map(|p| mdp.phi_v(step.state, step.action, p))
            .collect();
        let responses: Vec<f64> = powers.iter().map(|p| p[step.next_state]).collect();
        let weights = self.home_weights(&features)?;
        for m in 0..self.config.levels {
            self.within[m].update(&features[m], responses[m], weights.sigma_bar(m))?;
        }
        Ok(StepRecord {
            powers,
            features,
            responses,
            weights,
        })
    }

    /// Ends the episode: the within-episode regressors become the committed
    /// ones and β̂ moves to the next episode.
    pub fn episode_commit(&mut self) -> Result<()> {
        self.committed.clone_from(&self.within);
        self.episode += 1;
        self.beta = self.radius_at(self.episode)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MdpAlgorithm {
    #[serde(rename = "hf-ucrl-vtr-plus")]
    HfUcrlVtrPlus,
    /// HF-UCRL-VTR+ with the committed precision in the HOME `γ` term.
    #[serde(rename = "hf-ucrl-vtr-plus-committed")]
    HfUcrlVtrPlusCommitted,
    #[serde(rename = "uniform-random")]
    UniformRandom,
}

impl MdpAlgorithm {
    pub const ALL: [MdpAlgorithm; 3] = [
        MdpAlgorithm::HfUcrlVtrPlus,
        MdpAlgorithm::HfUcrlVtrPlusCommitted,
        MdpAlgorithm::UniformRandom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MdpAlgorithm::HfUcrlVtrPlus => "hf-ucrl-vtr-plus",
            MdpAlgorithm::HfUcrlVtrPlusCommitted => "hf-ucrl-vtr-plus-committed",
            MdpAlgorithm::UniformRandom => "uniform-random",
        }
    }
}

impl fmt::Display for MdpAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MdpAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| domain(format!("unknown MDP algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MdpRunOptions {
    /// Record per-episode diagnostics: `planned_value`, `optimal_value`,
    /// `optimistic`, `beta`, `sandwich_checks`, `sandwich_violations` and
    /// `max_variance_error`.
    pub diagnostics: bool,
}

/// Runs HF-UCRL-VTR+ for `episodes` episodes. Per-episode regret is the
/// exact `V₁*(s₁) − V₁^{π_k}(s₁)`; `seed` drives the sampled transitions.
pub fn run_episodes(
    mdp: &LinearMixtureMdp,
    episodes: u64,
    config: &HfUcrlConfig,
    seed: u64,
    options: MdpRunOptions,
) -> Result<RegretTrace> {
    check_len("parameter dimension", mdp.dim(), config.params.d)?;
    let algorithm = match config.weight_covariance {
        WeightCovariance::WithinEpisode => MdpAlgorithm::HfUcrlVtrPlus,
        WeightCovariance::Committed => MdpAlgorithm::HfUcrlVtrPlusCommitted,
    };
    let mut home = HomeState::new(*config, mdp.horizon() as u64)?;
    let (optimal, _) = mdp.value_iteration();
    let s1 = mdp.initial_state();
    let v_star = optimal.stage(1)[s1];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trace = RegretTrace::new(Setting::Mdp, algorithm.as_str(), seed);

    let cap = if options.diagnostics {
        episodes as usize
    } else {
        0
    };
    let mut planned = Vec::with_capacity(cap);
    let mut optimistic = Vec::with_capacity(cap);
    let mut betas = Vec::with_capacity(cap);
    let mut checks = Vec::with_capacity(cap);
    let mut violations = Vec::with_capacity(cap);
    let mut max_errors = Vec::with_capacity(cap);

    for _ in 0..episodes {
        let plan = home.plan(mdp)?;
        let achieved = mdp.policy_value(&plan.policy).stage(1)[s1];
        trace.push((v_star - achieved).max(0.0));

        let mut n_checks = 0u64;
        let mut n_violations = 0u64;
        let mut max_err: f64 = 0.0;
        for (h, step) in mdp
            .sample_episode(&plan.policy, &mut rng)
            .iter()
            .enumerate()
        {
            let record = home.step_update(mdp, step, plan.v.stage(h + 2))?;
            if options.diagnostics {
                for (m, (&est, &width)) in record
                    .weights
                    .estimates
                    .iter()
                    .zip(&record.weights.widths)
                    .enumerate()
                {
                    let truth =
                        mdp.conditional_variance(step.state, step.action, &record.powers[m]);
                    let err = (est - truth).abs();
                    n_checks += 1;
                    if err > width {
                        n_violations += 1;
                    }
                    max_err = max_err.max(err);
                }
            }
        }
        if options.diagnostics {
            let value = plan.v.stage(1)[s1];
            planned.push(value);
            optimistic.push(if value >= v_star - OPTIMISM_TOL {
                1.0
            } else {
                0.0
            });
            betas.push(home.beta());
            checks.push(n_checks as f64);
            violations.push(n_violations as f64);
            max_errors.push(max_err);
        }
        home.episode_commit()?;
    }

    if options.diagnostics {
        trace.add_diagnostic("planned_value", planned);
        trace.add_diagnostic("optimal_value", vec![v_star; episodes as usize]);
        trace.add_diagnostic("optimistic", optimistic);
        trace.add_diagnostic("beta", betas);
        trace.add_diagnostic("sandwich_checks", checks);
        trace.add_diagnostic("sandwich_violations", violations);
        trace.add_diagnostic("max_variance_error", max_errors);
    }
    Ok(trace)
}

/// Exact regret of the uniformly random policy, the same every episode.
pub fn run_uniform_random(mdp: &LinearMixtureMdp, episodes: u64, seed: u64) -> RegretTrace {
    let s1 = mdp.initial_state();
    let gap = mdp.value_iteration().0.stage(1)[s1] - mdp.uniform_policy_value().stage(1)[s1];
    let mut trace = RegretTrace::new(Setting::Mdp, MdpAlgorithm::UniformRandom.as_str(), seed);
    for _ in 0..episodes {
        trace.push(gap.max(0.0));
    }
    trace
}

/// Dispatches `algorithm`; `config.weight_covariance` is overridden to match
/// the chosen HF-UCRL-VTR+ variant.
pub fn run_mdp(
    mdp: &LinearMixtureMdp,
    algorithm: MdpAlgorithm,
    episodes: u64,
    config: &HfUcrlConfig,
    seed: u64,
    options: MdpRunOptions,
) -> Result<RegretTrace> {
    let mut cfg = *config;
    match algorithm {
        MdpAlgorithm::UniformRandom => return Ok(run_uniform_random(mdp, episodes, seed)),
        MdpAlgorithm::HfUcrlVtrPlus => cfg.weight_covariance = WeightCovariance::WithinEpisode,
        MdpAlgorithm::HfUcrlVtrPlusCommitted => cfg.weight_covariance = WeightCovariance::Committed,
    }
    run_episodes(mdp, episodes, &cfg, seed, options)
}
