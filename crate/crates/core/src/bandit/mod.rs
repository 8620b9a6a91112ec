//! WeightedOFUL+ and its two baselines for heterogeneous linear bandits.
//!
//! All three learners share the weighted ridge estimator and select arms by
//! `⟨a, θ̂_k⟩ + β̂_k·‖a‖_{Σ̂_k⁻¹}`. They differ in the per-round weight σ̄_k
//! and the radius β̂_k:
//!
//! | algorithm            | σ̄_k                                   | β̂_k                      |
//! |----------------------|----------------------------------------|--------------------------|
//! | `weighted-oful-plus` | `max{σ_k, α, γ·‖a_k‖_{Σ̂_k⁻¹}^{1/2}}`   | [`bandit_radius`]        |
//! | `weighted-oful`      | `max{σ_k, α}`                          | [`weighted_oful_radius`] |
//! | `oful`               | `1`                                    | [`oful_radius`]          |
//!
//! In round 1 every learner uses `β̂_1 = √λ·B`.

mod env;

pub use env::{ArmSource, BanditEnv, VarianceProfile};

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::confidence::{bandit_radius, oful_radius, weighted_oful_radius, RadiusParams};
use crate::error::{check_len, domain, Result};
use crate::regression::RegressorState;
use crate::trace::{RegretTrace, Setting};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BanditAlgorithm {
    #[serde(rename = "weighted-oful-plus")]
    WeightedOfulPlus,
    #[serde(rename = "weighted-oful")]
    WeightedOful,
    #[serde(rename = "oful")]
    Oful,
}

impl BanditAlgorithm {
    pub const ALL: [BanditAlgorithm; 3] = [
        BanditAlgorithm::WeightedOfulPlus,
        BanditAlgorithm::WeightedOful,
        BanditAlgorithm::Oful,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BanditAlgorithm::WeightedOfulPlus => "weighted-oful-plus",
            BanditAlgorithm::WeightedOful => "weighted-oful",
            BanditAlgorithm::Oful => "oful",
        }
    }
}

impl fmt::Display for BanditAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BanditAlgorithm {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        BanditAlgorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| domain(format!("unknown bandit algorithm '{s}'")))
    }
}

/// Learner state: estimator, hyperparameters and round counter.
#[derive(Debug, Clone)]
pub struct BanditLearner {
    algorithm: BanditAlgorithm,
    regressor: RegressorState,
    params: RadiusParams,
    round: u64,
}

impl BanditLearner {
    pub fn new(algorithm: BanditAlgorithm, params: RadiusParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            algorithm,
            regressor: RegressorState::new(params.d, params.lambda)?,
            params,
            round: 0,
        })
    }

    pub fn algorithm(&self) -> BanditAlgorithm {
        self.algorithm
    }

    pub fn regressor(&self) -> &RegressorState {
        &self.regressor
    }

    pub fn params(&self) -> &RadiusParams {
        &self.params
    }

    /// Number of completed rounds; the current round is `rounds() + 1`.
    pub fn rounds(&self) -> u64 {
        self.round
    }

    /// β̂_k for the current round.
    pub fn radius(&self) -> f64 {
        let k = self.round + 1;
        if k == 1 {
            return self.params.lambda.sqrt() * self.params.b;
        }
        let r = match self.algorithm {
            BanditAlgorithm::WeightedOfulPlus => bandit_radius(k, &self.params),
            BanditAlgorithm::WeightedOful => weighted_oful_radius(k, &self.params),
            BanditAlgorithm::Oful => oful_radius(k, &self.params),
        };
        // params were validated at construction and k ≥ 1.
        r.expect("validated radius parameters")
    }

    /// Upper confidence bound of every arm under the current estimate.
    pub fn scores(&self, arms: &[DVector<f64>]) -> Result<Vec<f64>> {
        let beta = self.radius();
        arms.iter()
            .map(|a| {
                let width = self.regressor.mahalanobis_inv(a)?;
                Ok(a.dot(self.regressor.estimate()) + beta * width)
            })
            .collect()
    }

    /// Index of the arm with the largest UCB, lowest index on ties.
    pub fn select_arm(&self, arms: &[DVector<f64>]) -> Result<usize> {
        if arms.is_empty() {
            return Err(domain("cannot select from an empty decision set"));
        }
        Ok(argmax(&self.scores(arms)?))
    }

    /// σ̄_k for `arm` given the revealed variance bound `sigma`.
    pub fn weight(&self, arm: &DVector<f64>, sigma: f64) -> Result<f64> {
        if !(sigma >= 0.0) {
            return Err(domain(format!(
                "variance bound sigma must be nonnegative, got {sigma}"
            )));
        }
        check_len("arm", self.params.d, arm.len())?;
        let p = &self.params;
        Ok(match self.algorithm {
            BanditAlgorithm::WeightedOfulPlus => {
                let u = self.regressor.mahalanobis_inv(arm)?;
                sigma.max(p.alpha).max(p.gamma * u.sqrt())
            }
            BanditAlgorithm::WeightedOful => sigma.max(p.alpha),
            BanditAlgorithm::Oful => 1.0,
        })
    }

    /// Absorbs the round's outcome and returns the weight σ̄_k used.
    pub fn observe(&mut self, arm: &DVector<f64>, reward: f64, sigma: f64) -> Result<f64> {
        let sigma_bar = self.weight(arm, sigma)?;
        self.regressor.update(arm, reward, sigma_bar)?;
        self.round += 1;
        Ok(sigma_bar)
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// What to record alongside the regret columns.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BanditRunOptions {
    /// Adds `sigma_bar`, `beta` and `ellipsoid_norm` (‖θ̂_k − θ*‖_{Σ̂_k},
    /// measured before the round's update) diagnostic columns.
    pub diagnostics: bool,
}

/// Runs `rounds` rounds of `algorithm` on `env`. Noise comes from a ChaCha
/// stream seeded with `seed`, so the trace is a pure function of the inputs.
pub fn run_bandit(
    env: &BanditEnv,
    algorithm: BanditAlgorithm,
    rounds: u64,
    params: &RadiusParams,
    seed: u64,
    options: BanditRunOptions,
) -> Result<RegretTrace> {
    check_len("theta_star", params.d, env.dim())?;
    let mut learner = BanditLearner::new(algorithm, *params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trace = RegretTrace::new(Setting::Bandit, algorithm.as_str(), seed);
    let cap = if options.diagnostics {
        rounds as usize
    } else {
        0
    };
    let mut sigma_bars = Vec::with_capacity(cap);
    let mut betas = Vec::with_capacity(cap);
    let mut ellipsoid = Vec::with_capacity(cap);

    for k in 1..=rounds {
        let arms = env.arms(k);
        let chosen = learner.select_arm(&arms)?;
        if options.diagnostics {
            let err = learner.regressor().estimate() - env.theta_star();
            ellipsoid.push(learner.regressor().mahalanobis(&err)?);
            betas.push(learner.radius());
        }
        let means: Vec<f64> = arms.iter().map(|a| env.mean_reward(a)).collect();
        let best = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        trace.push(best - means[chosen]);

        let sigma = env.sigma(k);
        let reward = means[chosen] + env.sample_noise(k, &mut rng);
        let sb = learner.observe(&arms[chosen], reward, sigma)?;
        if options.diagnostics {
            sigma_bars.push(sb);
        }
    }
    if options.diagnostics {
        trace.add_diagnostic("sigma_bar", sigma_bars);
        trace.add_diagnostic("beta", betas);
        trace.add_diagnostic("ellipsoid_norm", ellipsoid);
    }
    Ok(trace)
}
