//! Confidence radii for the weighted ridge estimators and the default
//! hyperparameters that go with them.
//!
//! All logarithms are natural except the level count, which uses log₂.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Scalars feeding the confidence radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusParams {
    /// Feature dimension.
    pub d: usize,
    /// Variance floor.
    pub alpha: f64,
    /// Uncertainty-weight coefficient.
    pub gamma: f64,
    /// Ridge regularizer.
    pub lambda: f64,
    /// Upper bound on the parameter norm.
    pub b: f64,
    /// Noise magnitude bound.
    pub r: f64,
    /// Failure probability.
    pub delta: f64,
    /// Upper bound on arm norms (bandits only).
    pub norm_bound: f64,
}

impl RadiusParams {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(domain("dimension d must be at least 1"));
        }
        let positive = [
            ("alpha", self.alpha),
            ("gamma", self.gamma),
            ("lambda", self.lambda),
            ("B", self.b),
            ("R", self.r),
            ("delta", self.delta),
            ("norm_bound", self.norm_bound),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(domain(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.delta >= 1.0 {
            return Err(domain(format!("delta must be below 1, got {}", self.delta)));
        }
        if self.gamma * self.gamma / self.alpha < 1.0 {
            return Err(domain(format!(
                "gamma^2/alpha must be at least 1 (gamma={}, alpha={})",
                self.gamma, self.alpha
            )));
        }
        Ok(())
    }

    fn level_log(&self, k: u64, extra: f64) -> f64 {
        let kf = k as f64;
        (32.0 * ((self.gamma * self.gamma / self.alpha).ln() + 1.0) * kf * kf * extra / self.delta)
            .ln()
    }
}

fn check_round(k: u64) -> Result<()> {
    if k == 0 {
        return Err(domain("round index k must be at least 1"));
    }
    Ok(())
}

/// Bandit radius β̂_k for WeightedOFUL+:
///
/// `12√(d·log(1+kA²/(α²dλ))·L) + 30·L·R/γ² + √λ·B`, with
/// `L = log(32(log(γ²/α)+1)k²/δ)`.
pub fn bandit_radius(k: u64, p: &RadiusParams) -> Result<f64> {
    p.validate()?;
    check_round(k)?;
    let d = p.d as f64;
    let kf = k as f64;
    let info = (1.0 + kf * p.norm_bound * p.norm_bound / (p.alpha * p.alpha * d * p.lambda)).ln();
    let l = p.level_log(k, 1.0);
    Ok(12.0 * (d * info * l).sqrt() + 30.0 * l * p.r / (p.gamma * p.gamma) + p.lambda.sqrt() * p.b)
}

/// MDP radius β̂_k for HF-UCRL-VTR+. The noise bound is fixed at 1, `kH`
/// replaces `kA²` in the information term and `k²H²` replaces `k²` in the
/// log term. `p.r` and `p.norm_bound` are ignored.
pub fn mdp_radius(k: u64, horizon: u64, p: &RadiusParams) -> Result<f64> {
    p.validate()?;
    check_round(k)?;
    if horizon == 0 {
        return Err(domain("horizon H must be at least 1"));
    }
    let d = p.d as f64;
    let kf = k as f64;
    let hf = horizon as f64;
    let info = (1.0 + kf * hf / (p.alpha * p.alpha * d * p.lambda)).ln();
    let l = p.level_log(k, hf * hf);
    Ok(12.0 * (d * info * l).sqrt() + 30.0 * l / (p.gamma * p.gamma) + p.lambda.sqrt() * p.b)
}

/// Radius for the variance-only WeightedOFUL baseline (`σ̄ = max{σ, α}`):
/// the bandit radius with the `R/γ²` term replaced by `R/α`.
pub fn weighted_oful_radius(k: u64, p: &RadiusParams) -> Result<f64> {
    p.validate()?;
    check_round(k)?;
    let d = p.d as f64;
    let kf = k as f64;
    let info = (1.0 + kf * p.norm_bound * p.norm_bound / (p.alpha * p.alpha * d * p.lambda)).ln();
    let l = p.level_log(k, 1.0);
    Ok(12.0 * (d * info * l).sqrt() + 30.0 * l * p.r / p.alpha + p.lambda.sqrt() * p.b)
}

/// Radius for the unweighted OFUL baseline (`σ̄ ≡ 1`), from the same
/// Bernstein-type bound with per-step variance at most `R²` and `ε = R`:
///
/// `12R√(d·log(1+kA²/(dλ))·L₁) + 30·L₁·R + √λ·B`, `L₁ = log(32k²/δ)`.
pub fn oful_radius(k: u64, p: &RadiusParams) -> Result<f64> {
    p.validate()?;
    check_round(k)?;
    let d = p.d as f64;
    let kf = k as f64;
    let info = (1.0 + kf * p.norm_bound * p.norm_bound / (d * p.lambda)).ln();
    let l = (32.0 * kf * kf / p.delta).ln();
    Ok(12.0 * p.r * (d * info * l).sqrt() + 30.0 * l * p.r + p.lambda.sqrt() * p.b)
}

/// Smallest `M` with `2^M ≥ 3KH`.
pub fn moment_levels(episodes: u64, horizon: u64) -> usize {
    let target = 3u128 * episodes.max(1) as u128 * horizon.max(1) as u128;
    let mut m = 0usize;
    while (1u128 << m) < target {
        m += 1;
    }
    m
}

/// Defaults for the bandit setting: `α = 1/√K`, `γ = √R·d^{-1/4}`, `λ = d/B²`.
pub fn bandit_defaults(
    rounds: u64,
    d: usize,
    b: f64,
    r: f64,
    norm_bound: f64,
    delta: f64,
) -> Result<RadiusParams> {
    if rounds == 0 {
        return Err(domain("number of rounds K must be at least 1"));
    }
    if d == 0 {
        return Err(domain("dimension d must be at least 1"));
    }
    let df = d as f64;
    let p = RadiusParams {
        d,
        alpha: 1.0 / (rounds as f64).sqrt(),
        gamma: r.sqrt() / df.powf(0.25),
        lambda: df / (b * b),
        b,
        r,
        delta,
        norm_bound,
    };
    p.validate()?;
    Ok(p)
}

/// Radius parameters plus the number of moment levels for the MDP learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MdpDefaults {
    pub params: RadiusParams,
    pub levels: usize,
}

/// Defaults for the MDP setting: `α = √(d/(KH))`, `γ = d^{-1/4}`,
/// `λ = d/B²`, `M = ⌈log₂(3KH)⌉`, `R = 1`.
pub fn mdp_defaults(
    episodes: u64,
    horizon: u64,
    d: usize,
    b: f64,
    delta: f64,
) -> Result<MdpDefaults> {
    if episodes == 0 || horizon == 0 {
        return Err(domain("episodes K and horizon H must be at least 1"));
    }
    if d == 0 {
        return Err(domain("dimension d must be at least 1"));
    }
    let df = d as f64;
    let params = RadiusParams {
        d,
        alpha: (df / (episodes as f64 * horizon as f64)).sqrt(),
        gamma: df.powf(-0.25),
        lambda: df / (b * b),
        b,
        r: 1.0,
        delta,
        norm_bound: 1.0,
    };
    params.validate()?;
    Ok(MdpDefaults {
        params,
        levels: moment_levels(episodes, horizon),
    })
}
