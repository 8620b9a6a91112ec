use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, domain, Result};

/// Per-round noise standard deviation bound σ_k (rounds are 1-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VarianceProfile {
    Constant {
        sigma: f64,
    },
    /// σ_k = 1/√k.
    Decaying,
    /// `low_len` rounds at `low`, then `high_len` rounds at `high`, repeating.
    Bursty {
        #[serde(default = "bursty_low")]
        low: f64,
        #[serde(default = "bursty_high")]
        high: f64,
        #[serde(default = "bursty_low_len")]
        low_len: u64,
        #[serde(default = "bursty_high_len")]
        high_len: u64,
    },
    Zero,
}

fn bursty_low() -> f64 {
    0.01
}

fn bursty_high() -> f64 {
    1.0
}

fn bursty_low_len() -> u64 {
    480
}

fn bursty_high_len() -> u64 {
    20
}

impl Default for VarianceProfile {
    fn default() -> Self {
        VarianceProfile::Constant { sigma: 0.5 }
    }
}

impl VarianceProfile {
    /// The shipped bursty profile: 480 rounds at 0.01 then 20 rounds at 1.
    pub fn bursty() -> Self {
        VarianceProfile::Bursty {
            low: bursty_low(),
            high: bursty_high(),
            low_len: bursty_low_len(),
            high_len: bursty_high_len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            VarianceProfile::Constant { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => Err(
                domain(format!("constant sigma must be nonnegative, got {sigma}")),
            ),
            VarianceProfile::Bursty {
                low,
                high,
                low_len,
                high_len,
            } => {
                if !(low >= 0.0 && high >= 0.0 && low.is_finite() && high.is_finite()) {
                    return Err(domain("bursty sigmas must be nonnegative"));
                }
                if low_len + high_len == 0 {
                    return Err(domain("bursty block lengths cannot both be zero"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn sigma(&self, k: u64) -> f64 {
        match *self {
            VarianceProfile::Constant { sigma } => sigma,
            VarianceProfile::Decaying => 1.0 / (k.max(1) as f64).sqrt(),
            VarianceProfile::Bursty {
                low,
                high,
                low_len,
                high_len,
            } => {
                let pos = (k.max(1) - 1) % (low_len + high_len);
                if pos < low_len {
                    low
                } else {
                    high
                }
            }
            VarianceProfile::Zero => 0.0,
        }
    }

    /// `max_{k ≤ K} σ_k`.
    pub fn max_sigma(&self, rounds: u64) -> f64 {
        (1..=rounds).map(|k| self.sigma(k)).fold(0.0, f64::max)
    }

    /// `Σ_{k ≤ K} σ_k²`.
    pub fn total_variance(&self, rounds: u64) -> f64 {
        (1..=rounds).map(|k| self.sigma(k).powi(2)).sum()
    }
}

/// Where each round's decision set comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ArmSource {
    /// `num_arms` fresh points on the sphere of radius `norm_bound` every
    /// round, derived from `(seed, k)`.
    Sphere { num_arms: usize, seed: u64 },
    /// Explicit decision sets; round `k` uses `sets[(k-1) % sets.len()]`.
    Explicit(Vec<Vec<DVector<f64>>>),
}

/// Simulated heterogeneous-variance linear bandit.
#[derive(Debug, Clone)]
pub struct BanditEnv {
    theta_star: DVector<f64>,
    arms: ArmSource,
    profile: VarianceProfile,
    norm_bound: f64,
}

fn sphere_point(rng: &mut ChaCha8Rng, d: usize, radius: f64) -> DVector<f64> {
    loop {
        let g = DVector::<f64>::from_fn(d, |_, _| rng.sample(StandardNormal));
        let n = g.norm();
        if n > 1e-12 {
            return g * (radius / n);
        }
    }
}

impl BanditEnv {
    pub fn new(
        theta_star: DVector<f64>,
        arms: ArmSource,
        profile: VarianceProfile,
        norm_bound: f64,
    ) -> Result<Self> {
        let d = theta_star.len();
        if d == 0 {
            return Err(domain("theta_star must be nonempty"));
        }
        if !(norm_bound > 0.0) {
            return Err(domain("arm norm bound A must be positive"));
        }
        profile.validate()?;
        match &arms {
            ArmSource::Sphere { num_arms, .. } => {
                if *num_arms == 0 {
                    return Err(domain("decision sets must be nonempty"));
                }
                if norm_bound * theta_star.norm() > 1.0 + 1e-12 {
                    return Err(domain(
                        "sphere arms need A·‖θ*‖ ≤ 1 so mean rewards lie in [-1,1]",
                    ));
                }
            }
            ArmSource::Explicit(sets) => {
                if sets.is_empty() || sets.iter().any(|s| s.is_empty()) {
                    return Err(domain("decision sets must be nonempty"));
                }
                for a in sets.iter().flatten() {
                    check_len("arm", d, a.len())?;
                    if a.norm() > norm_bound + 1e-12 {
                        return Err(domain(format!(
                            "arm norm {} exceeds A = {norm_bound}",
                            a.norm()
                        )));
                    }
                    if a.dot(&theta_star).abs() > 1.0 + 1e-12 {
                        return Err(domain("arm mean reward outside [-1, 1]"));
                    }
                }
            }
        }
        Ok(Self {
            theta_star,
            arms,
            profile,
            norm_bound,
        })
    }

    /// θ* drawn uniformly from the sphere of radius `theta_norm`, with
    /// `num_arms` unit-norm arms resampled each round.
    pub fn random_sphere(
        d: usize,
        num_arms: usize,
        theta_norm: f64,
        profile: VarianceProfile,
        seed: u64,
    ) -> Result<Self> {
        if d == 0 {
            return Err(domain("dimension must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = sphere_point(&mut rng, d, theta_norm);
        Self::new(
            theta,
            ArmSource::Sphere {
                num_arms,
                seed: rng.gen(),
            },
            profile,
            1.0,
        )
    }

    /// Like [`BanditEnv::random_sphere`] but the same `num_arms` arms are
    /// offered every round.
    pub fn fixed_sphere(
        d: usize,
        num_arms: usize,
        theta_norm: f64,
        profile: VarianceProfile,
        seed: u64,
    ) -> Result<Self> {
        if d == 0 || num_arms == 0 {
            return Err(domain("dimension and arm count must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = sphere_point(&mut rng, d, theta_norm);
        let arms = (0..num_arms)
            .map(|_| sphere_point(&mut rng, d, 1.0))
            .collect();
        Self::new(theta, ArmSource::Explicit(vec![arms]), profile, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }

    pub fn theta_star(&self) -> &DVector<f64> {
        &self.theta_star
    }

    pub fn profile(&self) -> &VarianceProfile {
        &self.profile
    }

    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    /// Decision set `D_k` for round `k ≥ 1`.
    pub fn arms(&self, k: u64) -> Vec<DVector<f64>> {
        match &self.arms {
            ArmSource::Sphere { num_arms, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(k);
                (0..*num_arms)
                    .map(|_| sphere_point(&mut rng, self.dim(), self.norm_bound))
                    .collect()
            }
            ArmSource::Explicit(sets) => sets[((k.max(1) - 1) as usize) % sets.len()].clone(),
        }
    }

    pub fn sigma(&self, k: u64) -> f64 {
        self.profile.sigma(k)
    }

    pub fn mean_reward(&self, arm: &DVector<f64>) -> f64 {
        arm.dot(&self.theta_star)
    }

    /// Scaled Rademacher noise `±σ_k`; zero-mean with `E[ε²] = σ_k²`.
    pub fn sample_noise<R: Rng + ?Sized>(&self, k: u64, rng: &mut R) -> f64 {
        let s = self.sigma(k);
        if rng.gen::<bool>() {
            s
        } else {
            -s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles() {
        assert_eq!(VarianceProfile::Zero.sigma(7), 0.0);
        assert_eq!(VarianceProfile::Decaying.sigma(4), 0.5);
        let b = VarianceProfile::bursty();
        assert_eq!(b.sigma(1), 0.01);
        assert_eq!(b.sigma(480), 0.01);
        assert_eq!(b.sigma(481), 1.0);
        assert_eq!(b.sigma(500), 1.0);
        assert_eq!(b.sigma(501), 0.01);
        assert!(b.total_variance(16384) <= 0.05 * 16384.0);
        assert_eq!(b.max_sigma(100), 0.01);
        assert_eq!(b.max_sigma(16384), 1.0);
    }

    #[test]
    fn profile_json() {
        let b: VarianceProfile = serde_json::from_str(r#"{"kind": "bursty"}"#).unwrap();
        assert_eq!(b, VarianceProfile::bursty());
        let c: VarianceProfile =
            serde_json::from_str(r#"{"kind": "constant", "sigma": 0.25}"#).unwrap();
        assert_eq!(c, VarianceProfile::Constant { sigma: 0.25 });
        assert_eq!(
            serde_json::to_string(&VarianceProfile::Decaying).unwrap(),
            r#"{"kind":"decaying"}"#
        );
    }

    #[test]
    fn sphere_arms_are_deterministic_and_bounded() {
        let env = BanditEnv::random_sphere(4, 32, 1.0, VarianceProfile::Decaying, 3).unwrap();
        let a = env.arms(17);
        assert_eq!(a, env.arms(17));
        assert_ne!(a, env.arms(18));
        for arm in &a {
            assert!((arm.norm() - 1.0).abs() < 1e-12);
            assert!(env.mean_reward(arm).abs() <= 1.0 + 1e-12);
        }
        assert!((env.theta_star().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn construction_checks_arm_bounds() {
        let theta = DVector::from_vec(vec![1.0, 0.0]);
        let long = vec![vec![DVector::from_vec(vec![2.0, 0.0])]];
        assert!(BanditEnv::new(
            theta.clone(),
            ArmSource::Explicit(long),
            VarianceProfile::Zero,
            1.0
        )
        .is_err());
        let bad_mean = vec![vec![DVector::from_vec(vec![2.0, 0.0])]];
        assert!(BanditEnv::new(
            theta.clone(),
            ArmSource::Explicit(bad_mean),
            VarianceProfile::Zero,
            3.0
        )
        .is_err());
        assert!(BanditEnv::new(
            theta,
            ArmSource::Explicit(vec![vec![]]),
            VarianceProfile::Zero,
            1.0
        )
        .is_err());
    }

    #[test]
    fn noise_is_centered_and_bounded() {
        let env = BanditEnv::random_sphere(2, 4, 1.0, VarianceProfile::Constant { sigma: 0.7 }, 1)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for k in 1..=n {
            let e = env.sample_noise(k, &mut rng);
            assert!(e.abs() <= 0.7);
            sum += e;
            sq += e * e;
        }
        let mean = sum / n as f64;
        assert!(mean.abs() <= 3.0 * 0.7 / (n as f64).sqrt(), "mean {mean}");
        assert!((sq / n as f64 - 0.49).abs() < 1e-12);
    }
}
