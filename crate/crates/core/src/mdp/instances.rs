use std::collections::BTreeSet;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LinearMixtureMdp, TransitionFeature};
use crate::error::{domain, Result};

/// Action sets larger than this are subsampled.
pub const HARD_INSTANCE_MAX_ACTIONS: usize = 1024;

const X1: usize = 0;
const X2: usize = 1;
const X3: usize = 2;

/// The three-state hypercube-action lower-bound instance.
///
/// States are `x₁ = 0`, `x₂ = 1`, `x₃ = 2`. From `x₁` every action `a ∈
/// {−1,+1}^{d−1}` moves to `x₃` with probability `δ + ⟨μ, a⟩` and to `x₂`
/// otherwise; `x₂` and `x₃` are absorbing and only `x₃` pays `1/H` per stage.
#[derive(Debug, Clone)]
pub struct HardInstance {
    pub mdp: LinearMixtureMdp,
    /// `μ ∈ {−Δ, Δ}^{d−1}`.
    pub mu: Vec<f64>,
    /// Base transition probability δ = 1/6.
    pub base_probability: f64,
    /// Per-coordinate gap Δ = √(δ/K)/(4√2).
    pub gap: f64,
    /// Sign pattern of every action, in action-index order.
    pub actions: Vec<Vec<f64>>,
}

impl HardInstance {
    /// Index of the action whose signs match μ.
    pub fn optimal_action(&self) -> usize {
        self.action_with(|m| m >= 0.0)
    }

    /// Index of the action whose signs oppose μ.
    pub fn pessimal_action(&self) -> usize {
        self.action_with(|m| m < 0.0)
    }

    fn action_with(&self, positive: impl Fn(f64) -> bool) -> usize {
        let target: Vec<f64> = self
            .mu
            .iter()
            .map(|&m| if positive(m) { 1.0 } else { -1.0 })
            .collect();
        self.actions
            .iter()
            .position(|a| *a == target)
            .expect("optimal and pessimal patterns are always present")
    }
}

fn pattern(mask: u64, len: usize) -> Vec<f64> {
    (0..len)
        .map(|j| if mask >> j & 1 == 1 { 1.0 } else { -1.0 })
        .collect()
}

/// Builds the lower-bound instance for dimension `d`, `K` episodes, horizon
/// `H` and parameter-norm bound `B`. μ's signs come from `seed`.
pub fn make_hard_instance(
    d: usize,
    episodes: u64,
    horizon: usize,
    b: f64,
    seed: u64,
) -> Result<HardInstance> {
    if d < 2 || d > 64 {
        return Err(domain(format!("hard instance needs 2 ≤ d ≤ 64, got {d}")));
    }
    if horizon == 0 {
        return Err(domain("horizon must be at least 1"));
    }
    if !(b > 1.0) {
        return Err(domain(format!("hard instance needs B > 1, got {b}")));
    }
    let kf = episodes as f64;
    let df = d as f64;
    let min_k = (3.0 * df * df).max((df - 1.0) / (192.0 * (b - 1.0)));
    if kf < min_k {
        return Err(domain(format!(
            "hard instance needs K ≥ max{{3d², (d−1)/(192(B−1))}} = {min_k}, got {episodes}"
        )));
    }

    let delta = 1.0 / 6.0;
    let gap = (delta / kf).sqrt() / (4.0 * 2f64.sqrt());
    let n = d - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu_mask: u64 = (0..n).fold(0, |m, j| if rng.gen::<bool>() { m | 1 << j } else { m });
    let mu: Vec<f64> = pattern(mu_mask, n).iter().map(|s| s * gap).collect();

    let full = n <= 10;
    let masks: Vec<u64> = if full {
        (0..1u64 << n).collect()
    } else {
        let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        let mut set = BTreeSet::from([mu_mask, !mu_mask & all]);
        while set.len() < HARD_INSTANCE_MAX_ACTIONS {
            set.insert(rng.gen::<u64>() & all);
        }
        set.into_iter().collect()
    };
    let actions: Vec<Vec<f64>> = masks.iter().map(|&m| pattern(m, n)).collect();

    let denom = 1.0 + gap * (df - 1.0);
    let alpha = (1.0 / denom).sqrt();
    let beta = (gap / denom).sqrt();
    let mut theta = vec![1.0 / alpha];
    theta.extend(mu.iter().map(|m| m / beta));

    let na = actions.len();
    let mut features = Vec::with_capacity(3 * na);
    let mut rewards = Vec::with_capacity(3 * na);
    for s in [X1, X2, X3] {
        for a in &actions {
            let feats = if s == X1 {
                let mut to_x2 = vec![(0, alpha * (1.0 - delta))];
                let mut to_x3 = vec![(0, alpha * delta)];
                for (j, &sign) in a.iter().enumerate() {
                    to_x2.push((j + 1, -beta * sign));
                    to_x3.push((j + 1, beta * sign));
                }
                vec![
                    TransitionFeature {
                        next_state: X2,
                        entries: to_x2,
                    },
                    TransitionFeature {
                        next_state: X3,
                        entries: to_x3,
                    },
                ]
            } else {
                vec![TransitionFeature {
                    next_state: s,
                    entries: vec![(0, alpha)],
                }]
            };
            features.push(feats);
            rewards.push(if s == X3 { 1.0 / horizon as f64 } else { 0.0 });
        }
    }

    let mdp = LinearMixtureMdp::new(
        3,
        na,
        horizon,
        DVector::from_vec(theta),
        rewards,
        features,
        X1,
    )?;
    Ok(HardInstance {
        mdp,
        mu,
        base_probability: delta,
        gap,
        actions,
    })
}

/// Random tabular instance with `d = S²A` indicator features.
///
/// Transition rows are normalized exponentials of seeded uniforms and
/// rewards are `g(s,a)/H` with `g ~ U[0,1]`, so every trajectory returns at
/// most 1. Features are `e_{(s,a,s')}/√S` and `θ* = √S · P` so that
/// `‖φ_V‖₂ ≤ 1` for every `V: S → [0,1]`; `‖θ*‖₂ ≤ S√A`.
pub fn make_random_tabular(
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    seed: u64,
) -> Result<LinearMixtureMdp> {
    if num_states == 0 || num_actions == 0 || horizon == 0 {
        return Err(domain("states, actions and horizon must all be nonempty"));
    }
    let (ns, na) = (num_states, num_actions);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = (ns as f64).sqrt();
    let dim = ns * ns * na;
    let mut theta = vec![0.0; dim];
    let mut features = Vec::with_capacity(ns * na);
    let mut rewards = Vec::with_capacity(ns * na);
    for s in 0..ns {
        for a in 0..na {
            let raw: Vec<f64> = (0..ns).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
            let total: f64 = raw.iter().sum();
            let pair = s * na + a;
            let mut feats = Vec::with_capacity(ns);
            for (next, w) in raw.iter().enumerate() {
                let idx = pair * ns + next;
                theta[idx] = scale * w / total;
                feats.push(TransitionFeature {
                    next_state: next,
                    entries: vec![(idx, 1.0 / scale)],
                });
            }
            features.push(feats);
            rewards.push(rng.gen::<f64>() / horizon as f64);
        }
    }
    LinearMixtureMdp::new(
        ns,
        na,
        horizon,
        DVector::from_vec(theta),
        rewards,
        features,
        0,
    )
}
