//! Finite episodic linear mixture MDPs: `P(s'|s,a) = ⟨φ(s'|s,a), θ*⟩`.
//!
//! Besides the model itself this module carries the exact dynamic-programming
//! oracles (`V*`, `Q*`, `V^π`) that the learners are measured against.

mod file;
mod instances;

pub use file::{MdpFile, PhiEntry, MDP_FILE_FORMAT};
pub use instances::{
    make_hard_instance, make_random_tabular, HardInstance, HARD_INSTANCE_MAX_ACTIONS,
};

use nalgebra::DVector;
use rand::Rng;

use crate::bandit::argmax;
use crate::error::{check_len, domain, Result};

/// Drift beyond this from a unit row sum triggers renormalization.
const RENORMALIZE_TOL: f64 = 1e-12;
/// Rows further than this from the simplex are rejected.
const SIMPLEX_TOL: f64 = 1e-10;

/// Sparse transition feature `φ(s'|s,a)`: `(coordinate, value)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionFeature {
    pub next_state: usize,
    pub entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct LinearMixtureMdp {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    dim: usize,
    initial_state: usize,
    theta_star: DVector<f64>,
    rewards: Vec<f64>,
    features: Vec<Vec<TransitionFeature>>,
    transitions: Vec<f64>,
}

/// One step of a sampled trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
}

/// `values[h][s]` for stages `h = 1..=H+1` stored at index `h-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    pub values: Vec<Vec<f64>>,
}

impl ValueTable {
    /// Value at 1-based stage `h`.
    pub fn stage(&self, h: usize) -> &[f64] {
        &self.values[h - 1]
    }

    pub fn horizon(&self) -> usize {
        self.values.len() - 1
    }
}

/// `q[h][s][a]` for stages `h = 1..=H` stored at index `h-1`.
pub type QTable = Vec<Vec<Vec<f64>>>;

/// Deterministic nonstationary policy, `actions[h-1][s]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    pub actions: Vec<Vec<usize>>,
}

impl Policy {
    pub fn action(&self, h: usize, s: usize) -> usize {
        self.actions[h - 1][s]
    }

    /// Greedy policy with lowest-index tie-breaking.
    pub fn greedy(q: &QTable) -> Self {
        Self {
            actions: q
                .iter()
                .map(|stage| stage.iter().map(|row| argmax(row)).collect())
                .collect(),
        }
    }
}

impl LinearMixtureMdp {
    /// Builds and validates an instance.
    ///
    /// `features[s * A + a]` lists the nonzero `φ(s'|s,a)`; `rewards[s * A + a]`
    /// must lie in `[0,1]`. Transition rows are checked against the simplex
    /// and renormalized if their sum drifts by more than 1e-12.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        theta_star: DVector<f64>,
        rewards: Vec<f64>,
        features: Vec<Vec<TransitionFeature>>,
        initial_state: usize,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 || horizon == 0 {
            return Err(domain("states, actions and horizon must all be nonempty"));
        }
        let dim = theta_star.len();
        if dim == 0 {
            return Err(domain("theta_star must be nonempty"));
        }
        if initial_state >= num_states {
            return Err(domain(format!(
                "initial state {initial_state} out of range"
            )));
        }
        let pairs = num_states * num_actions;
        check_len("rewards", pairs, rewards.len())?;
        check_len("feature rows", pairs, features.len())?;
        if rewards.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(domain("rewards must lie in [0, 1]"));
        }

        let mut transitions = vec![0.0; pairs * num_states];
        for (pair, feats) in features.iter().enumerate() {
            let row = &mut transitions[pair * num_states..(pair + 1) * num_states];
            for f in feats {
                if f.next_state >= num_states {
                    return Err(domain(format!(
                        "feature next state {} out of range",
                        f.next_state
                    )));
                }
                for &(i, v) in &f.entries {
                    if i >= dim {
                        return Err(domain(format!(
                            "feature coordinate {i} exceeds dimension {dim}"
                        )));
                    }
                    row[f.next_state] += v * theta_star[i];
                }
            }
            if row.iter().any(|&p| p < -SIMPLEX_TOL) {
                return Err(domain(format!(
                    "negative transition probability in row {pair}"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_TOL {
                return Err(domain(format!("transition row {pair} sums to {sum}")));
            }
            for p in row.iter_mut() {
                *p = p.max(0.0);
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > RENORMALIZE_TOL {
                row.iter_mut().for_each(|p| *p /= sum);
            }
        }

        Ok(Self {
            num_states,
            num_actions,
            horizon,
            dim,
            initial_state,
            theta_star,
            rewards,
            features,
            transitions,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn theta_star(&self) -> &DVector<f64> {
        &self.theta_star
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.num_actions + a]
    }

    pub fn features(&self, s: usize, a: usize) -> &[TransitionFeature] {
        &self.features[s * self.num_actions + a]
    }

    /// `P(·|s,a)` as a dense row.
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let pair = s * self.num_actions + a;
        &self.transitions[pair * self.num_states..(pair + 1) * self.num_states]
    }

    /// `φ_V(s,a) = Σ_{s'} φ(s'|s,a) V(s')`.
    pub fn phi_v(&self, s: usize, a: usize, v: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for f in self.features(s, a) {
            let w = v[f.next_state];
            if w != 0.0 {
                for &(i, x) in &f.entries {
                    out[i] += w * x;
                }
            }
        }
        out
    }

    /// `[PV](s,a) = ⟨φ_V(s,a), θ*⟩`.
    pub fn expected_value(&self, s: usize, a: usize, v: &[f64]) -> f64 {
        self.phi_v(s, a, v).dot(&self.theta_star)
    }

    /// `[𝕍V](s,a) = ⟨φ_{V²}, θ*⟩ − ⟨φ_V, θ*⟩²`, with rounding negatives above
    /// −1e-12 clamped to zero.
    pub fn conditional_variance(&self, s: usize, a: usize, v: &[f64]) -> f64 {
        let sq: Vec<f64> = v.iter().map(|x| x * x).collect();
        let mean = self.expected_value(s, a, v);
        let var = self.expected_value(s, a, &sq) - mean * mean;
        if var < 0.0 && var > -1e-12 {
            0.0
        } else {
            var
        }
    }

    /// Draws `s' ~ P(·|s,a)` by inverse CDF.
    pub fn sample_next<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> usize {
        let row = self.transition_row(s, a);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &p) in row.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                last = i;
                if u < acc {
                    return i;
                }
            }
        }
        last
    }

    /// Rolls out `policy` for `H` steps from the initial state.
    pub fn sample_episode<R: Rng + ?Sized>(&self, policy: &Policy, rng: &mut R) -> Vec<Step> {
        let mut s = self.initial_state;
        (1..=self.horizon)
            .map(|h| {
                let a = policy.action(h, s);
                let next = self.sample_next(s, a, rng);
                let step = Step {
                    state: s,
                    action: a,
                    reward: self.reward(s, a),
                    next_state: next,
                };
                s = next;
                step
            })
            .collect()
    }

    fn backup(&self, s: usize, a: usize, next: &[f64]) -> f64 {
        let row = self.transition_row(s, a);
        self.reward(s, a) + row.iter().zip(next).map(|(p, v)| p * v).sum::<f64>()
    }

    /// Backward induction with exact transitions: `(V*, Q*)`.
    pub fn value_iteration(&self) -> (ValueTable, QTable) {
        let (h_max, ns, na) = (self.horizon, self.num_states, self.num_actions);
        let mut v = vec![vec![0.0; ns]; h_max + 1];
        let mut q = vec![vec![vec![0.0; na]; ns]; h_max];
        for h in (0..h_max).rev() {
            for s in 0..ns {
                for a in 0..na {
                    q[h][s][a] = self.backup(s, a, &v[h + 1]);
                }
                v[h][s] = q[h][s].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            }
        }
        (ValueTable { values: v }, q)
    }

    /// Exact `V^π` by backward induction.
    pub fn policy_value(&self, policy: &Policy) -> ValueTable {
        let (h_max, ns) = (self.horizon, self.num_states);
        let mut v = vec![vec![0.0; ns]; h_max + 1];
        for h in (0..h_max).rev() {
            for s in 0..ns {
                v[h][s] = self.backup(s, policy.actions[h][s], &v[h + 1]);
            }
        }
        ValueTable { values: v }
    }

    /// Exact value of the policy that picks actions uniformly at random.
    pub fn uniform_policy_value(&self) -> ValueTable {
        let (h_max, ns, na) = (self.horizon, self.num_states, self.num_actions);
        let mut v = vec![vec![0.0; ns]; h_max + 1];
        for h in (0..h_max).rev() {
            for s in 0..ns {
                let total: f64 = (0..na).map(|a| self.backup(s, a, &v[h + 1])).sum();
                v[h][s] = total / na as f64;
            }
        }
        ValueTable { values: v }
    }

    /// `‖θ*‖₂`.
    pub fn parameter_norm(&self) -> f64 {
        self.theta_star.norm()
    }
}

/// Outcome of the structural checks on an instance.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    /// Largest deviation of a transition row from the simplex (negative mass
    /// or sum error), computed from the raw `⟨φ, θ*⟩` values.
    pub max_simplex_error: f64,
    /// Largest `‖φ_V(s,a)‖₂` over the value battery.
    pub max_phi_v_norm: f64,
    pub parameter_norm: f64,
    /// Largest trajectory return over the sampled episodes.
    pub max_episode_return: f64,
    /// Smallest trajectory return over the sampled episodes.
    pub min_episode_return: f64,
}

impl AssumptionReport {
    pub fn holds(&self, b: f64, tol: f64) -> bool {
        self.max_simplex_error <= tol
            && self.max_phi_v_norm <= 1.0 + tol
            && self.parameter_norm <= b + tol
            && self.max_episode_return <= 1.0 + tol
            && self.min_episode_return >= -tol
    }
}

/// Checks the linear-mixture and bounded-return assumptions on `mdp`:
/// simplex rows, `‖φ_V‖ ≤ 1` over `value_battery` random `V: S → [0,1]`
/// (plus the constant 0 and 1 functions), and returns of `episodes`
/// trajectories under random deterministic policies.
pub fn check_assumptions<R: Rng + ?Sized>(
    mdp: &LinearMixtureMdp,
    value_battery: usize,
    episodes: usize,
    rng: &mut R,
) -> AssumptionReport {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let mut max_simplex_error: f64 = 0.0;
    for s in 0..ns {
        for a in 0..na {
            let raw: Vec<f64> = (0..ns)
                .map(|next| {
                    let mut e = vec![0.0; ns];
                    e[next] = 1.0;
                    mdp.expected_value(s, a, &e)
                })
                .collect();
            let neg = raw.iter().fold(0.0f64, |m, &p| m.max(-p));
            let sum_err = (raw.iter().sum::<f64>() - 1.0).abs();
            max_simplex_error = max_simplex_error.max(neg).max(sum_err);
        }
    }

    let mut battery: Vec<Vec<f64>> = vec![vec![0.0; ns], vec![1.0; ns]];
    battery.extend((0..value_battery).map(|_| (0..ns).map(|_| rng.gen::<f64>()).collect()));
    let mut max_phi_v_norm: f64 = 0.0;
    for v in &battery {
        for s in 0..ns {
            for a in 0..na {
                max_phi_v_norm = max_phi_v_norm.max(mdp.phi_v(s, a, v).norm());
            }
        }
    }

    let mut max_ret = f64::NEG_INFINITY;
    let mut min_ret = f64::INFINITY;
    for _ in 0..episodes {
        let policy = Policy {
            actions: (0..mdp.horizon())
                .map(|_| (0..ns).map(|_| rng.gen_range(0..na)).collect())
                .collect(),
        };
        let ret: f64 = mdp
            .sample_episode(&policy, rng)
            .iter()
            .map(|s| s.reward)
            .sum();
        max_ret = max_ret.max(ret);
        min_ret = min_ret.min(ret);
    }

    AssumptionReport {
        max_simplex_error,
        max_phi_v_norm,
        parameter_norm: mdp.parameter_norm(),
        max_episode_return: if episodes == 0 { 0.0 } else { max_ret },
        min_episode_return: if episodes == 0 { 0.0 } else { min_ret },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// One decision state with successors {1, 2} at probability (p, 1-p);
    /// successors are absorbing. Tabular indicator features.
    fn two_successor(p: f64, r: [f64; 3]) -> LinearMixtureMdp {
        // θ* = (p, 1-p, 1, 1) over coordinates (0→1, 0→2, 1→1, 2→2).
        let theta = DVector::from_vec(vec![p, 1.0 - p, 1.0, 1.0]);
        let feats = vec![
            vec![
                TransitionFeature {
                    next_state: 1,
                    entries: vec![(0, 1.0)],
                },
                TransitionFeature {
                    next_state: 2,
                    entries: vec![(1, 1.0)],
                },
            ],
            vec![TransitionFeature {
                next_state: 1,
                entries: vec![(2, 1.0)],
            }],
            vec![TransitionFeature {
                next_state: 2,
                entries: vec![(3, 1.0)],
            }],
        ];
        LinearMixtureMdp::new(3, 1, 2, theta, r.to_vec(), feats, 0).unwrap()
    }

    #[test]
    fn phi_v_examples() {
        let m = two_successor(0.5, [0.0, 0.0, 0.0]);
        assert_eq!(m.phi_v(0, 0, &[0.0, 0.0, 0.0]), DVector::zeros(4));
        let ones = m.phi_v(0, 0, &[1.0, 1.0, 1.0]);
        assert_relative_eq!(ones.dot(m.theta_star()), 1.0);
        // Indicator features put V(s') at the (s', s, a) coordinate.
        let v = [0.3, 0.7, 0.2];
        assert_eq!(
            m.phi_v(0, 0, &v),
            DVector::from_vec(vec![0.7, 0.2, 0.0, 0.0])
        );
        assert_eq!(
            m.phi_v(1, 0, &v),
            DVector::from_vec(vec![0.0, 0.0, 0.7, 0.0])
        );
    }

    #[test]
    fn moments_examples() {
        let m = two_successor(0.5, [0.0, 0.0, 0.0]);
        assert_relative_eq!(m.expected_value(0, 0, &[0.4, 0.4, 0.4]), 0.4);
        assert_eq!(m.conditional_variance(0, 0, &[0.4, 0.4, 0.4]), 0.0);
        assert_relative_eq!(m.expected_value(0, 0, &[0.0, 0.0, 1.0]), 0.5);
        assert_relative_eq!(m.conditional_variance(0, 0, &[0.0, 0.0, 1.0]), 0.25);
    }

    #[test]
    fn variance_matches_brute_force_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for seed in 0..5 {
            let m = make_random_tabular(4, 2, 3, seed).unwrap();
            for _ in 0..20 {
                let v: Vec<f64> = (0..4).map(|_| rng.gen::<f64>()).collect();
                for s in 0..4 {
                    for a in 0..2 {
                        let row = m.transition_row(s, a);
                        let mean: f64 = row.iter().zip(&v).map(|(p, x)| p * x).sum();
                        let var: f64 = row
                            .iter()
                            .zip(&v)
                            .map(|(p, x)| p * (x - mean).powi(2))
                            .sum();
                        assert!((m.conditional_variance(s, a, &v) - var).abs() <= 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn value_iteration_basics() {
        let zero = two_successor(0.3, [0.0, 0.0, 0.0]);
        let (v, _) = zero.value_iteration();
        assert!(v.values.iter().flatten().all(|&x| x == 0.0));

        let m = make_random_tabular(3, 3, 1, 5).unwrap();
        let (v, _) = m.value_iteration();
        for s in 0..3 {
            let best = (0..3)
                .map(|a| m.reward(s, a))
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(v.stage(1)[s], best);
        }
    }

    #[test]
    fn greedy_policy_value_equals_optimal() {
        for seed in 0..5 {
            let m = make_random_tabular(3, 3, 5, seed).unwrap();
            let (v, q) = m.value_iteration();
            let pv = m.policy_value(&Policy::greedy(&q));
            for (a, b) in pv.values.iter().flatten().zip(v.values.iter().flatten()) {
                assert!((a - b).abs() <= 1e-10);
            }
            assert!(v.values.iter().flatten().all(|&x| (0.0..=1.0).contains(&x)));
            assert!(v.stage(6).iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn any_policy_is_dominated() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = make_random_tabular(3, 4, 4, 9).unwrap();
        let (v, _) = m.value_iteration();
        for _ in 0..50 {
            let pol = Policy {
                actions: (0..4)
                    .map(|_| (0..3).map(|_| rng.gen_range(0..4)).collect())
                    .collect(),
            };
            let pv = m.policy_value(&pol);
            assert!(pv.stage(1)[m.initial_state()] <= v.stage(1)[m.initial_state()] + 1e-12);
        }
        let u = m.uniform_policy_value();
        assert!(u.stage(1)[0] <= v.stage(1)[0] + 1e-12);
    }

    #[test]
    fn deterministic_transitions_ignore_seed() {
        let m = two_successor(1.0, [0.0, 0.5, 0.0]);
        let pol = Policy {
            actions: vec![vec![0; 3]; 2],
        };
        let a = m.sample_episode(&pol, &mut ChaCha8Rng::seed_from_u64(1));
        let b = m.sample_episode(&pol, &mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(a, b);
        assert_eq!(a[0].next_state, 1);
        let total: f64 = a.iter().map(|s| s.reward).sum();
        assert!(total <= 1.0);
    }

    #[test]
    fn sampled_frequencies_match_probabilities() {
        let m = make_random_tabular(4, 2, 3, 17).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[m.sample_next(2, 1, &mut rng)] += 1;
        }
        for (c, &p) in counts.iter().zip(m.transition_row(2, 1)) {
            let freq = *c as f64 / n as f64;
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() <= 3.0 * sd + 1e-12, "freq {freq} p {p}");
        }
    }

    #[test]
    fn construction_rejects_non_simplex_rows() {
        let theta = DVector::from_vec(vec![0.7, 0.7]);
        let feats = vec![vec![
            TransitionFeature {
                next_state: 0,
                entries: vec![(0, 1.0)],
            },
            TransitionFeature {
                next_state: 0,
                entries: vec![(1, 1.0)],
            },
        ]];
        assert!(LinearMixtureMdp::new(1, 1, 1, theta, vec![0.0], feats, 0).is_err());
        let theta = DVector::from_vec(vec![1.0]);
        let feats = vec![vec![TransitionFeature {
            next_state: 0,
            entries: vec![(0, 1.0)],
        }]];
        assert!(
            LinearMixtureMdp::new(1, 1, 1, theta.clone(), vec![1.5], feats.clone(), 0).is_err()
        );
        assert!(LinearMixtureMdp::new(1, 1, 1, theta, vec![0.5], feats, 0).is_ok());
    }
}
