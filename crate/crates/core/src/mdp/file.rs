use std::collections::BTreeMap;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{LinearMixtureMdp, TransitionFeature};
use crate::error::{check_len, domain, Result};

pub const MDP_FILE_FORMAT: &str = "linear-mixture-mdp/v1";

/// One nonzero `φ(next_state | state, action)[index] = value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiEntry {
    pub state: usize,
    pub action: usize,
    pub next_state: usize,
    pub index: usize,
    pub value: f64,
}

/// JSON form of a [`LinearMixtureMdp`]. `rewards` is indexed by
/// `state * num_actions + action`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpFile {
    pub format: String,
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    pub dim: usize,
    pub initial_state: usize,
    pub theta_star: Vec<f64>,
    pub rewards: Vec<f64>,
    pub phi: Vec<PhiEntry>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl MdpFile {
    pub fn from_mdp(mdp: &LinearMixtureMdp) -> Self {
        let mut phi = Vec::new();
        for s in 0..mdp.num_states() {
            for a in 0..mdp.num_actions() {
                for f in mdp.features(s, a) {
                    for &(index, value) in &f.entries {
                        phi.push(PhiEntry {
                            state: s,
                            action: a,
                            next_state: f.next_state,
                            index,
                            value,
                        });
                    }
                }
            }
        }
        Self {
            format: MDP_FILE_FORMAT.to_string(),
            num_states: mdp.num_states(),
            num_actions: mdp.num_actions(),
            horizon: mdp.horizon(),
            dim: mdp.dim(),
            initial_state: mdp.initial_state(),
            theta_star: mdp.theta_star().iter().copied().collect(),
            rewards: mdp.rewards.clone(),
            phi,
            metadata: BTreeMap::new(),
        }
    }

    pub fn to_mdp(&self) -> Result<LinearMixtureMdp> {
        if self.format != MDP_FILE_FORMAT {
            return Err(domain(format!("unknown instance format {:?}", self.format)));
        }
        check_len("theta_star", self.dim, self.theta_star.len())?;
        let (ns, na) = (self.num_states, self.num_actions);
        let mut features: Vec<Vec<TransitionFeature>> = vec![Vec::new(); ns * na];
        for e in &self.phi {
            if e.state >= ns || e.action >= na {
                return Err(domain(format!(
                    "phi entry ({}, {}) out of range",
                    e.state, e.action
                )));
            }
            let row = &mut features[e.state * na + e.action];
            match row.iter_mut().find(|f| f.next_state == e.next_state) {
                Some(f) => f.entries.push((e.index, e.value)),
                None => row.push(TransitionFeature {
                    next_state: e.next_state,
                    entries: vec![(e.index, e.value)],
                }),
            }
        }
        LinearMixtureMdp::new(
            ns,
            na,
            self.horizon,
            DVector::from_vec(self.theta_star.clone()),
            self.rewards.clone(),
            features,
            self.initial_state,
        )
    }
}
