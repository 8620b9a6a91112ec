//! Variance-uncertainty-aware weighted ridge regression and the learners
//! built on it: WeightedOFUL+ for heterogeneous linear bandits and
//! HF-UCRL-VTR+ for episodic linear mixture MDPs, plus simulated
//! environments and exact dynamic-programming oracles.

pub mod bandit;
pub mod confidence;
pub mod error;
pub mod hf_ucrl;
pub mod mdp;
pub mod regression;
pub mod trace;

pub use error::{Error, Result};
pub use regression::{Observation, RegressorState};
pub use trace::{RegretTrace, Setting};
