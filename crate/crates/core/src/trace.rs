use serde::{Deserialize, Serialize};

/// Which learning problem a trace came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    Bandit,
    Mdp,
}

impl Setting {
    pub fn as_str(self) -> &'static str {
        match self {
            Setting::Bandit => "bandit",
            Setting::Mdp => "mdp",
        }
    }
}

/// A named per-index diagnostic column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub name: String,
    pub values: Vec<f64>,
}

/// Per-round (bandit) or per-episode (MDP) pseudo-regret.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub setting: Setting,
    pub algorithm: String,
    pub seed: u64,
    pub instantaneous: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub diagnostics: Vec<Diagnostic>,
}

impl RegretTrace {
    pub fn new(setting: Setting, algorithm: impl Into<String>, seed: u64) -> Self {
        Self {
            setting,
            algorithm: algorithm.into(),
            seed,
            instantaneous: Vec::new(),
            cumulative: Vec::new(),
            diagnostics: Vec::new(),
        }
    }

    pub fn push(&mut self, regret: f64) {
        let prev = self.cumulative.last().copied().unwrap_or(0.0);
        self.instantaneous.push(regret);
        self.cumulative.push(prev + regret);
    }

    pub fn len(&self) -> usize {
        self.instantaneous.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instantaneous.is_empty()
    }

    /// Cumulative regret after `k` rounds (1-based); 0 for `k = 0`.
    pub fn cumulative_at(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }

    pub fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn diagnostic(&self, name: &str) -> Option<&[f64]> {
        self.diagnostics
            .iter()
            .find(|d| d.name == name)
            .map(|d| d.values.as_slice())
    }

    pub fn add_diagnostic(&mut self, name: impl Into<String>, values: Vec<f64>) {
        self.diagnostics.push(Diagnostic {
            name: name.into(),
            values,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cumulative_is_prefix_sum() {
        let mut t = RegretTrace::new(Setting::Bandit, "oful", 1);
        for r in [0.5, 0.0, 0.25] {
            t.push(r);
        }
        assert_eq!(t.cumulative, vec![0.5, 0.5, 0.75]);
        assert_eq!(t.cumulative_at(0), 0.0);
        assert_eq!(t.cumulative_at(2), 0.5);
        assert_eq!(t.total(), 0.75);
    }
}
