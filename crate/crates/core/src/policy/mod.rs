//! Expert policy: exact dynamic programming over the binned task MDP.

mod mdp;

pub use mdp::{
    build_mdp, cost_distribution, distance_bin_pmf, manhattan_distance_pmf, time_bin_interval,
    time_bin_transition, DiscreteMdp, MdpOptions, StateSpace,
};

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_range, Execution};
use crate::task::{discretize, ActionKind, PayoffSpec, RoundState, StateKey};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub gamma: f64,
    pub tol: f64,
    pub max_iterations: usize,
    pub max_states: usize,
    #[serde(skip)]
    pub exec: Execution,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            gamma: 1.0,
            tol: 1e-9,
            max_iterations: 100_000,
            max_states: 100_000,
            exec: Execution::Sequential,
        }
    }
}

/// Greedy choice with Solo winning exact (relative 1e-12) ties.
pub fn greedy(q_solo: f64, q_call: f64) -> ActionKind {
    let margin = 1e-12 * q_solo.abs().max(q_call.abs());
    if q_call > q_solo + margin {
        ActionKind::Call
    } else {
        ActionKind::Solo
    }
}

/// Deterministic state -> action table plus state values.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    spec: PayoffSpec,
    space: StateSpace,
    gamma: f64,
    tol: f64,
    actions: Vec<ActionKind>,
    values: Vec<f64>,
}

/// Sweeps the Bellman optimality operator until the sup-norm change is at
/// most `tol`, then extracts the greedy action table.
pub fn value_iteration(mdp: &DiscreteMdp, spec: &PayoffSpec, cfg: &SolverConfig) -> Result<Policy> {
    if !(0.0..=1.0).contains(&mdp.gamma) {
        return Err(Error::config("gamma must lie in [0, 1]"));
    }
    let n = mdp.n_states();
    let mut values = vec![0.0; n];
    let mut converged = false;
    for _ in 0..cfg.max_iterations {
        let next = map_range(cfg.exec, n, |s| {
            mdp.q_value(s, ActionKind::Solo, &values).max(mdp.q_value(s, ActionKind::Call, &values))
        });
        let residual = next.iter().zip(&values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        values = next;
        if residual <= cfg.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Solver(format!("no convergence within {} sweeps", cfg.max_iterations)));
    }
    let actions = (0..n)
        .map(|s| greedy(mdp.q_value(s, ActionKind::Solo, &values), mdp.q_value(s, ActionKind::Call, &values)))
        .collect();
    Ok(Policy { spec: spec.clone(), space: mdp.space, gamma: mdp.gamma, tol: cfg.tol, actions, values })
}

/// Builds the MDP for `spec` and solves it.
pub fn train_policy(spec: &PayoffSpec, cfg: &SolverConfig) -> Result<Policy> {
    let mdp = build_mdp(spec, &MdpOptions { gamma: cfg.gamma, max_states: cfg.max_states })?;
    value_iteration(&mdp, spec, cfg)
}

impl Policy {
    /// A policy given directly by a function of the key (values left at zero).
    /// Useful for baselines and for probing the explainer.
    pub fn from_fn(spec: &PayoffSpec, f: impl Fn(&StateKey) -> ActionKind) -> Policy {
        let space = StateSpace { n_bombs: spec.n_bombs };
        let actions = (0..space.len())
            .map(|i| space.key(i).map(|k| f(&k)).unwrap_or(ActionKind::Solo))
            .collect();
        Policy {
            spec: spec.clone(),
            space,
            gamma: 1.0,
            tol: 0.0,
            actions,
            values: vec![0.0; space.len()],
        }
    }

    pub fn spec(&self) -> &PayoffSpec {
        &self.spec
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn action_at(&self, key: &StateKey) -> Result<ActionKind> {
        self.space
            .index(key)
            .map(|i| self.actions[i])
            .ok_or_else(|| Error::Logic(format!("state {key} is not indexed by the policy")))
    }

    pub fn value_at(&self, key: &StateKey) -> Result<f64> {
        self.space
            .index(key)
            .map(|i| self.values[i])
            .ok_or_else(|| Error::Logic(format!("state {key} is not indexed by the policy")))
    }

    /// Expert recommendation for a live round.
    pub fn recommend(&self, state: &RoundState) -> Result<ActionKind> {
        if state.is_terminal() {
            return Err(Error::Logic("no recommendation for a terminal state".into()));
        }
        self.action_at(&discretize(state, &self.spec))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn actions(&self) -> &[ActionKind] {
        &self.actions
    }

    pub fn to_file(&self) -> PolicyFile {
        let entries = self
            .space
            .keys()
            .map(|k| {
                let i = self.space.index(&k).expect("indexed");
                (k.to_string(), PolicyEntry { action: self.actions[i], value: self.values[i] })
            })
            .collect();
        PolicyFile {
            gamma: self.gamma,
            tol: self.tol,
            spec_hash: self.spec.hash(),
            spec: self.spec.clone(),
            entries,
        }
    }

    pub fn from_file(file: PolicyFile) -> Result<Policy> {
        file.spec.validate()?;
        if file.spec.hash() != file.spec_hash {
            return Err(Error::Data("policy spec_hash does not match its spec".into()));
        }
        let space = StateSpace { n_bombs: file.spec.n_bombs };
        let mut actions = vec![ActionKind::Solo; space.len()];
        let mut values = vec![0.0; space.len()];
        let mut seen = 0;
        for (text, entry) in &file.entries {
            let key: StateKey = text.parse()?;
            let i = space
                .index(&key)
                .ok_or_else(|| Error::Data(format!("policy entry {text} outside the state space")))?;
            actions[i] = entry.action;
            values[i] = entry.value;
            seen += 1;
        }
        if seen != space.terminal() {
            return Err(Error::Data(format!("policy has {seen} entries, expected {}", space.terminal())));
        }
        Ok(Policy { spec: file.spec, space, gamma: file.gamma, tol: file.tol, actions, values })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Policy> {
        Policy::from_file(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Policy> {
        Policy::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// On-disk form: metadata plus `"bomb_type,distance_bin,time_bin,bombs_remaining"`
/// keyed entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyFile {
    pub gamma: f64,
    pub tol: f64,
    pub spec_hash: String,
    pub spec: PayoffSpec,
    pub entries: BTreeMap<String, PolicyEntry>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyEntry {
    pub action: ActionKind,
    pub value: f64,
}
