//! Counterfactual explanations of single policy decisions.
//!
//! One feature is moved at a time by `b` ordinal steps in either direction
//! until the policy changes its action. The smallest such `b` measures how
//! much that feature drives the local decision. `bombs_remaining` is never
//! perturbed.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exec::{map_slice, Execution};
use crate::policy::Policy;
use crate::task::{discretize, ActionKind, Feature, RoundState, StateKey};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "-")]
    Down,
    #[serde(rename = "+")]
    Up,
}

/// Minimal flip for one feature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Perturbation {
    Flip {
        steps: usize,
        direction: Direction,
        counterfactual_state: StateKey,
        counterfactual_action: ActionKind,
    },
    Unreachable,
}

impl Perturbation {
    pub fn steps(&self) -> Option<usize> {
        match self {
            Perturbation::Flip { steps, .. } => Some(*steps),
            Perturbation::Unreachable => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureCounterfactual {
    pub feature: Feature,
    #[serde(flatten)]
    pub perturbation: Perturbation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualResult {
    pub state: StateKey,
    pub action: ActionKind,
    /// One entry per feature, in `Feature::ALL` order.
    pub features: Vec<FeatureCounterfactual>,
}

impl CounterfactualResult {
    pub fn get(&self, feature: Feature) -> &Perturbation {
        &self.features.iter().find(|f| f.feature == feature).expect("all features present").perturbation
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub feature: Feature,
    /// `None` when no perturbation of this feature flips the action.
    pub steps: Option<usize>,
}

/// Features ordered from most to least important.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportanceRanking(pub Vec<RankedFeature>);

impl ImportanceRanking {
    pub fn top(&self) -> Option<&RankedFeature> {
        self.0.first()
    }

    pub fn iter(&self) -> impl Iterator<Item = &RankedFeature> {
        self.0.iter()
    }

    pub fn all_unreachable(&self) -> bool {
        self.0.iter().all(|r| r.steps.is_none())
    }
}

fn scan(policy: &Policy, key: &StateKey, action: ActionKind, feature: Feature, direction: Direction) -> Result<Option<(usize, StateKey, ActionKind)>> {
    let here = key.ordinal(feature);
    let span = feature.cardinality();
    for steps in 1..span {
        let target = match direction {
            Direction::Down if steps <= here => here - steps,
            Direction::Up if here + steps < span => here + steps,
            _ => break,
        };
        let moved = key.with_ordinal(feature, target).expect("within domain");
        let other = policy.action_at(&moved)?;
        if other != action {
            return Ok(Some((steps, moved, other)));
        }
    }
    Ok(None)
}

/// Counterfactual search on an already discretized state.
pub fn counterfactual_at(policy: &Policy, key: &StateKey) -> Result<CounterfactualResult> {
    let action = policy.action_at(key)?;
    let mut features = Vec::with_capacity(3);
    for feature in Feature::ALL {
        let down = scan(policy, key, action, feature, Direction::Down)?;
        let up = scan(policy, key, action, feature, Direction::Up)?;
        // ties go to the negative direction
        let best = match (down, up) {
            (Some(d), Some(u)) if u.0 < d.0 => Some((u, Direction::Up)),
            (Some(d), _) => Some((d, Direction::Down)),
            (None, Some(u)) => Some((u, Direction::Up)),
            (None, None) => None,
        };
        let perturbation = match best {
            Some(((steps, counterfactual_state, counterfactual_action), direction)) => Perturbation::Flip {
                steps,
                direction,
                counterfactual_state,
                counterfactual_action,
            },
            None => Perturbation::Unreachable,
        };
        features.push(FeatureCounterfactual { feature, perturbation });
    }
    Ok(CounterfactualResult { state: *key, action, features })
}

/// Counterfactual search for a live round.
pub fn counterfactual_search(policy: &Policy, state: &RoundState) -> Result<CounterfactualResult> {
    counterfactual_at(policy, &discretize(state, policy.spec()))
}

/// Ascending by perturbation count, unreachable last, ties in feature order.
pub fn feature_importance(cf: &CounterfactualResult) -> ImportanceRanking {
    let mut ranked: Vec<RankedFeature> = Feature::ALL
        .iter()
        .map(|&feature| RankedFeature { feature, steps: cf.get(feature).steps() })
        .collect();
    ranked.sort_by(|a, b| match (a.steps, b.steps) {
        (Some(x), Some(y)) => x.cmp(&y).then(a.feature.cmp(&b.feature)),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => a.feature.cmp(&b.feature),
    });
    ImportanceRanking(ranked)
}

/// Explains every non-terminal state of the policy.
pub fn explain_all(policy: &Policy, exec: Execution) -> Result<Vec<CounterfactualResult>> {
    let keys: Vec<StateKey> = policy.space().keys().collect();
    map_slice(exec, &keys, |k| counterfactual_at(policy, k)).into_iter().collect()
}
