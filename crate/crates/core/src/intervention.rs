//! Deciding when to intervene and what to say.
//!
//! An intervention is issued only when the Theory-of-Mind model is
//! initialized, its predicted human action differs from the expert action, and
//! the prediction is strictly more confident than the model's threshold. The
//! explanation emphasizes the most important feature (by counterfactual
//! distance) that the human's learned network does not yet link to the action.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::task::{ActionKind, Feature, StateKey};
use crate::tom::{Dag, TomModel};
use crate::xrl::{counterfactual_at, feature_importance, ImportanceRanking};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterventionSource {
    /// Gated by the Theory-of-Mind prediction.
    TomXrl,
    /// Issued through a random frequency filter.
    XrlOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intervention {
    pub round: u64,
    pub source: InterventionSource,
    pub recommended: ActionKind,
    pub feature: Feature,
    pub text: String,
    /// False when no single-feature perturbation flips the expert action; the
    /// text then carries only the recommendation.
    pub counterfactual: bool,
    pub a_pred: Option<ActionKind>,
    pub confidence: Option<f64>,
    pub threshold: Option<f64>,
}

impl Intervention {
    /// Re-checks the issuing gates from the logged values.
    pub fn satisfies_gates(&self) -> bool {
        match (self.a_pred, self.confidence, self.threshold) {
            (Some(pred), Some(c), Some(t)) => c > t && pred != self.recommended,
            _ => false,
        }
    }
}

/// Sentence templates: a recommendation clause per action and a reason clause
/// per (action, feature).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Templates {
    pub recommend: BTreeMap<ActionKind, String>,
    pub explain: BTreeMap<ActionKind, BTreeMap<Feature, String>>,
}

impl Default for Templates {
    fn default() -> Self {
        let recommend = BTreeMap::from([
            (ActionKind::Solo, "Consider soloing this round.".to_string()),
            (ActionKind::Call, "Consider calling for help this round.".to_string()),
        ]);
        let solo = BTreeMap::from([
            (Feature::BombType, "Easier bombs score more points when you defuse them alone.".to_string()),
            (Feature::Distance, "Your teammates are far away, so waiting for them may cost more time than the extra points are worth.".to_string()),
            (Feature::Time, "Calling for help may cost too much time and reduce the number of bombs you can attend to.".to_string()),
        ]);
        let call = BTreeMap::from([
            (Feature::BombType, "Difficult bombs score much more when you call for help.".to_string()),
            (Feature::Distance, "Your teammates are close by, so help will arrive quickly.".to_string()),
            (Feature::Time, "You still have enough time to wait for your teammates and earn the higher score.".to_string()),
        ]);
        Templates {
            recommend,
            explain: BTreeMap::from([(ActionKind::Solo, solo), (ActionKind::Call, call)]),
        }
    }
}

impl Templates {
    pub fn validate(&self) -> Result<()> {
        for action in ActionKind::ALL {
            self.recommendation(action)?;
            for feature in Feature::ALL {
                self.reason(action, feature)?;
            }
        }
        Ok(())
    }

    pub fn recommendation(&self, action: ActionKind) -> Result<&str> {
        self.recommend
            .get(&action)
            .map(String::as_str)
            .ok_or_else(|| Error::Config(format!("missing recommendation template for {action}")))
    }

    pub fn reason(&self, action: ActionKind, feature: Feature) -> Result<&str> {
        self.explain
            .get(&action)
            .and_then(|m| m.get(&feature))
            .map(String::as_str)
            .ok_or_else(|| Error::Config(format!("missing explanation template for {action}/{feature}")))
    }

    /// Full intervention sentence.
    pub fn render(&self, recommended: ActionKind, feature: Feature) -> Result<String> {
        Ok(format!("{} {}", self.recommendation(recommended)?, self.reason(recommended, feature)?))
    }

    /// Generic strategy tip after the human played `last`: the reason clause
    /// for the feature that drives the cost of `last`, without a
    /// recommendation.
    pub fn tip(&self, last: ActionKind) -> Result<(Feature, String)> {
        let feature = match last {
            // calling costs time proportional to the distance
            ActionKind::Call => Feature::Distance,
            // solo points depend on the bomb level
            ActionKind::Solo => Feature::BombType,
        };
        Ok((feature, self.reason(last.other(), feature)?.to_string()))
    }
}

/// Most important feature whose edge to the action is missing from the human
/// network; falls back to the most important feature overall.
pub fn select_emphasis(ranking: &ImportanceRanking, human_dag: &Dag) -> Feature {
    let parents = human_dag.action_parents();
    ranking
        .iter()
        .filter(|r| r.steps.is_some())
        .find(|r| !parents.contains(&r.feature))
        .or_else(|| ranking.top())
        .map(|r| r.feature)
        .unwrap_or(Feature::BombType)
}

/// Expert action, emphasized feature and sentence for `key`. With
/// `human_dag = None` the top-ranked feature is used.
pub fn explain(
    policy: &Policy,
    key: &StateKey,
    human_dag: Option<&Dag>,
    templates: &Templates,
) -> Result<(ActionKind, Feature, String, bool)> {
    let cf = counterfactual_at(policy, key)?;
    let ranking = feature_importance(&cf);
    let feature = match human_dag {
        Some(dag) => select_emphasis(&ranking, dag),
        None => ranking.top().map(|r| r.feature).unwrap_or(Feature::BombType),
    };
    let counterfactual = !ranking.all_unreachable();
    let text = if counterfactual {
        templates.render(cf.action, feature)?
    } else {
        templates.recommendation(cf.action)?.to_string()
    };
    Ok((cf.action, feature, text, counterfactual))
}

/// Issues an intervention iff the model is initialized, its confidence is
/// strictly above its threshold, and its predicted action differs from the
/// expert's.
pub fn decide(
    key: &StateKey,
    round: u64,
    tom: &TomModel,
    policy: &Policy,
    templates: &Templates,
) -> Result<Option<Intervention>> {
    if !tom.is_initialized() {
        return Ok(None);
    }
    let (a_pred, confidence) = tom.predict(key)?;
    let expert = policy.action_at(key)?;
    if !(confidence > tom.threshold() && a_pred != expert) {
        return Ok(None);
    }
    let (recommended, feature, text, counterfactual) = explain(policy, key, Some(tom.dag()), templates)?;
    debug_assert_eq!(recommended, expert);
    Ok(Some(Intervention {
        round,
        source: InterventionSource::TomXrl,
        recommended,
        feature,
        text,
        counterfactual,
        a_pred: Some(a_pred),
        confidence: Some(confidence),
        threshold: Some(tom.threshold()),
    }))
}
