use serde::{Deserialize, Serialize};

use super::cpd::{fit_mle, Cpds};
use super::dag::{ConstraintSet, Dag, Node, Observation};
use super::score::n_configs;
use super::search::hill_climb;
use crate::error::{Error, Result};
use crate::task::{ActionKind, Feature, StateKey};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TomConfig {
    /// Observations accumulated before each structure-learning pass.
    pub window: usize,
    /// BDeu equivalent sample size.
    pub ess: f64,
    /// Row mass of the uniform Dirichlet prior used by the online estimator.
    pub prior_ess: f64,
    pub threshold_grid: Vec<f64>,
    pub initial_threshold: f64,
    pub constraints: ConstraintSet,
}

impl Default for TomConfig {
    fn default() -> Self {
        TomConfig {
            window: 12,
            ess: 10.0,
            prior_ess: 2.0,
            threshold_grid: (0..10).map(|i| 0.5 + 0.05 * i as f64).collect(),
            initial_threshold: 0.6,
            constraints: ConstraintSet::default(),
        }
    }
}

impl TomConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::config("window must be positive"));
        }
        if self.ess.is_nan() || self.ess <= 0.0 || self.prior_ess.is_nan() || self.prior_ess <= 0.0 {
            return Err(Error::config("ess and prior_ess must be positive"));
        }
        if self.threshold_grid.is_empty() {
            return Err(Error::config("threshold grid is empty"));
        }
        if self.threshold_grid.iter().chain([&self.initial_threshold]).any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::config("thresholds must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// A prediction scored against what the human actually did.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub predicted: ActionKind,
    pub confidence: f64,
    pub actual: ActionKind,
}

/// Grid value with the best accuracy among predictions at least that
/// confident. Zero coverage counts as accuracy 0; ties go to the smallest
/// threshold.
pub fn update_threshold(records: &[PredictionRecord], grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::config("threshold grid is empty"));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best = (f64::NEG_INFINITY, sorted[0]);
    for &t in &sorted {
        let covered = records.iter().filter(|r| r.confidence >= t);
        let (n, correct) = covered.fold((0usize, 0usize), |(n, c), r| (n + 1, c + usize::from(r.predicted == r.actual)));
        let accuracy = if n == 0 { 0.0 } else { correct as f64 / n as f64 };
        if accuracy > best.0 {
            best = (accuracy, t);
        }
    }
    Ok(best.1)
}

/// What a single [`TomModel::observe`] call did.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TomStepReport {
    pub maintenance: bool,
    pub structure_changed: bool,
}

/// Online Bayesian-network model of one human's decision rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TomModel {
    config: TomConfig,
    dag: Dag,
    cpds: Cpds,
    memory: Vec<Observation>,
    threshold: f64,
    initialized: bool,
}

/// JSON snapshot: structure, pseudo-counts and threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TomSnapshot {
    pub dag: Dag,
    pub cpds: Cpds,
    pub threshold: f64,
    pub initialized: bool,
}

impl TomModel {
    pub fn new(config: TomConfig) -> Result<TomModel> {
        config.validate()?;
        let dag = Dag::empty();
        Ok(TomModel {
            cpds: Cpds::with_prior(&dag, config.prior_ess),
            threshold: config.initial_threshold,
            dag,
            memory: Vec::with_capacity(config.window + 1),
            initialized: false,
            config,
        })
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn cpds(&self) -> &Cpds {
        &self.cpds
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized
    }

    pub fn memory(&self) -> &[Observation] {
        &self.memory
    }

    pub fn config(&self) -> &TomConfig {
        &self.config
    }

    pub fn action_parents(&self) -> Vec<Feature> {
        self.dag.action_parents()
    }

    /// Posterior over actions given the observed features, regardless of
    /// initialization.
    pub fn action_posterior(&self, key: &StateKey) -> [f64; 2] {
        self.posterior_of(&Observation::new(key, ActionKind::Solo))
    }

    fn posterior_of(&self, obs: &Observation) -> [f64; 2] {
        let row = self.cpds.node(Node::Action).row(obs);
        [row[0], row[1]]
    }

    /// Most probable human action and its posterior probability.
    pub fn predict(&self, key: &StateKey) -> Result<(ActionKind, f64)> {
        if !self.initialized {
            return Err(Error::State("theory-of-mind model has not completed a structure pass".into()));
        }
        Ok(self.mode(key))
    }

    fn mode(&self, key: &StateKey) -> (ActionKind, f64) {
        self.mode_of(&Observation::new(key, ActionKind::Solo))
    }

    /// Ties go to the action with more total evidence in the action table,
    /// then to Solo.
    fn mode_of(&self, obs: &Observation) -> (ActionKind, f64) {
        let [solo, call] = self.posterior_of(obs);
        let call_wins = if call == solo { self.call_leads_overall() } else { call > solo };
        if call_wins {
            (ActionKind::Call, call)
        } else {
            (ActionKind::Solo, solo)
        }
    }

    fn call_leads_overall(&self) -> bool {
        let totals = self.cpds.node(Node::Action).counts.iter().fold([0.0; 2], |t, row| [t[0] + row[0], t[1] + row[1]]);
        totals[1] > totals[0]
    }

    /// Feeds one (state, human action) pair. Once the memory holds more than
    /// `window` pairs the structure is re-learned on it; parameters are
    /// re-estimated from the memory only if the structure changed, the
    /// confidence threshold is re-tuned, and the memory is cleared.
    pub fn observe(&mut self, key: &StateKey, action: ActionKind) -> Result<TomStepReport> {
        let obs = Observation::new(key, action);
        self.memory.push(obs);
        self.cpds.observe(&obs, self.config.prior_ess);
        if self.memory.len() <= self.config.window {
            return Ok(TomStepReport::default());
        }
        let learned = hill_climb(&self.memory, &self.config.constraints, self.config.ess)?;
        let structure_changed = learned != self.dag;
        if structure_changed {
            self.cpds = fit_mle(&learned, &self.memory);
            self.dag = learned;
        }
        let records: Vec<PredictionRecord> = self
            .memory
            .iter()
            .map(|o| {
                let (predicted, confidence) = self.mode_of(o);
                PredictionRecord { predicted, confidence, actual: ActionKind::from_index(o.get(Node::Action)) }
            })
            .collect();
        self.threshold = update_threshold(&records, &self.config.threshold_grid)?;
        self.memory.clear();
        self.initialized = true;
        Ok(TomStepReport { maintenance: true, structure_changed })
    }

    /// Rebuilds a model from a snapshot, with an empty memory.
    pub fn restore(config: TomConfig, snapshot: TomSnapshot) -> Result<TomModel> {
        config.validate()?;
        let TomSnapshot { dag, cpds, threshold, initialized } = snapshot;
        if !dag.is_acyclic() || !config.constraints.admits(&dag) {
            return Err(Error::Data(format!("snapshot structure {dag} is not admissible")));
        }
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::Data("snapshot threshold outside [0, 1]".into()));
        }
        let shape_ok = cpds.nodes.len() == Node::ALL.len()
            && Node::ALL.iter().all(|&n| {
                let c = cpds.node(n);
                c.node == n
                    && c.parent_mask == dag.parent_mask(n)
                    && c.counts.len() == n_configs(c.parent_mask)
                    && c.probs.len() == c.counts.len()
                    && c.counts.iter().chain(&c.probs).all(|row| row.len() == n.cardinality())
                    && c.counts.iter().flatten().all(|x| *x >= 0.0)
            });
        if !shape_ok || !cpds.rows_normalized(1e-9) {
            return Err(Error::Data("snapshot tables do not match the structure".into()));
        }
        Ok(TomModel { memory: Vec::with_capacity(config.window + 1), config, dag, cpds, threshold, initialized })
    }

    pub fn snapshot(&self) -> TomSnapshot {
        TomSnapshot {
            dag: self.dag,
            cpds: self.cpds.clone(),
            threshold: self.threshold,
            initialized: self.initialized,
        }
    }
}

/// Functional form of [`TomModel::observe`].
pub fn tom_step(mut model: TomModel, key: &StateKey, action: ActionKind) -> Result<(TomModel, TomStepReport)> {
    let report = model.observe(key, action)?;
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::{DistanceBin, TimeBin};

    fn key(b: u8, d: usize, t: usize) -> StateKey {
        StateKey {
            bomb_type: b,
            distance_bin: DistanceBin::ALL[d],
            time_bin: TimeBin::ALL[t],
            bombs_remaining: 5,
        }
    }

    fn rec(confidence: f64, correct: bool) -> PredictionRecord {
        PredictionRecord {
            predicted: ActionKind::Call,
            confidence,
            actual: if correct { ActionKind::Call } else { ActionKind::Solo },
        }
    }

    #[test]
    fn threshold_all_correct_takes_smallest() {
        let records = [rec(0.55, true), rec(0.8, true), rec(0.95, true)];
        assert_eq!(update_threshold(&records, &[0.9, 0.5, 0.7]).unwrap(), 0.5);
    }

    #[test]
    fn threshold_picks_confident_band() {
        // only the >= 0.9 rounds are correct
        let records = [rec(0.6, false), rec(0.75, false), rec(0.8, true), rec(0.85, false), rec(0.92, true), rec(0.97, true)];
        // direct evaluation: t=0.5 -> 3/6, t=0.7 -> 3/5, t=0.9 -> 2/2
        assert_eq!(update_threshold(&records, &[0.5, 0.7, 0.9]).unwrap(), 0.9);
    }

    #[test]
    fn threshold_zero_coverage_never_wins() {
        let records = [rec(0.6, true), rec(0.65, false)];
        assert_eq!(update_threshold(&records, &[0.5, 0.99]).unwrap(), 0.5);
        // with no records every grid value scores 0: smallest wins
        assert_eq!(update_threshold(&[], &[0.8, 0.6]).unwrap(), 0.6);
        assert!(matches!(update_threshold(&records, &[]), Err(Error::Config(_))));
    }

    #[test]
    fn no_structure_learning_before_window() {
        let mut m = TomModel::new(TomConfig::default()).unwrap();
        for i in 0..12 {
            let r = m.observe(&key(3, i % 3, 0), ActionKind::Call).unwrap();
            assert!(!r.maintenance);
            assert!(!m.is_initialized());
            assert!(m.predict(&key(3, 0, 0)).is_err());
        }
        let r = m.observe(&key(3, 0, 0), ActionKind::Call).unwrap();
        assert!(r.maintenance);
        assert!(m.is_initialized());
        assert!(m.memory().is_empty());
    }

    #[test]
    fn unchanged_structure_keeps_pseudo_counts() {
        let mut m = TomModel::new(TomConfig::default()).unwrap();
        // action independent of everything: structure stays empty
        for i in 0..13usize {
            let a = if i % 2 == 0 { ActionKind::Solo } else { ActionKind::Call };
            m.observe(&key((i % 3) as u8 + 1, (i / 3) % 3, i % 3), a).unwrap();
        }
        assert!(m.is_initialized());
        assert_eq!(*m.dag(), Dag::empty());
        // prior (1, 1) plus 7 Solo and 6 Call
        assert_eq!(m.cpds().node(Node::Action).counts[0], vec![8.0, 7.0]);
    }

    #[test]
    fn learns_type_dependence_and_predicts() {
        let mut m = TomModel::new(TomConfig::default()).unwrap();
        for i in 0..13usize {
            let b = (i % 3) as u8 + 1;
            let a = if b == 1 { ActionKind::Solo } else { ActionKind::Call };
            m.observe(&key(b, (i / 3) % 3, (i / 9) % 3), a).unwrap();
        }
        assert_eq!(m.action_parents(), vec![Feature::BombType]);
        let (a, c) = m.predict(&key(3, 2, 0)).unwrap();
        assert_eq!((a, c), (ActionKind::Call, 1.0));
        assert!(m.cpds().rows_normalized(1e-9));
    }

    #[test]
    fn empty_parent_set_predicts_marginal_mode() {
        let no_edges = Node::OBSERVED.iter().fold(ConstraintSet::default(), |c, &n| c.forbid(n, Node::Action));
        let mut m = TomModel::new(TomConfig { window: 2, constraints: no_edges, ..TomConfig::default() }).unwrap();
        m.observe(&key(1, 0, 0), ActionKind::Call).unwrap();
        m.observe(&key(2, 1, 1), ActionKind::Call).unwrap();
        m.observe(&key(3, 2, 2), ActionKind::Solo).unwrap();
        assert_eq!(*m.dag(), Dag::empty());
        // counts (1 + 1, 1 + 2)
        let (a, c) = m.predict(&key(3, 2, 2)).unwrap();
        assert_eq!(a, ActionKind::Call);
        assert!((c - 0.6).abs() < 1e-12);
    }

    #[test]
    fn snapshot_serializes() {
        let m = TomModel::new(TomConfig::default()).unwrap();
        let json = serde_json::to_string(&m.snapshot()).unwrap();
        let back: TomSnapshot = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m.snapshot());
        let restored = TomModel::restore(TomConfig::default(), back.clone()).unwrap();
        assert_eq!(restored, m);
        let mut broken = back;
        broken.cpds.nodes[3].probs[0] = vec![0.9, 0.9];
        assert!(TomModel::restore(TomConfig::default(), broken).is_err());
    }
}
