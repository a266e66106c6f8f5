use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ExperimentConfig;
use crate::engine::{ConditionKind, Engine, EngineConfig, EpisodeLog};
use crate::error::Result;
use crate::exec::{map_range, mix_seed};
use crate::human::{HumanProfile, SimHuman};
use crate::policy::Policy;

/// Seed for one participant of one condition.
pub fn participant_seed(seed: u64, condition: ConditionKind, participant: u32) -> u64 {
    mix_seed(mix_seed(seed, condition as u64), participant as u64)
}

/// Lets `human` play `engine` until it finishes or `max_rounds` rounds are logged.
pub fn simulate(engine: &mut Engine, human: &mut SimHuman, rng: &mut ChaCha8Rng, max_rounds: Option<usize>) -> Result<()> {
    while !engine.is_finished() && max_rounds.is_none_or(|m| engine.log().len() < m) {
        let key = engine.key();
        let recommended = engine.intervention().map(|iv| iv.recommended);
        let emphasized = engine.intervention().map(|iv| iv.feature).or(engine.tip().map(|t| t.feature));
        let action = human.act(&key, recommended, rng);
        engine.apply(action)?;
        if let Some(feature) = emphasized {
            human.absorb(feature, rng);
        }
    }
    Ok(())
}

pub fn run_participant(
    config: Arc<EngineConfig>,
    policy: Arc<Policy>,
    profile: &HumanProfile,
    condition: ConditionKind,
    participant: u32,
    seed: u64,
    max_rounds: Option<usize>,
) -> Result<EpisodeLog> {
    let mut engine = Engine::new(config, policy.clone(), condition, seed)?;
    let mut human = SimHuman::new(profile.clone(), policy)?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 3));
    simulate(&mut engine, &mut human, &mut rng, max_rounds)?;
    Ok(engine.into_log(participant, &profile.name))
}

/// All participants of one condition, in participant order.
pub fn run_condition(cfg: &ExperimentConfig, policy: &Arc<Policy>, condition: ConditionKind) -> Result<Vec<EpisodeLog>> {
    cfg.validate()?;
    let population = cfg.resolve_population()?;
    let engine_cfg = Arc::new(cfg.engine.clone());
    map_range(cfg.execution, cfg.participants as usize, |i| {
        let i = i as u32;
        let profile = &population[i as usize % population.len()];
        run_participant(engine_cfg.clone(), policy.clone(), profile, condition, i, participant_seed(cfg.seed, condition, i), None)
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Execution;
    use crate::policy::train_policy;

    fn small(condition: ConditionKind, exec: Execution) -> Vec<EpisodeLog> {
        let cfg = ExperimentConfig {
            participants: 6,
            conditions: vec![condition],
            population: vec!["time_blind_myopic".into(), "noisy_expert".into()],
            engine: EngineConfig { trials: 4, ..EngineConfig::default() },
            execution: exec,
            ..ExperimentConfig::default()
        };
        let policy = Arc::new(train_policy(&cfg.engine.spec, &cfg.engine.solver).unwrap());
        run_condition(&cfg, &policy, condition).unwrap()
    }

    #[test]
    fn none_condition_never_intervenes() {
        for log in small(ConditionKind::None, Execution::Parallel) {
            assert!(log.rounds.iter().all(|r| r.intervention.is_none() && r.tip.is_none()));
            assert_eq!(log.trial_scores.len(), 4);
        }
    }

    #[test]
    fn execution_mode_does_not_change_results() {
        assert_eq!(small(ConditionKind::TomXrl, Execution::Parallel), small(ConditionKind::TomXrl, Execution::Sequential));
    }

    #[test]
    fn profiles_alternate() {
        let logs = small(ConditionKind::None, Execution::Sequential);
        let names: Vec<_> = logs.iter().map(|l| l.profile.as_str()).collect();
        assert_eq!(names[..3], ["time_blind_myopic", "noisy_expert", "time_blind_myopic"]);
    }

    #[test]
    fn round_cap_is_respected() {
        let cfg = Arc::new(EngineConfig { trials: 50, ..EngineConfig::default() });
        let policy = Arc::new(train_policy(&cfg.spec, &cfg.solver).unwrap());
        let profile = &HumanProfile::library()[0];
        let log = run_participant(cfg, policy, profile, ConditionKind::None, 0, 5, Some(37)).unwrap();
        assert_eq!(log.rounds.len(), 37);
    }
}
