use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ActionKind, DistanceBin, PayoffSpec, RoundState, TimeBin};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub reward: f64,
    pub time_cost: f64,
    /// Successor state. When `done` it only carries the final counters.
    pub next: RoundState,
    pub done: bool,
}

fn draw_round<R: Rng + ?Sized>(
    spec: &PayoffSpec,
    time_remaining: f64,
    bombs_remaining: u32,
    rng: &mut R,
) -> RoundState {
    let n = spec.grid_size as i32;
    let bomb_type = rng.random_range(1..=3u8);
    let agent_pos = [rng.random_range(0..n), rng.random_range(0..n)];
    let team_pos = [rng.random_range(0..n), rng.random_range(0..n)];
    let distance_raw =
        ((agent_pos[0] - team_pos[0]).abs() + (agent_pos[1] - team_pos[1]).abs()) as f64;
    RoundState {
        bomb_type,
        distance_raw,
        distance_bin: DistanceBin::from_value(distance_raw, spec.distance_cuts),
        time_remaining,
        time_bin: TimeBin::from_value(time_remaining, spec.time_cuts()),
        bombs_remaining,
        agent_pos,
        team_pos,
    }
}

/// First round of an episode drawn from `rng`.
pub fn initial_state<R: Rng + ?Sized>(spec: &PayoffSpec, rng: &mut R) -> RoundState {
    draw_round(spec, spec.episode_time_limit, spec.n_bombs, rng)
}

/// First round of the episode identified by `seed`.
pub fn new_episode(spec: &PayoffSpec, seed: u64) -> Result<RoundState> {
    spec.validate()?;
    Ok(initial_state(spec, &mut ChaCha8Rng::seed_from_u64(seed)))
}

/// Applies `action` in `state`. The next bomb and positions come from `rng`.
pub fn step<R: Rng + ?Sized>(
    state: &RoundState,
    action: ActionKind,
    spec: &PayoffSpec,
    rng: &mut R,
) -> Result<StepOutcome> {
    if state.is_terminal() {
        return Err(Error::Usage("step called on a terminal state".into()));
    }
    let reward = spec.reward(state.bomb_type, action);
    let time_cost = spec.time_cost(state.bomb_type, state.distance_raw, action);
    let bombs_remaining = state.bombs_remaining - 1;
    let time_left = state.time_remaining - time_cost;
    let done = bombs_remaining == 0 || time_left <= 0.0;
    let next = if done {
        let time_remaining = time_left.max(0.0);
        RoundState {
            bombs_remaining,
            time_remaining,
            time_bin: TimeBin::from_value(time_remaining, spec.time_cuts()),
            ..state.clone()
        }
    } else {
        draw_round(spec, time_left, bombs_remaining, rng)
    };
    Ok(StepOutcome { reward, time_cost, next, done })
}

/// A seeded episode that owns its RNG stream.
#[derive(Clone, Debug)]
pub struct Episode {
    spec: PayoffSpec,
    rng: ChaCha8Rng,
    state: RoundState,
    done: bool,
    total_reward: f64,
    elapsed: f64,
}

impl Episode {
    pub fn new(spec: PayoffSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = initial_state(&spec, &mut rng);
        Ok(Episode { spec, rng, state, done: false, total_reward: 0.0, elapsed: 0.0 })
    }

    pub fn state(&self) -> &RoundState {
        &self.state
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn total_reward(&self) -> f64 {
        self.total_reward
    }

    pub fn elapsed(&self) -> f64 {
        self.elapsed
    }

    pub fn step(&mut self, action: ActionKind) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::Usage("episode already finished".into()));
        }
        let out = step(&self.state, action, &self.spec, &mut self.rng)?;
        self.total_reward += out.reward;
        self.elapsed += out.time_cost;
        self.done = out.done;
        self.state = out.next.clone();
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::discretize;
    use proptest::prelude::*;

    fn fixed(bomb_type: u8, distance_raw: f64) -> RoundState {
        let spec = PayoffSpec::default();
        RoundState {
            bomb_type,
            distance_raw,
            distance_bin: DistanceBin::from_value(distance_raw, spec.distance_cuts),
            time_remaining: 200.0,
            time_bin: TimeBin::High,
            bombs_remaining: 12,
            agent_pos: [0, 0],
            team_pos: [0, distance_raw as i32],
        }
    }

    #[test]
    fn new_episode_is_seeded() {
        let spec = PayoffSpec::default();
        let a = new_episode(&spec, 42).unwrap();
        assert_eq!(a, new_episode(&spec, 42).unwrap());
        assert_eq!(a.bombs_remaining, 12);
        assert_eq!(a.time_remaining, 240.0);
        assert!(new_episode(&PayoffSpec { n_bombs: 0, ..spec }, 1).is_err());
    }

    #[test]
    fn level_three_payoffs() {
        let spec = PayoffSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = fixed(3, 4.0);
        assert_eq!(step(&s, ActionKind::Call, &spec, &mut rng).unwrap().reward, 30.0);
        assert_eq!(step(&s, ActionKind::Solo, &spec, &mut rng).unwrap().reward, 10.0);
    }

    #[test]
    fn call_cost_grows_with_distance() {
        let spec = PayoffSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let near = step(&fixed(2, 2.0), ActionKind::Call, &spec, &mut rng).unwrap();
        let far = step(&fixed(2, 9.0), ActionKind::Call, &spec, &mut rng).unwrap();
        assert!(far.time_cost > near.time_cost);
        assert_eq!(near.time_cost, 14.0);
        let solo = step(&fixed(2, 9.0), ActionKind::Solo, &spec, &mut rng).unwrap();
        assert_eq!(solo.time_cost, 15.0);
    }

    #[test]
    fn stepping_terminal_is_an_error() {
        let spec = PayoffSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = fixed(1, 1.0);
        s.bombs_remaining = 0;
        assert!(matches!(step(&s, ActionKind::Solo, &spec, &mut rng), Err(Error::Usage(_))));
        s.bombs_remaining = 3;
        s.time_remaining = 0.0;
        assert!(step(&s, ActionKind::Solo, &spec, &mut rng).is_err());
    }

    #[test]
    fn episode_refuses_steps_after_done() {
        let spec = PayoffSpec { n_bombs: 1, ..PayoffSpec::default() };
        let mut ep = Episode::new(spec, 3).unwrap();
        assert!(ep.step(ActionKind::Solo).unwrap().done);
        assert!(ep.step(ActionKind::Solo).is_err());
    }

    proptest! {
        #[test]
        fn episode_conservation_and_reproducibility(seed in any::<u64>(), script in proptest::collection::vec(any::<bool>(), 12)) {
            let spec = PayoffSpec::default();
            let run = || {
                let mut ep = Episode::new(spec.clone(), seed).unwrap();
                let mut trace = vec![ep.state().clone()];
                let (mut reward, mut time) = (0.0, 0.0);
                let mut was_done = false;
                for &call in &script {
                    if ep.is_done() { break; }
                    let a = if call { ActionKind::Call } else { ActionKind::Solo };
                    let out = ep.step(a).unwrap();
                    prop_assert!(!was_done);
                    was_done = out.done;
                    reward += out.reward;
                    time += out.time_cost;
                    prop_assert_eq!(discretize(&out.next, &spec), out.next.key());
                    prop_assert_eq!(out.done, out.next.is_terminal());
                    trace.push(out.next);
                }
                prop_assert_eq!(reward, ep.total_reward());
                prop_assert_eq!(time, ep.elapsed());
                prop_assert!(ep.is_done());
                Ok(trace)
            };
            let a = run()?;
            let b = run()?;
            prop_assert_eq!(a, b);
        }

        #[test]
        fn call_cost_is_affine_increasing(d1 in 0.0f64..30.0, d2 in 0.0f64..30.0) {
            let spec = PayoffSpec::default();
            prop_assume!(d1 < d2);
            let (c1, c2) = (spec.call_cost(d1), spec.call_cost(d2));
            prop_assert!(c2 > c1);
            prop_assert!(((c2 - c1) - spec.call_time_per_distance * (d2 - d1)).abs() < 1e-9);
        }
    }
}
