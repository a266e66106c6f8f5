use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::task::{ActionKind, DistanceBin, PayoffSpec, StateKey, TimeBin};

/// Indexing of the discretized state space. Index `terminal()` is the single
/// absorbing state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSpace {
    pub n_bombs: u32,
}

impl StateSpace {
    pub fn len(&self) -> usize {
        27 * self.n_bombs as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn terminal(&self) -> usize {
        self.len() - 1
    }

    pub fn index(&self, key: &StateKey) -> Option<usize> {
        if !(1..=3).contains(&key.bomb_type) || key.bombs_remaining == 0 || key.bombs_remaining > self.n_bombs {
            return None;
        }
        let cell = ((key.bomb_type as usize - 1) * 3 + key.distance_bin.index()) * 3 + key.time_bin.index();
        Some(cell * self.n_bombs as usize + (key.bombs_remaining as usize - 1))
    }

    pub fn key(&self, index: usize) -> Option<StateKey> {
        if index >= self.terminal() {
            return None;
        }
        let n = self.n_bombs as usize;
        let bombs_remaining = (index % n) as u32 + 1;
        let cell = index / n;
        Some(StateKey {
            bomb_type: (cell / 9) as u8 + 1,
            distance_bin: DistanceBin::from_index((cell / 3) % 3)?,
            time_bin: TimeBin::from_index(cell % 3)?,
            bombs_remaining,
        })
    }

    /// All non-terminal keys in index order.
    pub fn keys(&self) -> impl Iterator<Item = StateKey> + '_ {
        (0..self.terminal()).filter_map(move |i| self.key(i))
    }
}

/// Tabular MDP over binned states, derived in closed form from the episode
/// generator. Within a time bin the remaining time is modelled as uniform.
#[derive(Clone, Debug)]
pub struct DiscreteMdp {
    pub space: StateSpace,
    pub gamma: f64,
    /// `rewards[s][a]`.
    pub rewards: Vec<[f64; 2]>,
    /// `transitions[s][a]` as sparse `(next, probability)` rows.
    pub transitions: Vec<[Vec<(usize, f64)>; 2]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdpOptions {
    pub gamma: f64,
    pub max_states: usize,
}

impl Default for MdpOptions {
    fn default() -> Self {
        MdpOptions { gamma: 1.0, max_states: 100_000 }
    }
}

/// Distribution of the Manhattan distance between two cells drawn uniformly
/// and independently from an `n x n` grid; entry `v` is `P(distance = v)`.
pub fn manhattan_distance_pmf(n: u32) -> Vec<f64> {
    let n = n as usize;
    let total = (n * n) as f64;
    // |dx| for one axis
    let axis: Vec<f64> = (0..n)
        .map(|k| if k == 0 { n as f64 / total } else { 2.0 * (n - k) as f64 / total })
        .collect();
    let mut pmf = vec![0.0; 2 * n - 1];
    for (i, px) in axis.iter().enumerate() {
        for (j, py) in axis.iter().enumerate() {
            pmf[i + j] += px * py;
        }
    }
    pmf
}

/// Probability that each distance bin is observed in a fresh round.
pub fn distance_bin_pmf(spec: &PayoffSpec) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (v, p) in manhattan_distance_pmf(spec.grid_size).into_iter().enumerate() {
        out[DistanceBin::from_value(v as f64, spec.distance_cuts).index()] += p;
    }
    out
}

/// `(lo, hi]` interval covered by a time bin.
pub fn time_bin_interval(spec: &PayoffSpec, bin: TimeBin) -> (f64, f64) {
    let [c1, c2] = spec.time_cuts();
    match bin {
        TimeBin::Low => (0.0, c1),
        TimeBin::Medium => (c1, c2),
        TimeBin::High => (c2, spec.episode_time_limit),
    }
}

/// Outcome distribution `[low, medium, high, expired]` of the time bin after
/// spending `cost` seconds from a time uniform on the bin `from`.
pub fn time_bin_transition(spec: &PayoffSpec, from: TimeBin, cost: f64) -> [f64; 4] {
    let (lo, hi) = time_bin_interval(spec, from);
    let width = hi - lo;
    let (a, b) = (lo - cost, hi - cost);
    let overlap = |x: f64, y: f64| (b.min(y) - a.max(x)).max(0.0) / width;
    let mut out = [0.0; 4];
    for bin in TimeBin::ALL {
        let (x, y) = time_bin_interval(spec, bin);
        out[bin.index()] = overlap(x, y);
    }
    out[3] = overlap(f64::NEG_INFINITY, 0.0);
    out
}

/// Possible time costs of `action` in `key`, with probabilities.
pub fn cost_distribution(spec: &PayoffSpec, key: &StateKey, action: ActionKind) -> Vec<(f64, f64)> {
    match action {
        ActionKind::Solo => vec![(spec.solo_cost(key.bomb_type), 1.0)],
        ActionKind::Call => {
            let pmf = manhattan_distance_pmf(spec.grid_size);
            let in_bin: Vec<(f64, f64)> = pmf
                .iter()
                .enumerate()
                .filter(|(v, p)| **p > 0.0 && DistanceBin::from_value(*v as f64, spec.distance_cuts) == key.distance_bin)
                .map(|(v, p)| (v as f64, *p))
                .collect();
            let mass: f64 = in_bin.iter().map(|(_, p)| p).sum();
            in_bin.into_iter().map(|(v, p)| (spec.call_cost(v), p / mass)).collect()
        }
    }
}

pub fn build_mdp(spec: &PayoffSpec, opts: &MdpOptions) -> Result<DiscreteMdp> {
    spec.validate()?;
    if !(0.0..=1.0).contains(&opts.gamma) {
        return Err(Error::config("gamma must lie in [0, 1]"));
    }
    let space = StateSpace { n_bombs: spec.n_bombs };
    if space.len() > opts.max_states {
        return Err(Error::Config(format!(
            "state space of {} exceeds the cap of {}",
            space.len(),
            opts.max_states
        )));
    }
    let dist_pmf = distance_bin_pmf(spec);
    let terminal = space.terminal();
    let mut rewards = vec![[0.0; 2]; space.len()];
    let mut transitions: Vec<[Vec<(usize, f64)>; 2]> = vec![[vec![(terminal, 1.0)], vec![(terminal, 1.0)]]; space.len()];

    for (s, key) in space.keys().enumerate() {
        debug_assert_eq!(space.index(&key), Some(s));
        for action in ActionKind::ALL {
            rewards[s][action.index()] = spec.reward(key.bomb_type, action);
            if key.bombs_remaining == 1 {
                continue;
            }
            let mut time_out = [0.0; 4];
            for (cost, p) in cost_distribution(spec, &key, action) {
                let t = time_bin_transition(spec, key.time_bin, cost);
                for (acc, x) in time_out.iter_mut().zip(t) {
                    *acc += p * x;
                }
            }
            let mut row = Vec::with_capacity(28);
            if time_out[3] > 0.0 {
                row.push((terminal, time_out[3]));
            }
            for time_bin in TimeBin::ALL {
                let pt = time_out[time_bin.index()];
                if pt <= 0.0 {
                    continue;
                }
                for bomb_type in 1..=3u8 {
                    for distance_bin in DistanceBin::ALL {
                        let p = pt * dist_pmf[distance_bin.index()] / 3.0;
                        if p > 0.0 {
                            let next = StateKey { bomb_type, distance_bin, time_bin, bombs_remaining: key.bombs_remaining - 1 };
                            row.push((space.index(&next).expect("in range"), p));
                        }
                    }
                }
            }
            transitions[s][action.index()] = row;
        }
    }
    Ok(DiscreteMdp { space, gamma: opts.gamma, rewards, transitions })
}

impl DiscreteMdp {
    /// One-step backup `R(s,a) + gamma * sum T(s,a,s') V(s')`.
    pub fn q_value(&self, s: usize, action: ActionKind, values: &[f64]) -> f64 {
        let a = action.index();
        let future: f64 = self.transitions[s][a].iter().map(|&(n, p)| p * values[n]).sum();
        self.rewards[s][a] + self.gamma * future
    }

    pub fn n_states(&self) -> usize {
        self.space.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        let space = StateSpace { n_bombs: 5 };
        for i in 0..space.terminal() {
            let key = space.key(i).unwrap();
            assert_eq!(space.index(&key), Some(i));
        }
        assert_eq!(space.keys().count(), 27 * 5);
        assert!(space.key(space.terminal()).is_none());
    }

    #[test]
    fn distance_pmf_matches_enumeration() {
        for n in [1u32, 2, 5, 10] {
            let pmf = manhattan_distance_pmf(n);
            let mut counts = vec![0u64; pmf.len()];
            let n = n as i32;
            for (ax, ay, bx, by) in (0..n).flat_map(|ax| (0..n).flat_map(move |ay| (0..n).flat_map(move |bx| (0..n).map(move |by| (ax, ay, bx, by))))) {
                counts[((ax - bx).abs() + (ay - by).abs()) as usize] += 1;
            }
            let total = (n as f64).powi(4);
            for (p, c) in pmf.iter().zip(counts) {
                assert!((p - c as f64 / total).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rows_sum_to_one_and_terminal_absorbs() {
        let spec = PayoffSpec::default();
        let mdp = build_mdp(&spec, &MdpOptions::default()).unwrap();
        let t = mdp.space.terminal();
        assert_eq!(mdp.rewards[t], [0.0, 0.0]);
        for a in 0..2 {
            assert_eq!(mdp.transitions[t][a], vec![(t, 1.0)]);
        }
        for row in &mdp.transitions {
            for r in row {
                let sum: f64 = r.iter().map(|(_, p)| p).sum();
                assert!((sum - 1.0).abs() < 1e-9, "{sum}");
            }
        }
    }

    #[test]
    fn state_cap_is_enforced() {
        let spec = PayoffSpec::default();
        let err = build_mdp(&spec, &MdpOptions { gamma: 1.0, max_states: 100 }).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn time_transition_conserves_mass() {
        let spec = PayoffSpec::default();
        for bin in TimeBin::ALL {
            for cost in [0.5, 10.0, 46.0, 100.0, 500.0] {
                let t = time_bin_transition(&spec, bin, cost);
                assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
        // 10 s from the low bin (0, 80]: an eighth of the mass runs out
        let t = time_bin_transition(&spec, TimeBin::Low, 10.0);
        assert!((t[3] - 0.125).abs() < 1e-12);
        assert!((t[0] - 0.875).abs() < 1e-12);
    }
}
