//! Independent reference implementations used by the integration and
//! acceptance tests. Nothing here calls the solver, scorer or search code.
#![allow(dead_code)]

use std::collections::BTreeMap;

use tomdss_core::policy::Policy;
use tomdss_core::task::{ActionKind, DistanceBin, Feature, PayoffSpec, StateKey, TimeBin};
use tomdss_core::tom::{Cpds, Dag, Node, Observation};
use tomdss_core::xrl::Direction;

/// Manhattan-distance distribution of two independent uniform cells, by
/// enumerating every ordered pair of cells.
pub fn brute_distance_pmf(n: u32) -> Vec<f64> {
    let n = n as i64;
    let mut counts = vec![0u64; (2 * (n - 1) + 1) as usize];
    for ax in 0..n {
        for ay in 0..n {
            for bx in 0..n {
                for by in 0..n {
                    counts[((ax - bx).abs() + (ay - by).abs()) as usize] += 1;
                }
            }
        }
    }
    let total = (n * n * n * n) as f64;
    counts.into_iter().map(|c| c as f64 / total).collect()
}

fn distance_bin_of(d: usize, cuts: [f64; 2]) -> usize {
    let d = d as f64;
    if d <= cuts[0] {
        0
    } else if d <= cuts[1] {
        1
    } else {
        2
    }
}

fn time_interval(spec: &PayoffSpec, bin: usize) -> (f64, f64) {
    let cuts = spec.time_cuts();
    let edges = [0.0, cuts[0], cuts[1], spec.episode_time_limit];
    (edges[bin], edges[bin + 1])
}

/// Expectimax over the binned episode tree, with the time inside a bin taken
/// as uniform. Returns the optimal value and action of `key`.
pub struct TreeOracle {
    spec: PayoffSpec,
    pmf: Vec<f64>,
    dist_bin_mass: [f64; 3],
}

impl TreeOracle {
    pub fn new(spec: &PayoffSpec) -> TreeOracle {
        let pmf = brute_distance_pmf(spec.grid_size);
        let mut dist_bin_mass = [0.0; 3];
        for (d, p) in pmf.iter().enumerate() {
            dist_bin_mass[distance_bin_of(d, spec.distance_cuts)] += p;
        }
        TreeOracle { spec: spec.clone(), pmf, dist_bin_mass }
    }

    /// `[low, medium, high]` next-bin probabilities (the remainder is expiry).
    fn next_time(&self, bomb: u8, dbin: usize, tbin: usize, action: ActionKind) -> [f64; 3] {
        let costs: Vec<(f64, f64)> = match action {
            ActionKind::Solo => vec![(self.spec.solo_cost_table()[bomb as usize - 1], 1.0)],
            ActionKind::Call => {
                let mass = self.dist_bin_mass[dbin];
                self.pmf
                    .iter()
                    .enumerate()
                    .filter(|(d, p)| **p > 0.0 && distance_bin_of(*d, self.spec.distance_cuts) == dbin)
                    .map(|(d, p)| (self.spec.call_time_base + self.spec.call_time_per_distance * d as f64, p / mass))
                    .collect()
            }
        };
        let (lo, hi) = time_interval(&self.spec, tbin);
        let mut out = [0.0; 3];
        for (cost, pc) in costs {
            for (b, o) in out.iter_mut().enumerate() {
                let (x, y) = time_interval(&self.spec, b);
                let len = ((hi - cost).min(y) - (lo - cost).max(x)).max(0.0);
                *o += pc * len / (hi - lo);
            }
        }
        out
    }

    fn continuation(&self, tbin: usize, bombs: u32) -> f64 {
        if bombs == 0 {
            return 0.0;
        }
        let mut v = 0.0;
        for bomb in 1..=3u8 {
            for d in 0..3 {
                if self.dist_bin_mass[d] > 0.0 {
                    v += self.dist_bin_mass[d] / 3.0 * self.value(bomb, d, tbin, bombs).0;
                }
            }
        }
        v
    }

    fn value(&self, bomb: u8, dbin: usize, tbin: usize, bombs: u32) -> (f64, ActionKind, f64) {
        let q = |a: ActionKind| {
            let r = self.spec.reward_table()[bomb as usize - 1][a.index()];
            let nt = self.next_time(bomb, dbin, tbin, a);
            r + (0..3).map(|b| if nt[b] > 0.0 { nt[b] * self.continuation(b, bombs - 1) } else { 0.0 }).sum::<f64>()
        };
        let (qs, qc) = (q(ActionKind::Solo), q(ActionKind::Call));
        if qc > qs {
            (qc, ActionKind::Call, qc - qs)
        } else {
            (qs, ActionKind::Solo, qs - qc)
        }
    }

    /// (optimal value, optimal action, |Q gap|).
    pub fn solve(&self, key: &StateKey) -> (f64, ActionKind, f64) {
        self.value(key.bomb_type, key.distance_bin.index(), key.time_bin.index(), key.bombs_remaining)
    }
}

/// Reward and solo-cost tables in plain arrays.
pub trait SpecTables {
    fn reward_table(&self) -> [[f64; 2]; 3];
    fn solo_cost_table(&self) -> [f64; 3];
}

impl SpecTables for PayoffSpec {
    fn reward_table(&self) -> [[f64; 2]; 3] {
        let r = |i: usize| [self.reward[i].solo, self.reward[i].call];
        [r(0), r(1), r(2)]
    }

    fn solo_cost_table(&self) -> [f64; 3] {
        self.solo_time_cost
    }
}

/// Counterfactual by full enumeration of one feature's values: the closest
/// value that flips the action, preferring the lower value on equal distance.
pub fn counterfactual_oracle(policy: &Policy, key: &StateKey, feature: Feature) -> Option<(usize, Direction, ActionKind, StateKey)> {
    let action = policy.action_at(key).unwrap();
    let here = key.ordinal(feature) as i64;
    let mut best: Option<(i64, i64, ActionKind, StateKey)> = None;
    for v in 0..3i64 {
        if v == here {
            continue;
        }
        let moved = key.with_ordinal(feature, v as usize).unwrap();
        let other = policy.action_at(&moved).unwrap();
        if other == action {
            continue;
        }
        let dist = (v - here).abs();
        let better = match &best {
            None => true,
            Some((bd, bv, _, _)) => dist < *bd || (dist == *bd && v < *bv),
        };
        if better {
            best = Some((dist, v, other, moved));
        }
    }
    best.map(|(d, v, a, s)| (d as usize, if v < here { Direction::Down } else { Direction::Up }, a, s))
}

/// Sum of ln(alpha + m) for m in 0..n, i.e. lnΓ(alpha + n) - lnΓ(alpha).
pub fn ln_rising(alpha: f64, n: usize) -> f64 {
    (0..n).map(|m| (alpha + m as f64).ln()).sum()
}

pub const CARD: [usize; 4] = [3, 3, 3, 2];

/// BDeu from its definition, counting with maps and evaluating every Gamma
/// ratio as a rising factorial.
pub fn bdeu_oracle(parents: &[Vec<usize>; 4], data: &[[usize; 4]], ess: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..4 {
        let q: usize = parents[i].iter().map(|&p| CARD[p]).product();
        let r = CARD[i];
        let mut n_ij: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        let mut n_ijk: BTreeMap<(Vec<usize>, usize), usize> = BTreeMap::new();
        for row in data {
            let cfg: Vec<usize> = parents[i].iter().map(|&p| row[p]).collect();
            *n_ij.entry(cfg.clone()).or_default() += 1;
            *n_ijk.entry((cfg, row[i])).or_default() += 1;
        }
        let a_ij = ess / q as f64;
        let a_ijk = ess / (r * q) as f64;
        for n in n_ij.values() {
            total -= ln_rising(a_ij, *n);
        }
        for n in n_ijk.values() {
            total += ln_rising(a_ijk, *n);
        }
    }
    total
}

/// Every admissible parent set of the action node, scored by the oracle.
/// Returns the maximal score and all structures within `eps` of it.
pub fn exhaustive_argmax(data: &[[usize; 4]], ess: f64, eps: f64) -> (f64, Vec<Vec<usize>>) {
    let mut scored = Vec::new();
    for mask in 0u8..8 {
        let pa: Vec<usize> = (0..3).filter(|b| mask & (1 << b) != 0).collect();
        let parents = [vec![], vec![], vec![], pa.clone()];
        scored.push((bdeu_oracle(&parents, data, ess), pa));
    }
    let best = scored.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    (best, scored.into_iter().filter(|s| s.0 >= best - eps).map(|s| s.1).collect())
}

/// Row of a node table, laid out with the lowest-index parent most significant.
fn row_index(parents: &[usize], values: &[usize; 4]) -> usize {
    parents.iter().fold(0, |acc, &p| acc * CARD[p] + values[p])
}

/// P(action | bomb, distance, time) by summing the full joint.
pub fn joint_posterior(dag: &Dag, cpds: &Cpds, obs: [usize; 3]) -> [f64; 2] {
    let mut joint = [0.0; 2];
    for (a, j) in joint.iter_mut().enumerate() {
        let values = [obs[0], obs[1], obs[2], a];
        let mut p = 1.0;
        for node in Node::ALL {
            let parents: Vec<usize> = dag.parents(node).iter().map(|n| n.index()).collect();
            p *= cpds.node(node).probs[row_index(&parents, &values)][values[node.index()]];
        }
        *j = p;
    }
    let z = joint[0] + joint[1];
    [joint[0] / z, joint[1] / z]
}

pub fn to_rows(data: &[Observation]) -> Vec<[usize; 4]> {
    data.iter().map(|o| o.0).collect()
}

pub fn key(bomb: u8, d: usize, t: usize, bombs: u32) -> StateKey {
    StateKey {
        bomb_type: bomb,
        distance_bin: DistanceBin::from_index(d).unwrap(),
        time_bin: TimeBin::from_index(t).unwrap(),
        bombs_remaining: bombs,
    }
}

/// The reduced instance: four bombs, a 60 s limit and time cuts at 20 and 40.
pub fn reduced_spec() -> PayoffSpec {
    PayoffSpec { n_bombs: 4, episode_time_limit: 60.0, time_cuts: Some([20.0, 40.0]), ..PayoffSpec::default() }
}
