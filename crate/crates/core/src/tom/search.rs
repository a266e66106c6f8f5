use std::collections::HashMap;

use super::dag::{ConstraintSet, Dag, Node, Observation};
use super::score::{local_bdeu, validate};
use crate::error::Result;

/// Score differences within this band count as ties.
pub const SCORE_TIE_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Move {
    Add(Node, Node),
    Remove(Node, Node),
    Reverse(Node, Node),
}

impl Move {
    fn edge(self) -> (Node, Node) {
        match self {
            Move::Add(a, b) | Move::Remove(a, b) | Move::Reverse(a, b) => (a, b),
        }
    }

    fn apply(self, dag: &Dag) -> Dag {
        let bit = |n: Node| 1u8 << n.index();
        match self {
            Move::Add(u, v) => dag.with_parent_mask(v, dag.parent_mask(v) | bit(u)),
            Move::Remove(u, v) => dag.with_parent_mask(v, dag.parent_mask(v) & !bit(u)),
            Move::Reverse(u, v) => {
                let removed = dag.with_parent_mask(v, dag.parent_mask(v) & !bit(u));
                removed.with_parent_mask(u, removed.parent_mask(u) | bit(v))
            }
        }
    }
}

struct LocalScores<'a> {
    data: &'a [Observation],
    ess: f64,
    cache: HashMap<(Node, u8), f64>,
}

impl LocalScores<'_> {
    fn get(&mut self, node: Node, mask: u8) -> f64 {
        let (data, ess) = (self.data, self.ess);
        *self.cache.entry((node, mask)).or_insert_with(|| local_bdeu(node, mask, data, ess))
    }

    fn delta(&mut self, from: &Dag, to: &Dag) -> f64 {
        Node::ALL
            .iter()
            .filter(|n| from.parent_mask(**n) != to.parent_mask(**n))
            .map(|&n| self.get(n, to.parent_mask(n)) - self.get(n, from.parent_mask(n)))
            .sum()
    }
}

/// Best-improvement hill climbing over add/remove/reverse moves, starting
/// from the empty graph. Near-ties prefer the move leaving fewer edges, then
/// the lexicographically smaller edge. Stops when no move improves the score
/// by more than [`SCORE_TIE_EPS`].
pub fn hill_climb(data: &[Observation], constraints: &ConstraintSet, ess: f64) -> Result<Dag> {
    validate(data, ess)?;
    let mut scores = LocalScores { data, ess, cache: HashMap::new() };
    let mut dag = Dag::empty();
    loop {
        let mut best: Option<(f64, usize, (Node, Node), Dag)> = None;
        for u in Node::ALL {
            for v in Node::ALL {
                if u == v {
                    continue;
                }
                let moves: &[Move] = if dag.has_edge(u, v) {
                    &[Move::Remove(u, v), Move::Reverse(u, v)]
                } else if !dag.has_edge(v, u) {
                    &[Move::Add(u, v)]
                } else {
                    &[]
                };
                for &m in moves {
                    let cand = m.apply(&dag);
                    if !constraints.admits(&cand) {
                        continue;
                    }
                    let delta = scores.delta(&dag, &cand);
                    let rank = (cand.edge_count(), m.edge());
                    let better = match &best {
                        None => true,
                        Some((bd, be, bedge, _)) => {
                            delta > bd + SCORE_TIE_EPS
                                || ((delta - bd).abs() <= SCORE_TIE_EPS && rank < (*be, *bedge))
                        }
                    };
                    if better {
                        best = Some((delta, rank.0, rank.1, cand));
                    }
                }
            }
        }
        match best {
            Some((delta, _, _, cand)) if delta > SCORE_TIE_EPS => dag = cand,
            _ => return Ok(dag),
        }
    }
}
