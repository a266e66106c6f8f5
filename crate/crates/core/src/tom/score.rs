use super::dag::{mask_nodes, Dag, Node, Observation};
use crate::error::{Error, Result};

/// Index of the parent configuration of `obs` for the parents in `mask`
/// (mixed radix, lowest node index most significant).
pub(crate) fn config_index(mask: u8, obs: &Observation) -> usize {
    mask_nodes(mask).iter().fold(0, |j, p| j * p.cardinality() + obs.get(*p))
}

pub(crate) fn n_configs(mask: u8) -> usize {
    mask_nodes(mask).iter().map(|p| p.cardinality()).product()
}

/// `counts[j][k]` for child `node` with parents `mask`.
pub(crate) fn family_counts(node: Node, mask: u8, data: &[Observation]) -> Vec<Vec<u64>> {
    let mut counts = vec![vec![0u64; node.cardinality()]; n_configs(mask)];
    for obs in data {
        counts[config_index(mask, obs)][obs.get(node)] += 1;
    }
    counts
}

fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// BDeu log marginal likelihood of one family.
pub fn local_bdeu(node: Node, mask: u8, data: &[Observation], ess: f64) -> f64 {
    let counts = family_counts(node, mask, data);
    let q = counts.len() as f64;
    let r = node.cardinality() as f64;
    let alpha_j = ess / q;
    let alpha_jk = ess / (q * r);
    let mut score = 0.0;
    for row in &counts {
        let n_j: u64 = row.iter().sum();
        score += ln_gamma(alpha_j) - ln_gamma(alpha_j + n_j as f64);
        for &n_jk in row {
            score += ln_gamma(alpha_jk + n_jk as f64) - ln_gamma(alpha_jk);
        }
    }
    score
}

fn check_inputs(data: &[Observation], ess: f64) -> Result<()> {
    if !(ess > 0.0 && ess.is_finite()) {
        return Err(Error::Config(format!("equivalent sample size must be positive, got {ess}")));
    }
    data.iter().try_for_each(Observation::check)
}

/// Decomposable BDeu score of `dag` on `data`. Depends on the data only
/// through counts, so row order never changes the result.
pub fn bdeu_score(dag: &Dag, data: &[Observation], ess: f64) -> Result<f64> {
    check_inputs(data, ess)?;
    Ok(Node::ALL.iter().map(|&n| local_bdeu(n, dag.parent_mask(n), data, ess)).sum())
}

pub(crate) fn validate(data: &[Observation], ess: f64) -> Result<()> {
    check_inputs(data, ess)
}
