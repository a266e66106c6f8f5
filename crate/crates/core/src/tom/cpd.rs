use serde::{Deserialize, Serialize};

use super::dag::{Dag, Node, Observation};
use super::score::{config_index, family_counts, n_configs};

/// Conditional table of one node: Dirichlet pseudo-counts and the normalized
/// rows derived from them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeCpd {
    pub node: Node,
    pub parent_mask: u8,
    pub counts: Vec<Vec<f64>>,
    pub probs: Vec<Vec<f64>>,
}

impl NodeCpd {
    fn from_counts(node: Node, parent_mask: u8, counts: Vec<Vec<f64>>) -> NodeCpd {
        let probs = counts.iter().map(|row| normalize(row)).collect();
        NodeCpd { node, parent_mask, counts, probs }
    }

    pub fn row(&self, obs: &Observation) -> &[f64] {
        &self.probs[config_index(self.parent_mask, obs)]
    }
}

/// Relative frequencies; an all-zero row is uniform.
fn normalize(row: &[f64]) -> Vec<f64> {
    let total: f64 = row.iter().sum();
    if total > 0.0 {
        row.iter().map(|c| c / total).collect()
    } else {
        vec![1.0 / row.len() as f64; row.len()]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cpds {
    pub nodes: Vec<NodeCpd>,
}

impl Cpds {
    /// Uniform Dirichlet prior with `prior_ess / r` pseudo-counts per cell.
    pub fn with_prior(dag: &Dag, prior_ess: f64) -> Cpds {
        let nodes = Node::ALL
            .iter()
            .map(|&n| {
                let mask = dag.parent_mask(n);
                let r = n.cardinality();
                NodeCpd::from_counts(n, mask, vec![vec![prior_ess / r as f64; r]; n_configs(mask)])
            })
            .collect();
        Cpds { nodes }
    }

    pub fn node(&self, node: Node) -> &NodeCpd {
        &self.nodes[node.index()]
    }

    /// Conjugate update with one observation: every node's matching row gets
    /// +1 on the observed state and is renormalized. Rows that still hold no
    /// mass are first seeded with the uniform `prior_ess` prior.
    pub fn observe(&mut self, obs: &Observation, prior_ess: f64) {
        for cpd in &mut self.nodes {
            let j = config_index(cpd.parent_mask, obs);
            let row = &mut cpd.counts[j];
            if row.iter().sum::<f64>() <= 0.0 {
                let r = row.len() as f64;
                row.iter_mut().for_each(|c| *c = prior_ess / r);
            }
            row[obs.get(cpd.node)] += 1.0;
            cpd.probs[j] = normalize(row);
        }
    }

    pub fn rows_normalized(&self, tol: f64) -> bool {
        self.nodes
            .iter()
            .flat_map(|n| n.probs.iter())
            .all(|row| (row.iter().sum::<f64>() - 1.0).abs() <= tol && row.iter().all(|p| *p >= 0.0))
    }
}

/// Maximum-likelihood tables: relative frequencies per parent configuration,
/// uniform for configurations absent from `data`.
pub fn fit_mle(dag: &Dag, data: &[Observation]) -> Cpds {
    let nodes = Node::ALL
        .iter()
        .map(|&n| {
            let mask = dag.parent_mask(n);
            let counts = family_counts(n, mask, data)
                .into_iter()
                .map(|row| row.into_iter().map(|c| c as f64).collect())
                .collect();
            NodeCpd::from_counts(n, mask, counts)
        })
        .collect();
    Cpds { nodes }
}

/// Functional form of [`Cpds::observe`].
pub fn bayesian_update(mut cpds: Cpds, obs: &Observation, prior_ess: f64) -> Cpds {
    cpds.observe(obs, prior_ess);
    cpds
}
