use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{InnovationLedger, NeatConfig, NeatError};
use crate::indicators::N_INPUTS;

pub type NodeId = u32;
pub type Innovation = u64;
pub type GenomeId = u64;

pub const N_OUTPUTS: usize = 3;
/// Inputs occupy ids `0..11`, the bias node is 11, outputs are 12..15.
pub const BIAS_NODE: NodeId = N_INPUTS as NodeId;
pub const OUTPUT_NODES: [NodeId; N_OUTPUTS] = [BIAS_NODE + 1, BIAS_NODE + 2, BIAS_NODE + 3];
pub const FIRST_HIDDEN: NodeId = BIAS_NODE + 1 + N_OUTPUTS as NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Input,
    Bias,
    Output,
    Hidden,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// Steepened logistic `1 / (1 + exp(-4.9 x))`.
    #[default]
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeGene {
    pub id: NodeId,
    pub kind: NodeKind,
    #[serde(default)]
    pub activation: Activation,
}

impl NodeGene {
    pub fn new(id: NodeId, kind: NodeKind) -> Self {
        NodeGene {
            id,
            kind,
            activation: Activation::Sigmoid,
        }
    }

    pub fn is_sensor(&self) -> bool {
        matches!(self.kind, NodeKind::Input | NodeKind::Bias)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConnectionGene {
    pub in_node: NodeId,
    pub out_node: NodeId,
    pub weight: f64,
    pub enabled: bool,
    pub innovation: Innovation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    pub id: GenomeId,
    /// Sorted by id.
    pub nodes: Vec<NodeGene>,
    /// Sorted by innovation.
    pub connections: Vec<ConnectionGene>,
    #[serde(default)]
    pub fitness: Option<f64>,
}

fn base_nodes() -> Vec<NodeGene> {
    let mut nodes: Vec<NodeGene> = (0..N_INPUTS as NodeId).map(|i| NodeGene::new(i, NodeKind::Input)).collect();
    nodes.push(NodeGene::new(BIAS_NODE, NodeKind::Bias));
    nodes.extend(OUTPUT_NODES.iter().map(|&o| NodeGene::new(o, NodeKind::Output)));
    nodes
}

impl Genome {
    /// Inputs and bias fully connected to every output, plus one self-loop
    /// per output, with weights uniform in `[-range, range]`.
    pub fn fully_connected<R: Rng + ?Sized>(
        id: GenomeId,
        weight_range: f64,
        ledger: &mut InnovationLedger,
        rng: &mut R,
    ) -> Self {
        let mut connections = Vec::with_capacity((N_INPUTS + 1) * N_OUTPUTS + N_OUTPUTS);
        for src in 0..=BIAS_NODE {
            for &out in &OUTPUT_NODES {
                connections.push((src, out));
            }
        }
        for &out in &OUTPUT_NODES {
            connections.push((out, out));
        }
        let connections = connections
            .into_iter()
            .map(|(a, b)| ConnectionGene {
                in_node: a,
                out_node: b,
                weight: if weight_range > 0.0 {
                    rng.random_range(-weight_range..=weight_range)
                } else {
                    0.0
                },
                enabled: true,
                innovation: ledger.connection(a, b),
            })
            .collect();
        let mut g = Genome {
            id,
            nodes: base_nodes(),
            connections,
            fitness: None,
        };
        g.sort_genes();
        g
    }

    /// A genome with only the base nodes and the given connections.
    pub fn from_connections(id: GenomeId, ledger: &mut InnovationLedger, edges: &[(NodeId, NodeId, f64)]) -> Self {
        let mut nodes = base_nodes();
        for &(a, b, _) in edges {
            for n in [a, b] {
                if n >= FIRST_HIDDEN && !nodes.iter().any(|g| g.id == n) {
                    nodes.push(NodeGene::new(n, NodeKind::Hidden));
                }
            }
        }
        let connections = edges
            .iter()
            .map(|&(a, b, w)| ConnectionGene {
                in_node: a,
                out_node: b,
                weight: w,
                enabled: true,
                innovation: ledger.connection(a, b),
            })
            .collect();
        let mut g = Genome {
            id,
            nodes,
            connections,
            fitness: None,
        };
        g.sort_genes();
        g
    }

    pub fn sort_genes(&mut self) {
        self.nodes.sort_by_key(|n| n.id);
        self.connections.sort_by_key(|c| c.innovation);
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeGene> {
        self.nodes.binary_search_by_key(&id, |n| n.id).ok().map(|i| &self.nodes[i])
    }

    pub fn has_node(&self, id: NodeId) -> bool {
        self.node(id).is_some()
    }

    pub fn has_connection(&self, in_node: NodeId, out_node: NodeId) -> bool {
        self.connections.iter().any(|c| c.in_node == in_node && c.out_node == out_node)
    }

    pub fn enabled_count(&self) -> usize {
        self.connections.iter().filter(|c| c.enabled).count()
    }

    pub fn hidden_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Hidden).count()
    }

    /// Structural audit of every genome invariant.
    pub fn validate(&self) -> Result<(), NeatError> {
        let fail = |reason: String| Err(NeatError::InvalidGenome { id: self.id, reason });
        if self.nodes.windows(2).any(|w| w[0].id >= w[1].id) {
            return fail("node ids not unique and sorted".into());
        }
        for base in base_nodes() {
            match self.node(base.id) {
                Some(n) if n.kind == base.kind => {}
                _ => return fail(format!("missing or mistyped base node {}", base.id)),
            }
        }
        if let Some(n) = self.nodes.iter().find(|n| n.id >= FIRST_HIDDEN && n.kind != NodeKind::Hidden) {
            return fail(format!("node {} beyond the base range must be hidden", n.id));
        }
        if self.connections.windows(2).any(|w| w[0].innovation >= w[1].innovation) {
            return fail("innovations not unique and sorted".into());
        }
        let mut pairs = BTreeSet::new();
        for c in &self.connections {
            if !self.has_node(c.in_node) || !self.has_node(c.out_node) {
                return fail(format!("connection {} has a dangling endpoint", c.innovation));
            }
            if self.node(c.out_node).is_some_and(NodeGene::is_sensor) {
                return fail(format!("connection {} targets a sensor node", c.innovation));
            }
            if !c.weight.is_finite() {
                return fail(format!("connection {} has a non-finite weight", c.innovation));
            }
            if !pairs.insert((c.in_node, c.out_node)) {
                return fail(format!("duplicate connection {} -> {}", c.in_node, c.out_node));
            }
        }
        Ok(())
    }
}

/// NEAT compatibility distance over two connection-gene lists sorted by
/// innovation: `c1 E / N + c2 D / N + c3 W`.
pub fn connection_distance(a: &[ConnectionGene], b: &[ConnectionGene], cfg: &NeatConfig) -> f64 {
    let (mut i, mut j) = (0, 0);
    let (mut disjoint, mut matching, mut weight_diff) = (0usize, 0usize, 0.0);
    while i < a.len() && j < b.len() {
        let (x, y) = (&a[i], &b[j]);
        if x.innovation == y.innovation {
            matching += 1;
            weight_diff += (x.weight - y.weight).abs();
            i += 1;
            j += 1;
        } else if x.innovation < y.innovation {
            disjoint += 1;
            i += 1;
        } else {
            disjoint += 1;
            j += 1;
        }
    }
    let excess = (a.len() - i) + (b.len() - j);
    let longest = a.len().max(b.len());
    let n = if a.len() < cfg.small_genome_genes && b.len() < cfg.small_genome_genes {
        1.0
    } else {
        longest.max(1) as f64
    };
    let w = if matching > 0 { weight_diff / matching as f64 } else { 0.0 };
    cfg.excess_coefficient * excess as f64 / n + cfg.disjoint_coefficient * disjoint as f64 / n + cfg.weight_coefficient * w
}

pub fn compatibility(a: &Genome, b: &Genome, cfg: &NeatConfig) -> f64 {
    connection_distance(&a.connections, &b.connections, cfg)
}

/// Initial population of fully connected recurrent genomes.
pub fn init_population<R: Rng + ?Sized>(
    cfg: &NeatConfig,
    ledger: &mut InnovationLedger,
    rng: &mut R,
) -> Result<Vec<Genome>, NeatError> {
    cfg.validate()?;
    Ok((0..cfg.population_size)
        .map(|_| {
            let id = ledger.new_genome_id();
            Genome::fully_connected(id, cfg.init_weight_range, ledger, rng)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gene(innovation: Innovation, weight: f64) -> ConnectionGene {
        ConnectionGene {
            in_node: 0,
            out_node: 12,
            weight,
            enabled: true,
            innovation,
        }
    }

    #[test]
    fn initial_population_shape() {
        let cfg = NeatConfig::default();
        let mut ledger = InnovationLedger::new(FIRST_HIDDEN);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pop = init_population(&cfg, &mut ledger, &mut rng).unwrap();
        assert_eq!(pop.len(), 150);
        for g in &pop {
            assert_eq!(g.nodes.len(), 15);
            assert_eq!(g.connections.len(), 39);
            assert!(g.connections.iter().all(|c| (-1.0..=1.0).contains(&c.weight)));
            g.validate().unwrap();
        }
        let innovs = |g: &Genome| g.connections.iter().map(|c| c.innovation).collect::<Vec<_>>();
        assert!(pop.iter().all(|g| innovs(g) == innovs(&pop[0])));
        assert_eq!(ledger.innovation_count(), 39);

        let mut ledger2 = InnovationLedger::new(FIRST_HIDDEN);
        let mut rng2 = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(init_population(&cfg, &mut ledger2, &mut rng2).unwrap(), pop);
    }

    #[test]
    fn initial_distance_is_weight_term() {
        let cfg = NeatConfig::default();
        let mut ledger = InnovationLedger::new(FIRST_HIDDEN);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pop = init_population(&cfg, &mut ledger, &mut rng).unwrap();
        let (a, b) = (&pop[0], &pop[1]);
        let w: f64 = a
            .connections
            .iter()
            .zip(&b.connections)
            .map(|(x, y)| (x.weight - y.weight).abs())
            .sum::<f64>()
            / 39.0;
        assert!((compatibility(a, b, &cfg) - 0.4 * w).abs() < 1e-12);
    }

    #[test]
    fn distance_examples() {
        let cfg = NeatConfig::default();
        let a = vec![gene(0, 0.5), gene(1, 0.2)];
        assert_eq!(connection_distance(&a, &a, &cfg), 0.0);
        let mut b = a.clone();
        b.push(gene(2, 0.0));
        assert_eq!(connection_distance(&a, &b, &cfg), 1.0);
        // disjoint gene plus a weight difference of 0.5
        let c = vec![gene(1, 0.7), gene(2, 0.0)];
        let d = vec![gene(0, 0.0), gene(1, 0.2), gene(2, 0.0)];
        assert!((connection_distance(&c, &d, &cfg) - (1.0 + 0.4 * 0.25)).abs() < 1e-12);
    }

    #[test]
    fn validate_catches_dangling_and_sensor_targets() {
        let mut ledger = InnovationLedger::new(FIRST_HIDDEN);
        let mut g = Genome::from_connections(0, &mut ledger, &[(0, 12, 1.0)]);
        g.validate().unwrap();
        g.connections.push(ConnectionGene {
            in_node: 99,
            out_node: 12,
            weight: 1.0,
            enabled: true,
            innovation: 100,
        });
        assert!(g.validate().is_err());
        let g = Genome::from_connections(0, &mut ledger, &[(12, 3, 1.0)]);
        assert!(g.validate().is_err());
    }
}
