use std::cmp::Ordering;

use rand::Rng;

use super::{ConnectionGene, Genome, GenomeId, NeatConfig, NeatError, NodeGene};

fn inherit<R: Rng + ?Sized>(a: &ConnectionGene, b: &ConnectionGene, cfg: &NeatConfig, rng: &mut R) -> ConnectionGene {
    let mut gene = if rng.random_bool(0.5) { *a } else { *b };
    gene.enabled = match (a.enabled, b.enabled) {
        (true, true) => true,
        (false, false) => false,
        _ => !rng.random_bool(cfg.disabled_inherit_prob),
    };
    gene
}

/// NEAT crossover aligned on innovation numbers. Matching genes are taken from
/// either parent at random; disjoint and excess genes come from the fitter
/// parent, or from both when fitness is equal.
pub fn crossover<R: Rng + ?Sized>(
    parent_a: &Genome,
    parent_b: &Genome,
    child_id: GenomeId,
    cfg: &NeatConfig,
    rng: &mut R,
) -> Result<Genome, NeatError> {
    let fa = parent_a.fitness.ok_or(NeatError::Unevaluated(parent_a.id))?;
    let fb = parent_b.fitness.ok_or(NeatError::Unevaluated(parent_b.id))?;
    let (fit, other, union) = match fa.partial_cmp(&fb) {
        Some(Ordering::Greater) => (parent_a, parent_b, false),
        Some(Ordering::Less) => (parent_b, parent_a, false),
        _ => (parent_a, parent_b, true),
    };

    let (x, y) = (&fit.connections, &other.connections);
    let mut connections = Vec::with_capacity(x.len().max(y.len()));
    let (mut i, mut j) = (0, 0);
    while i < x.len() || j < y.len() {
        match (x.get(i), y.get(j)) {
            (Some(a), Some(b)) if a.innovation == b.innovation => {
                connections.push(inherit(a, b, cfg, rng));
                i += 1;
                j += 1;
            }
            (Some(a), Some(b)) if a.innovation < b.innovation => {
                connections.push(*a);
                i += 1;
            }
            (Some(a), None) => {
                connections.push(*a);
                i += 1;
            }
            (_, Some(b)) => {
                if union {
                    connections.push(*b);
                }
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }

    let mut nodes: Vec<NodeGene> = fit.nodes.clone();
    if union {
        for n in &other.nodes {
            if !fit.has_node(n.id) {
                nodes.push(*n);
            }
        }
    }
    let mut child = Genome {
        id: child_id,
        nodes,
        connections,
        fitness: None,
    };
    child.sort_genes();
    Ok(child)
}
