use rand::Rng;

use super::{ConnectionGene, Genome, InnovationLedger, NeatConfig, NodeGene, NodeKind};

/// Splits a random enabled connection with a new hidden node. The incoming
/// half gets weight 1, the outgoing half inherits the old weight. No-op when
/// nothing is enabled. Returns whether the genome changed.
pub fn mutate_add_node<R: Rng + ?Sized>(g: &mut Genome, ledger: &mut InnovationLedger, rng: &mut R) -> bool {
    let enabled: Vec<usize> = (0..g.connections.len()).filter(|&i| g.connections[i].enabled).collect();
    if enabled.is_empty() {
        return false;
    }
    let idx = enabled[rng.random_range(0..enabled.len())];
    let old = g.connections[idx];
    g.connections[idx].enabled = false;
    let ev = ledger.split(old.innovation, old.in_node, old.out_node, |n| g.has_node(n));
    g.nodes.push(NodeGene::new(ev.node, NodeKind::Hidden));
    g.connections.push(ConnectionGene {
        in_node: old.in_node,
        out_node: ev.node,
        weight: 1.0,
        enabled: true,
        innovation: ev.in_innovation,
    });
    g.connections.push(ConnectionGene {
        in_node: ev.node,
        out_node: old.out_node,
        weight: old.weight,
        enabled: true,
        innovation: ev.out_innovation,
    });
    g.sort_genes();
    true
}

/// Adds one connection between a random unconnected ordered pair. Sources may
/// be any node, targets any non-sensor node; self-loops and recurrent edges are
/// allowed. No-op when the genome is saturated.
pub fn mutate_add_connection<R: Rng + ?Sized>(
    g: &mut Genome,
    ledger: &mut InnovationLedger,
    weight_range: f64,
    rng: &mut R,
) -> bool {
    let mut candidates = Vec::new();
    for src in &g.nodes {
        for dst in g.nodes.iter().filter(|n| !n.is_sensor()) {
            if !g.has_connection(src.id, dst.id) {
                candidates.push((src.id, dst.id));
            }
        }
    }
    if candidates.is_empty() {
        return false;
    }
    let (a, b) = candidates[rng.random_range(0..candidates.len())];
    let weight = if weight_range > 0.0 {
        rng.random_range(-weight_range..=weight_range)
    } else {
        0.0
    };
    g.connections.push(ConnectionGene {
        in_node: a,
        out_node: b,
        weight,
        enabled: true,
        innovation: ledger.connection(a, b),
    });
    g.sort_genes();
    true
}

/// Perturbs each weight by a uniform step, or occasionally replaces it.
pub fn mutate_weights<R: Rng + ?Sized>(g: &mut Genome, cfg: &NeatConfig, rng: &mut R) {
    for c in &mut g.connections {
        if rng.random_bool(cfg.weight_perturb_prob) {
            if cfg.weight_perturb_power > 0.0 {
                c.weight += rng.random_range(-cfg.weight_perturb_power..=cfg.weight_perturb_power);
            }
        } else if cfg.weight_replace_range > 0.0 {
            c.weight = rng.random_range(-cfg.weight_replace_range..=cfg.weight_replace_range);
        } else {
            c.weight = 0.0;
        }
    }
}

/// Applies the configured structural and weight mutations to an offspring.
pub fn mutate<R: Rng + ?Sized>(g: &mut Genome, cfg: &NeatConfig, ledger: &mut InnovationLedger, rng: &mut R) {
    if rng.random_bool(cfg.add_node_prob) {
        mutate_add_node(g, ledger, rng);
    }
    if rng.random_bool(cfg.add_connection_prob) {
        mutate_add_connection(g, ledger, cfg.init_weight_range, rng);
    }
    if rng.random_bool(cfg.weight_mutate_prob) {
        mutate_weights(g, cfg, rng);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neat::{RecurrentNetwork, FIRST_HIDDEN};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seed_genome(ledger: &mut InnovationLedger, rng: &mut ChaCha8Rng) -> Genome {
        Genome::fully_connected(0, 1.0, ledger, rng)
    }

    #[test]
    fn add_node_arithmetic() {
        let mut ledger = InnovationLedger::new(FIRST_HIDDEN);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut g = seed_genome(&mut ledger, &mut rng);
        assert!(mutate_add_node(&mut g, &mut ledger, &mut rng));
        assert_eq!(g.nodes.len(), 16);
        assert_eq!(g.connections.len(), 41);
        assert_eq!(g.connections.iter().filter(|c| !c.enabled).count(), 1);
        g.validate().unwrap();

        let split = g.connections.iter().find(|c| !c.enabled).unwrap();
        let hidden = g.nodes.iter().find(|n| n.kind == NodeKind::Hidden).unwrap().id;
        let into = g.connections.iter().find(|c| c.out_node == hidden).unwrap();
        let out = g.connections.iter().find(|c| c.in_node == hidden).unwrap();
        assert_eq!((into.in_node, into.weight), (split.in_node, 1.0));
        assert_eq!((out.out_node, out.weight), (split.out_node, split.weight));

        let mut net = RecurrentNetwork::<f64>::decode(&g);
        for _ in 0..5 {
            let y = net.activate(&[1.0; 11]).unwrap();
            assert!(y.iter().all(|v| v.is_finite() && *v > 0.0 && *v < 1.0));
        }
    }

    #[test]
    fn same_split_same_markers() {
        let mut ledger = InnovationLedger::new(FIRST_HIDDEN);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut a = seed_genome(&mut ledger, &mut rng);
        let mut b = a.clone();
        b.id = 1;
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        mutate_add_node(&mut a, &mut ledger, &mut r1);
        mutate_add_node(&mut b, &mut ledger, &mut r2);
        let new = |g: &Genome| g.connections.iter().rev().map(|c| c.innovation).max().unwrap();
        assert_eq!(new(&a), new(&b));
        assert_eq!(a.nodes, b.nodes);
    }

    #[test]
    fn add_node_without_enabled_is_noop() {
        let mut ledger = InnovationLedger::new(FIRST_HIDDEN);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut g = seed_genome(&mut ledger, &mut rng);
        g.connections.iter_mut().for_each(|c| c.enabled = false);
        let before = g.clone();
        assert!(!mutate_add_node(&mut g, &mut ledger, &mut rng));
        assert_eq!(g, before);
    }

    #[test]
    fn add_connection_saturation_and_self_loops() {
        let mut ledger = InnovationLedger::new(FIRST_HIDDEN);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut g = seed_genome(&mut ledger, &mut rng);
        // 15 sources x 3 targets = 45 possible pairs; 39 taken
        let mut added = 0;
        while mutate_add_connection(&mut g, &mut ledger, 1.0, &mut rng) {
            added += 1;
            g.validate().unwrap();
        }
        assert_eq!(added, 6);
        assert_eq!(g.connections.len(), 45);
        let before = g.clone();
        assert!(!mutate_add_connection(&mut g, &mut ledger, 1.0, &mut rng));
        assert_eq!(g, before);
        // output-to-output recurrent edges, including the self-loops, are present
        assert!(g.has_connection(12, 13) && g.has_connection(14, 12) && g.has_connection(13, 13));
    }

    #[test]
    fn weight_mutation_keeps_structure() {
        let cfg = NeatConfig::default();
        let mut ledger = InnovationLedger::new(FIRST_HIDDEN);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut g = seed_genome(&mut ledger, &mut rng);
        let before = g.clone();
        mutate_weights(&mut g, &cfg, &mut rng);
        assert_eq!(g.connections.len(), before.connections.len());
        assert!(g.connections.iter().zip(&before.connections).any(|(a, b)| a.weight != b.weight));
        assert!(g
            .connections
            .iter()
            .zip(&before.connections)
            .all(|(a, b)| (a.weight - b.weight).abs() <= 0.5 || a.weight.abs() <= 3.0));
    }
}
