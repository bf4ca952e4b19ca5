use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{GenomeId, Innovation, NodeId};

/// Result of splitting a connection: the new node and its two connections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitEvent {
    pub node: NodeId,
    pub in_innovation: Innovation,
    pub out_innovation: Innovation,
}

/// Global historical markers.
///
/// Connection innovations are keyed by their `(in, out)` pair for the whole
/// run, so a pair always carries the same number and a genome can never hold
/// two genes for one pair. Node splits are shared within a generation only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "LedgerRepr", into = "LedgerRepr")]
pub struct InnovationLedger {
    next_innovation: Innovation,
    next_node: NodeId,
    next_genome: GenomeId,
    next_species: u64,
    pairs: BTreeMap<(NodeId, NodeId), Innovation>,
    splits: BTreeMap<Innovation, SplitEvent>,
}

impl InnovationLedger {
    /// `first_hidden` is the first node id free for hidden nodes.
    pub fn new(first_hidden: NodeId) -> Self {
        InnovationLedger {
            next_innovation: 0,
            next_node: first_hidden,
            next_genome: 0,
            next_species: 0,
            pairs: BTreeMap::new(),
            splits: BTreeMap::new(),
        }
    }

    /// Innovation for a connection `in -> out`, allocating on first sight.
    pub fn connection(&mut self, in_node: NodeId, out_node: NodeId) -> Innovation {
        if let Some(&i) = self.pairs.get(&(in_node, out_node)) {
            return i;
        }
        let i = self.next_innovation;
        self.next_innovation += 1;
        self.pairs.insert((in_node, out_node), i);
        i
    }

    /// Node and connection markers for splitting connection `innovation`.
    /// Reuses this generation's event unless the genome already holds that
    /// node (a re-enabled gene split twice), in which case a fresh node is made.
    pub fn split(
        &mut self,
        innovation: Innovation,
        in_node: NodeId,
        out_node: NodeId,
        has_node: impl Fn(NodeId) -> bool,
    ) -> SplitEvent {
        if let Some(ev) = self.splits.get(&innovation) {
            if !has_node(ev.node) {
                return *ev;
            }
        }
        let node = self.next_node;
        self.next_node += 1;
        let ev = SplitEvent {
            node,
            in_innovation: self.connection(in_node, node),
            out_innovation: self.connection(node, out_node),
        };
        self.splits.entry(innovation).or_insert(ev);
        ev
    }

    /// Forgets split events; called between generations.
    pub fn new_generation(&mut self) {
        self.splits.clear();
    }

    pub fn new_genome_id(&mut self) -> GenomeId {
        let id = self.next_genome;
        self.next_genome += 1;
        id
    }

    pub fn new_species_id(&mut self) -> u64 {
        let id = self.next_species;
        self.next_species += 1;
        id
    }

    /// Number of innovations issued so far; all issued numbers are below it.
    pub fn innovation_count(&self) -> Innovation {
        self.next_innovation
    }

    pub fn lookup(&self, in_node: NodeId, out_node: NodeId) -> Option<Innovation> {
        self.pairs.get(&(in_node, out_node)).copied()
    }
}

#[derive(Serialize, Deserialize)]
struct LedgerRepr {
    next_innovation: Innovation,
    next_node: NodeId,
    next_genome: GenomeId,
    next_species: u64,
    pairs: Vec<(NodeId, NodeId, Innovation)>,
    splits: Vec<(Innovation, SplitEvent)>,
}

impl From<LedgerRepr> for InnovationLedger {
    fn from(r: LedgerRepr) -> Self {
        InnovationLedger {
            next_innovation: r.next_innovation,
            next_node: r.next_node,
            next_genome: r.next_genome,
            next_species: r.next_species,
            pairs: r.pairs.into_iter().map(|(a, b, i)| ((a, b), i)).collect(),
            splits: r.splits.into_iter().collect(),
        }
    }
}

impl From<InnovationLedger> for LedgerRepr {
    fn from(l: InnovationLedger) -> Self {
        LedgerRepr {
            next_innovation: l.next_innovation,
            next_node: l.next_node,
            next_genome: l.next_genome,
            next_species: l.next_species,
            pairs: l.pairs.into_iter().map(|((a, b), i)| (a, b, i)).collect(),
            splits: l.splits.into_iter().collect(),
        }
    }
}
