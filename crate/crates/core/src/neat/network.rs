use std::collections::BTreeMap;

use super::{Genome, NeatError, NodeKind, NodeId, BIAS_NODE, N_OUTPUTS, OUTPUT_NODES};
use crate::indicators::N_INPUTS;
use crate::Real;

pub const SIGMOID_STEEPNESS: f64 = 4.9;

/// Steepened logistic, kept strictly inside `(0, 1)` for every finite input.
#[inline]
pub fn sigmoid<T: Real>(x: T) -> T {
    let bound = -T::epsilon().ln() - T::one();
    let z = (T::lit(SIGMOID_STEEPNESS) * x).max(-bound).min(bound);
    T::one() / (T::one() + (-z).exp())
}

/// Recurrent network decoded from a genome.
///
/// Each call to [`activate`](Self::activate) is one synchronous step: every
/// non-sensor node sums its enabled incoming edges, reading sensors at their
/// current values and all other nodes at their value from the previous step.
#[derive(Debug, Clone)]
pub struct RecurrentNetwork<T> {
    /// Slot of each input node, in input order.
    inputs: [usize; N_INPUTS],
    bias: usize,
    outputs: [usize; N_OUTPUTS],
    /// (node slot, incoming (source slot, weight) edges) for non-sensor nodes.
    neurons: Vec<(usize, Vec<(usize, T)>)>,
    state: Vec<T>,
    scratch: Vec<T>,
}

impl<T: Real> RecurrentNetwork<T> {
    pub fn decode(genome: &Genome) -> Self {
        let slot: BTreeMap<NodeId, usize> = genome.nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let mut incoming: BTreeMap<usize, Vec<(usize, T)>> = genome
            .nodes
            .iter()
            .filter(|n| !n.is_sensor())
            .map(|n| (slot[&n.id], Vec::new()))
            .collect();
        for c in genome.connections.iter().filter(|c| c.enabled) {
            if let (Some(&src), Some(&dst)) = (slot.get(&c.in_node), slot.get(&c.out_node)) {
                if let Some(edges) = incoming.get_mut(&dst) {
                    edges.push((src, T::lit(c.weight)));
                }
            }
        }
        let find = |id: NodeId| *slot.get(&id).expect("base node present");
        let mut inputs = [0; N_INPUTS];
        for (i, s) in inputs.iter_mut().enumerate() {
            *s = find(i as NodeId);
        }
        let mut outputs = [0; N_OUTPUTS];
        for (o, s) in outputs.iter_mut().enumerate() {
            *s = find(OUTPUT_NODES[o]);
        }
        debug_assert!(genome.nodes.iter().filter(|n| n.kind == NodeKind::Input).count() == N_INPUTS);
        let n = genome.nodes.len();
        RecurrentNetwork {
            inputs,
            bias: find(BIAS_NODE),
            outputs,
            neurons: incoming.into_iter().collect(),
            state: vec![T::zero(); n],
            scratch: vec![T::zero(); n],
        }
    }

    /// Zeroes every node state.
    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|v| *v = T::zero());
    }

    /// One step; returns the `(buy, sell, volume)` outputs.
    pub fn activate(&mut self, inputs: &[T]) -> Result<[T; N_OUTPUTS], NeatError> {
        if inputs.len() != N_INPUTS {
            return Err(NeatError::InputLength {
                expected: N_INPUTS,
                got: inputs.len(),
            });
        }
        if let Some(i) = inputs.iter().position(|x| !x.is_finite()) {
            return Err(NeatError::NonFiniteInput(i));
        }
        for (&slot, &x) in self.inputs.iter().zip(inputs) {
            self.state[slot] = x;
        }
        self.state[self.bias] = T::one();
        for (node, edges) in &self.neurons {
            let sum = edges.iter().fold(T::zero(), |acc, &(src, w)| acc + w * self.state[src]);
            self.scratch[*node] = sigmoid(sum);
        }
        for (node, _) in &self.neurons {
            self.state[*node] = self.scratch[*node];
        }
        let mut out = [T::zero(); N_OUTPUTS];
        for (o, &slot) in out.iter_mut().zip(&self.outputs) {
            *o = self.state[slot];
        }
        Ok(out)
    }

    pub fn node_count(&self) -> usize {
        self.state.len()
    }
}
