//! NeuroEvolution of Augmenting Topologies: genomes with historical markers,
//! speciation by compatibility distance, fitness-shared reproduction and a
//! recurrent network decoder.

mod config;
mod crossover;
mod genome;
mod innovation;
mod mutation;
mod network;
mod reproduction;
mod species;

pub use config::NeatConfig;
pub use crossover::crossover;
pub use genome::{
    compatibility, connection_distance, init_population, ConnectionGene, Genome, GenomeId, Innovation, NodeGene,
    NodeId, NodeKind, Activation, BIAS_NODE, FIRST_HIDDEN, N_OUTPUTS, OUTPUT_NODES,
};
pub use innovation::InnovationLedger;
pub use mutation::{mutate, mutate_add_connection, mutate_add_node, mutate_weights};
pub use network::{sigmoid, RecurrentNetwork, SIGMOID_STEEPNESS};
pub use reproduction::{offspring_quotas, reproduce};
pub use species::{speciate, Species};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NeatError {
    #[error("population is empty")]
    EmptyPopulation,
    #[error("genome {0} has no fitness assigned")]
    Unevaluated(GenomeId),
    #[error("invalid NEAT configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid genome {id}: {reason}")]
    InvalidGenome { id: GenomeId, reason: String },
    #[error("expected {expected} network inputs, got {got}")]
    InputLength { expected: usize, got: usize },
    #[error("non-finite network input at position {0}")]
    NonFiniteInput(usize),
}
