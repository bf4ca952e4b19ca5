use serde::{Deserialize, Serialize};

use super::NeatError;

/// NEAT hyperparameters. Defaults follow the canonical NEAT settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NeatConfig {
    pub population_size: usize,
    /// Excess-gene coefficient (c1).
    pub excess_coefficient: f64,
    /// Disjoint-gene coefficient (c2).
    pub disjoint_coefficient: f64,
    /// Mean weight-difference coefficient (c3).
    pub weight_coefficient: f64,
    pub compatibility_threshold: f64,
    /// Genomes with fewer genes than this use N = 1 in the distance.
    pub small_genome_genes: usize,
    pub init_weight_range: f64,
    pub weight_mutate_prob: f64,
    /// Given a weight mutation, chance each gene is perturbed instead of replaced.
    pub weight_perturb_prob: f64,
    pub weight_perturb_power: f64,
    pub weight_replace_range: f64,
    pub add_connection_prob: f64,
    pub add_node_prob: f64,
    pub crossover_rate: f64,
    pub disabled_inherit_prob: f64,
    pub elitism: usize,
    pub elitism_min_species_size: usize,
    pub stale_species_cutoff: u32,
    pub survival_threshold: f64,
}

impl Default for NeatConfig {
    fn default() -> Self {
        NeatConfig {
            population_size: 150,
            excess_coefficient: 1.0,
            disjoint_coefficient: 1.0,
            weight_coefficient: 0.4,
            compatibility_threshold: 3.0,
            small_genome_genes: 20,
            init_weight_range: 1.0,
            weight_mutate_prob: 0.8,
            weight_perturb_prob: 0.9,
            weight_perturb_power: 0.5,
            weight_replace_range: 3.0,
            add_connection_prob: 0.05,
            add_node_prob: 0.03,
            crossover_rate: 0.75,
            disabled_inherit_prob: 0.75,
            elitism: 1,
            elitism_min_species_size: 5,
            stale_species_cutoff: 15,
            survival_threshold: 0.2,
        }
    }
}

impl NeatConfig {
    pub fn validate(&self) -> Result<(), NeatError> {
        let probs = [
            ("weight_mutate_prob", self.weight_mutate_prob),
            ("weight_perturb_prob", self.weight_perturb_prob),
            ("add_connection_prob", self.add_connection_prob),
            ("add_node_prob", self.add_node_prob),
            ("crossover_rate", self.crossover_rate),
            ("disabled_inherit_prob", self.disabled_inherit_prob),
            ("survival_threshold", self.survival_threshold),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(NeatError::InvalidConfig(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        if self.population_size < 2 {
            return Err(NeatError::InvalidConfig("population_size must be at least 2".into()));
        }
        let nonneg = [
            ("excess_coefficient", self.excess_coefficient),
            ("disjoint_coefficient", self.disjoint_coefficient),
            ("weight_coefficient", self.weight_coefficient),
            ("compatibility_threshold", self.compatibility_threshold),
            ("init_weight_range", self.init_weight_range),
            ("weight_perturb_power", self.weight_perturb_power),
            ("weight_replace_range", self.weight_replace_range),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(NeatError::InvalidConfig(format!("{name} must be finite and non-negative")));
            }
        }
        Ok(())
    }
}
