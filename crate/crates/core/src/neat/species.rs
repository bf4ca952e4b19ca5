use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{compatibility, Genome, GenomeId, InnovationLedger, NeatConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Species {
    pub id: u64,
    /// Compared against during the next speciation pass.
    pub representative: Genome,
    pub members: Vec<GenomeId>,
    /// Generations since `best_fitness` last improved.
    pub staleness: u32,
    pub best_fitness: Option<f64>,
}

/// Partitions `population` into species. Each genome joins the first species
/// whose representative lies within the compatibility threshold, otherwise it
/// founds a new one. Previous species keep their id and stagnation record;
/// empty ones are dropped. Afterwards each species draws a random current
/// member as its representative for the next pass.
pub fn speciate<R: Rng + ?Sized>(
    population: &[Genome],
    previous: Vec<Species>,
    cfg: &NeatConfig,
    ledger: &mut InnovationLedger,
    rng: &mut R,
) -> Vec<Species> {
    let mut species: Vec<Species> = previous
        .into_iter()
        .map(|mut s| {
            s.members.clear();
            s
        })
        .collect();
    for g in population {
        let home = species
            .iter()
            .position(|s| compatibility(&s.representative, g, cfg) < cfg.compatibility_threshold);
        match home {
            Some(i) => species[i].members.push(g.id),
            None => species.push(Species {
                id: ledger.new_species_id(),
                representative: g.clone(),
                members: vec![g.id],
                staleness: 0,
                best_fitness: None,
            }),
        }
    }
    species.retain(|s| !s.members.is_empty());
    for s in &mut species {
        let pick = s.members[rng.random_range(0..s.members.len())];
        if let Some(g) = population.iter().find(|g| g.id == pick) {
            s.representative = g.clone();
        }
    }
    species
}
