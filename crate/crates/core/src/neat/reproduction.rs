use std::collections::BTreeMap;

use rand::Rng;

use super::{crossover, mutate, Genome, GenomeId, InnovationLedger, NeatConfig, NeatError, Species};

/// Splits `total` offspring proportionally to `scores` using largest
/// remainders (ties to the earlier entry). All-zero scores split evenly.
pub fn offspring_quotas(scores: &[f64], total: usize) -> Vec<usize> {
    if scores.is_empty() {
        return Vec::new();
    }
    let sum: f64 = scores.iter().sum();
    let shares: Vec<f64> = if sum > 0.0 && sum.is_finite() {
        scores.iter().map(|s| s / sum * total as f64).collect()
    } else {
        vec![total as f64 / scores.len() as f64; scores.len()]
    };
    let mut quotas: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let assigned: usize = quotas.iter().sum();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = shares[a] - shares[a].floor();
        let fb = shares[b] - shares[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        quotas[i] += 1;
    }
    quotas
}

fn fitness_of(g: &Genome) -> Result<f64, NeatError> {
    g.fitness.ok_or(NeatError::Unevaluated(g.id))
}

/// Best-first order: fitness descending, id ascending.
fn rank(a: &Genome, b: &Genome) -> std::cmp::Ordering {
    let fa = a.fitness.unwrap_or(f64::NEG_INFINITY);
    let fb = b.fitness.unwrap_or(f64::NEG_INFINITY);
    fb.total_cmp(&fa).then(a.id.cmp(&b.id))
}

/// Produces the next generation.
///
/// Stagnation is updated first; species stale for `stale_species_cutoff`
/// generations are dropped unless they hold the population champion. Each
/// survivor's quota is proportional to its mean shifted fitness (fitness
/// shared by species size, shifted so the population minimum is zero). Within
/// a species the best genome is copied unchanged when the species has at least
/// `elitism_min_species_size` members, and the remaining offspring are bred
/// from the top `survival_threshold` fraction. Species that receive no
/// offspring are removed from `species`.
pub fn reproduce<R: Rng + ?Sized>(
    species: &mut Vec<Species>,
    population: &[Genome],
    cfg: &NeatConfig,
    ledger: &mut InnovationLedger,
    rng: &mut R,
) -> Result<Vec<Genome>, NeatError> {
    if population.is_empty() || species.is_empty() {
        return Err(NeatError::EmptyPopulation);
    }
    let by_id: BTreeMap<GenomeId, &Genome> = population.iter().map(|g| (g.id, g)).collect();
    for g in population {
        fitness_of(g)?;
    }
    let champion = population.iter().min_by(|a, b| rank(a, b)).expect("non-empty").id;

    let mut members: Vec<Vec<&Genome>> = Vec::with_capacity(species.len());
    for s in species.iter_mut() {
        let mut ms: Vec<&Genome> = s.members.iter().filter_map(|id| by_id.get(id).copied()).collect();
        ms.sort_by(|a, b| rank(a, b));
        let best = ms.first().and_then(|g| g.fitness).unwrap_or(f64::NEG_INFINITY);
        match s.best_fitness {
            Some(prev) if best <= prev => s.staleness += 1,
            _ => {
                s.best_fitness = Some(best);
                s.staleness = 0;
            }
        }
        members.push(ms);
    }

    let keep: Vec<bool> = species
        .iter()
        .zip(&members)
        .map(|(s, ms)| !ms.is_empty() && (s.staleness < cfg.stale_species_cutoff || ms.iter().any(|g| g.id == champion)))
        .collect();

    let min_fitness = members
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .flat_map(|(ms, _)| ms.iter().filter_map(|g| g.fitness))
        .fold(f64::INFINITY, f64::min);
    let scores: Vec<f64> = members
        .iter()
        .zip(&keep)
        .map(|(ms, &k)| {
            if !k {
                return 0.0;
            }
            // sum of fitness shared by species size = mean fitness
            ms.iter().filter_map(|g| g.fitness).map(|f| f - min_fitness).sum::<f64>() / ms.len() as f64
        })
        .collect();
    let live: Vec<usize> = (0..species.len()).filter(|&i| keep[i]).collect();
    let live_scores: Vec<f64> = live.iter().map(|&i| scores[i]).collect();
    let live_quotas = offspring_quotas(&live_scores, cfg.population_size);
    let mut quotas = vec![0usize; species.len()];
    for (k, &i) in live.iter().enumerate() {
        quotas[i] = live_quotas[k];
    }

    let mut next = Vec::with_capacity(cfg.population_size);
    for (ms, &quota) in members.iter().zip(&quotas) {
        if quota == 0 {
            continue;
        }
        let mut remaining = quota;
        if ms.len() >= cfg.elitism_min_species_size {
            for elite in ms.iter().take(cfg.elitism.min(remaining)) {
                let mut e = (*elite).clone();
                e.fitness = None;
                next.push(e);
                remaining -= 1;
            }
        }
        let cutoff = ((cfg.survival_threshold * ms.len() as f64).ceil() as usize).clamp(1, ms.len());
        let parents = &ms[..cutoff];
        for _ in 0..remaining {
            let id = ledger.new_genome_id();
            let mut child = if parents.len() >= 2 && rng.random_bool(cfg.crossover_rate) {
                let a = rng.random_range(0..parents.len());
                let mut b = rng.random_range(0..parents.len() - 1);
                if b >= a {
                    b += 1;
                }
                crossover(parents[a], parents[b], id, cfg, rng)?
            } else {
                let p = parents[rng.random_range(0..parents.len())];
                Genome {
                    id,
                    fitness: None,
                    ..p.clone()
                }
            };
            mutate(&mut child, cfg, ledger, rng);
            next.push(child);
        }
    }

    let mut i = 0;
    species.retain(|_| {
        let k = quotas[i] > 0;
        i += 1;
        k
    });
    debug_assert_eq!(next.len(), cfg.population_size);
    Ok(next)
}
