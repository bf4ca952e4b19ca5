//! Generational training loop.
//!
//! Each generation samples one window (the schedule decides its length),
//! evaluates every genome on it in parallel, then speciates and reproduces on
//! a single thread. All randomness flows from one seeded generator held in the
//! run state, so a run is reproducible from its seed or from any checkpoint.

mod schedule;

use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backtest::{run_backtest, BacktestError, BrokerConfig};
use crate::fitness::{self, FitnessOption, FitnessWeights};
use crate::indicators::{build_features, FeatureVector, IndicatorConfig, IndicatorError};
use crate::market_data::{DataError, Dataset, SeriesWindow, DEFAULT_WARMUP};
use crate::neat::{init_population, reproduce, speciate, Genome, GenomeId, InnovationLedger, NeatConfig, NeatError, Species, FIRST_HIDDEN};
use crate::persist::{load_json, save_json, PersistError};

pub use schedule::{ScheduleError, Stage, StageSchedule};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Columns of the history CSV.
pub const HISTORY_HEADER: [&str; 10] = [
    "generation",
    "stage",
    "window_days",
    "ticker",
    "window_start",
    "window_end",
    "champion_id",
    "champion_fitness",
    "mean_fitness",
    "species",
];

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Indicator(#[from] IndicatorError),
    #[error(transparent)]
    Backtest(#[from] BacktestError),
    #[error(transparent)]
    Neat(#[from] NeatError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Persist(#[from] PersistError),
    #[error("genome {0} scored a non-finite fitness")]
    NonFiniteFitness(GenomeId),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("history file {path}: {source}")]
    History {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub neat: NeatConfig,
    pub indicators: IndicatorConfig,
    pub broker: BrokerConfig,
    pub schedule: StageSchedule,
    pub fitness: FitnessOption,
    pub weights: FitnessWeights,
    pub warmup: usize,
    /// Write a checkpoint every this many generations; 0 disables.
    pub checkpoint_every: u32,
    /// Sample a separate window for each genome instead of one per generation.
    pub per_genome_windows: bool,
    /// Worker threads for evaluation; 1 evaluates on the calling thread.
    pub jobs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            neat: NeatConfig::default(),
            indicators: IndicatorConfig::default(),
            broker: BrokerConfig::default(),
            schedule: StageSchedule::default(),
            fitness: FitnessOption::default(),
            weights: FitnessWeights::default(),
            warmup: DEFAULT_WARMUP,
            checkpoint_every: 50,
            per_genome_windows: false,
            jobs: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        self.neat.validate()?;
        self.indicators.validate()?;
        self.broker.validate()?;
        self.weights
            .validate()
            .map_err(|e| TrainError::Config(e.to_string()))?;
        if self.warmup < self.indicators.min_warmup() {
            return Err(IndicatorError::WarmupTooShort {
                warmup: self.warmup,
                needed: self.indicators.min_warmup(),
            }
            .into());
        }
        if self.jobs == 0 {
            return Err(TrainError::Config("jobs must be at least 1".into()));
        }
        Ok(())
    }
}

/// One row per completed generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub generation: u32,
    pub stage: usize,
    pub window_days: u32,
    /// Empty when genomes were evaluated on separate windows.
    pub ticker: String,
    pub window_start: Option<NaiveDate>,
    pub window_end: Option<NaiveDate>,
    pub champion_id: GenomeId,
    pub champion_fitness: f64,
    pub mean_fitness: f64,
    pub species: usize,
}

impl HistoryRow {
    fn csv_fields(&self) -> [String; 10] {
        let d = |d: Option<NaiveDate>| d.map(|d| d.to_string()).unwrap_or_default();
        [
            self.generation.to_string(),
            self.stage.to_string(),
            self.window_days.to_string(),
            self.ticker.clone(),
            d(self.window_start),
            d(self.window_end),
            self.champion_id.to_string(),
            self.champion_fitness.to_string(),
            self.mean_fitness.to_string(),
            self.species.to_string(),
        ]
    }
}

/// Writes the full history as CSV.
pub fn write_history_csv(path: &Path, rows: &[HistoryRow]) -> Result<(), TrainError> {
    let err = |source| TrainError::History {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| err(e.into()))?;
    w.write_record(HISTORY_HEADER).map_err(|e| err(e.into()))?;
    for r in rows {
        w.write_record(r.csv_fields()).map_err(|e| err(e.into()))?;
    }
    w.flush().map_err(err)
}

/// Appends one row to a history CSV created by [`write_history_csv`].
pub fn append_history_csv(path: &Path, row: &HistoryRow) -> Result<(), TrainError> {
    let err = |source| TrainError::History {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::OpenOptions::new().append(true).open(path).map_err(err)?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(row.csv_fields()).map_err(|e| err(e.into()))?;
    w.flush().map_err(err)?;
    w.into_inner().map_err(|e| err(e.into_error()))?.flush().map_err(err)
}

/// Everything needed to continue a run bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRunState {
    pub version: u32,
    pub seed: u64,
    /// Generations completed.
    pub generation: u32,
    /// Next generation's genomes, not yet evaluated.
    pub population: Vec<Genome>,
    pub species: Vec<Species>,
    pub ledger: InnovationLedger,
    pub rng: ChaCha8Rng,
    pub history: Vec<HistoryRow>,
    /// Highest-scoring genome seen in any generation, with its fitness.
    pub best: Option<Genome>,
    /// Champion of the latest completed generation, with its fitness.
    pub champion: Option<Genome>,
}

impl TrainRunState {
    pub fn new(cfg: &NeatConfig, seed: u64) -> Result<Self, TrainError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ledger = InnovationLedger::new(FIRST_HIDDEN);
        let population = init_population(cfg, &mut ledger, &mut rng)?;
        Ok(TrainRunState {
            version: CHECKPOINT_VERSION,
            seed,
            generation: 0,
            population,
            species: Vec::new(),
            ledger,
            rng,
            history: Vec::new(),
            best: None,
            champion: None,
        })
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<(), TrainError> {
        Ok(save_json(path, self)?)
    }

    pub fn load_checkpoint(path: &Path) -> Result<Self, TrainError> {
        let s: TrainRunState = load_json(path)?;
        if s.version != CHECKPOINT_VERSION {
            return Err(PersistError::Version {
                path: path.to_path_buf(),
                found: s.version,
                expected: CHECKPOINT_VERSION,
            }
            .into());
        }
        Ok(s)
    }
}

/// File name used for the checkpoint after generation `gen`.
pub fn checkpoint_name(gen: u32) -> String {
    format!("checkpoint-{gen:05}.json")
}

/// Backtests `genome` on a prepared window and scores it.
pub fn score_genome(
    genome: &Genome,
    window: &SeriesWindow,
    features: &[FeatureVector<f64>],
    cfg: &TrainConfig,
) -> Result<f64, TrainError> {
    let report = run_backtest(genome, window, features, &cfg.broker)?;
    let f = fitness::evaluate(cfg.fitness, &report, &cfg.weights);
    if f.is_finite() {
        Ok(f)
    } else {
        Err(TrainError::NonFiniteFitness(genome.id))
    }
}

/// Maps `f` over `items` on `pool` (or inline without one), keeping order.
pub(crate) fn parallel_map<T, U, F>(pool: Option<&rayon::ThreadPool>, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    match pool {
        Some(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        None => items.iter().map(f).collect(),
    }
}

pub(crate) fn build_pool(jobs: usize) -> Result<Option<rayon::ThreadPool>, TrainError> {
    if jobs <= 1 {
        return Ok(None);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map(Some)
        .map_err(|e| TrainError::Config(e.to_string()))
}

/// Runs one generation: sample, evaluate, record, speciate, reproduce.
pub fn run_generation(
    state: &mut TrainRunState,
    data: &Dataset,
    cfg: &TrainConfig,
    pool: Option<&rayon::ThreadPool>,
) -> Result<HistoryRow, TrainError> {
    let gen = state.generation + 1;
    let stage = cfg.schedule.stage_for(gen)?;
    let window_days = cfg.schedule.window_days_for(gen)?;
    state.ledger.new_generation();

    let (scores, shared) = if cfg.per_genome_windows {
        let mut prepared = Vec::with_capacity(state.population.len());
        for _ in &state.population {
            let w = data.sample_window(window_days, cfg.warmup, &mut state.rng)?;
            let f = build_features(&w, &cfg.indicators)?;
            prepared.push((w, f));
        }
        let jobs: Vec<_> = state.population.iter().zip(&prepared).collect();
        let scores = parallel_map(pool, &jobs, |(g, (w, f))| score_genome(g, w, f, cfg));
        (scores, None)
    } else {
        let w = data.sample_window(window_days, cfg.warmup, &mut state.rng)?;
        let f = build_features(&w, &cfg.indicators)?;
        let scores = parallel_map(pool, &state.population, |g| score_genome(g, &w, &f, cfg));
        (scores, Some(w))
    };
    for (g, s) in state.population.iter_mut().zip(scores) {
        g.fitness = Some(s?);
    }

    let champion = state
        .population
        .iter()
        .max_by(|a, b| {
            let (fa, fb) = (a.fitness.unwrap_or(f64::MIN), b.fitness.unwrap_or(f64::MIN));
            fa.total_cmp(&fb).then(b.id.cmp(&a.id))
        })
        .ok_or(NeatError::EmptyPopulation)?
        .clone();
    let champion_fitness = champion.fitness.unwrap_or(f64::MIN);
    let mean_fitness = state.population.iter().filter_map(|g| g.fitness).sum::<f64>() / state.population.len() as f64;
    if state
        .best
        .as_ref()
        .is_none_or(|b| b.fitness.unwrap_or(f64::MIN) < champion_fitness)
    {
        state.best = Some(champion.clone());
    }
    state.champion = Some(champion.clone());

    let previous = std::mem::take(&mut state.species);
    state.species = speciate(&state.population, previous, &cfg.neat, &mut state.ledger, &mut state.rng);
    let species_count = state.species.len();
    let next = reproduce(
        &mut state.species,
        &state.population,
        &cfg.neat,
        &mut state.ledger,
        &mut state.rng,
    )?;
    state.population = next;
    state.generation = gen;

    let row = HistoryRow {
        generation: gen,
        stage,
        window_days,
        ticker: shared.as_ref().map(|w| w.ticker().to_string()).unwrap_or_default(),
        window_start: shared.as_ref().and_then(|w| w.start_date()),
        window_end: shared.as_ref().and_then(|w| w.end_date()),
        champion_id: champion.id,
        champion_fitness,
        mean_fitness,
        species: species_count,
    };
    state.history.push(row.clone());
    Ok(row)
}

/// Where and how often [`train`] writes checkpoints, and when it stops early.
#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    pub checkpoint_dir: Option<PathBuf>,
    /// Stop once this many generations are complete (for interrupting runs).
    pub stop_after: Option<u32>,
}

/// Runs generations until the schedule (or `opts.stop_after`) is exhausted.
/// `on_generation` sees every completed row; returning an error aborts.
pub fn train<F>(
    data: &Dataset,
    cfg: &TrainConfig,
    mut state: TrainRunState,
    opts: &TrainOptions,
    mut on_generation: F,
) -> Result<TrainRunState, TrainError>
where
    F: FnMut(&TrainRunState, &HistoryRow) -> Result<(), TrainError>,
{
    cfg.validate()?;
    let longest = cfg.schedule.max_window_days();
    if data.eligible_tickers(longest, cfg.warmup).is_empty() {
        return Err(DataError::InsufficientHistory {
            window_days: longest,
            warmup_len: cfg.warmup,
        }
        .into());
    }
    let total = cfg.schedule.total_generations();
    let end = opts.stop_after.map_or(total, |s| s.min(total));
    let pool = build_pool(cfg.jobs)?;
    while state.generation < end {
        let row = run_generation(&mut state, data, cfg, pool.as_ref())?;
        log::debug!(
            "generation {} champion {:.4} mean {:.4} species {}",
            row.generation,
            row.champion_fitness,
            row.mean_fitness,
            row.species
        );
        on_generation(&state, &row)?;
        if let Some(dir) = &opts.checkpoint_dir {
            if cfg.checkpoint_every > 0 && state.generation.is_multiple_of(cfg.checkpoint_every) {
                state.save_checkpoint(&dir.join(checkpoint_name(state.generation)))?;
            }
        }
    }
    Ok(state)
}

/// History as CSV text, for comparisons.
pub fn history_csv_string(rows: &[HistoryRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HISTORY_HEADER).expect("in-memory write");
    for r in rows {
        w.write_record(r.csv_fields()).expect("in-memory write");
    }
    let mut bytes = w.into_inner().expect("in-memory flush");
    bytes.flush().expect("in-memory flush");
    String::from_utf8(bytes).expect("csv is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{synthetic_dataset, SyntheticParams};

    fn small_cfg(gens: u32) -> TrainConfig {
        TrainConfig {
            neat: NeatConfig {
                population_size: 20,
                ..Default::default()
            },
            schedule: format!("{gens}:60").parse().unwrap(),
            checkpoint_every: 2,
            ..Default::default()
        }
    }

    fn data() -> Dataset {
        synthetic_dataset(3, 400, 9, &SyntheticParams::default()).unwrap()
    }

    #[test]
    fn generation_assigns_fitness_and_conserves_size() {
        let cfg = small_cfg(3);
        let data = data();
        let mut s = TrainRunState::new(&cfg.neat, 1).unwrap();
        let row = run_generation(&mut s, &data, &cfg, None).unwrap();
        assert_eq!(row.generation, 1);
        assert_eq!(s.population.len(), 20);
        assert!(row.champion_fitness.is_finite() && row.mean_fitness <= row.champion_fitness);
        assert!(row.species >= 1);
        assert!(s.best.as_ref().unwrap().fitness.unwrap().is_finite());
    }

    #[test]
    fn history_rows_and_checkpoints() {
        let cfg = small_cfg(5);
        let dir = tempfile::tempdir().unwrap();
        let opts = TrainOptions {
            checkpoint_dir: Some(dir.path().to_path_buf()),
            stop_after: None,
        };
        let mut seen = Vec::new();
        let s = train(&data(), &cfg, TrainRunState::new(&cfg.neat, 2).unwrap(), &opts, |_, r| {
            seen.push(r.generation);
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![1, 2, 3, 4, 5]);
        assert_eq!(s.history.len(), 5);
        assert!(dir.path().join(checkpoint_name(2)).exists());
        assert!(dir.path().join(checkpoint_name(4)).exists());
        assert!(!dir.path().join(checkpoint_name(5)).exists());
    }

    #[test]
    fn resume_matches_uninterrupted() {
        let cfg = small_cfg(6);
        let data = data();
        let full = train(&data, &cfg, TrainRunState::new(&cfg.neat, 3).unwrap(), &Default::default(), |_, _| Ok(()))
            .unwrap();

        let dir = tempfile::tempdir().unwrap();
        let opts = TrainOptions {
            checkpoint_dir: Some(dir.path().to_path_buf()),
            stop_after: Some(4),
        };
        let first = train(&data, &cfg, TrainRunState::new(&cfg.neat, 3).unwrap(), &opts, |_, _| Ok(())).unwrap();
        assert_eq!(first.generation, 4);
        let resumed = TrainRunState::load_checkpoint(&dir.path().join(checkpoint_name(4))).unwrap();
        assert_eq!(resumed, first);
        let rest = train(&data, &cfg, resumed, &Default::default(), |_, _| Ok(())).unwrap();
        assert_eq!(history_csv_string(&rest.history), history_csv_string(&full.history));
        assert_eq!(rest, full);
    }

    #[test]
    fn parallel_evaluation_matches_serial() {
        let data = data();
        let mut cfg = small_cfg(3);
        let serial = train(&data, &cfg, TrainRunState::new(&cfg.neat, 4).unwrap(), &Default::default(), |_, _| Ok(()))
            .unwrap();
        cfg.jobs = 4;
        let par = train(&data, &cfg, TrainRunState::new(&cfg.neat, 4).unwrap(), &Default::default(), |_, _| Ok(()))
            .unwrap();
        assert_eq!(serial, par);
    }

    #[test]
    fn per_genome_windows_leave_ticker_blank() {
        let data = data();
        let mut cfg = small_cfg(1);
        cfg.per_genome_windows = true;
        let s = train(&data, &cfg, TrainRunState::new(&cfg.neat, 5).unwrap(), &Default::default(), |_, _| Ok(()))
            .unwrap();
        assert_eq!(s.history[0].ticker, "");
        assert!(s.history[0].window_start.is_none());
    }

    #[test]
    fn fails_fast_without_enough_history() {
        let mut cfg = small_cfg(2);
        cfg.schedule = "2:3650".parse().unwrap();
        let err = train(&data(), &cfg, TrainRunState::new(&cfg.neat, 6).unwrap(), &Default::default(), |_, _| Ok(()));
        assert!(matches!(err, Err(TrainError::Data(DataError::InsufficientHistory { window_days: 3650, .. }))));
    }

    #[test]
    fn history_csv_files() {
        let cfg = small_cfg(2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("history.csv");
        write_history_csv(&path, &[]).unwrap();
        let s = train(&data(), &cfg, TrainRunState::new(&cfg.neat, 7).unwrap(), &Default::default(), |_, r| {
            append_history_csv(&path, r)
        })
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, history_csv_string(&s.history));
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("generation,stage,window_days,"));
    }
}
