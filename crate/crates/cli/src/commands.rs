use std::path::{Path, PathBuf};

use neat_trader::backtest::run_backtest;
use neat_trader::config::EngineConfig;
use neat_trader::evaluator::plot::{line_svg, scatter_svg};
use neat_trader::evaluator::{compare_vs_buy_and_hold, select_champion, ComparisonReport, EvalError, SelectionCriteria};
use neat_trader::indicators::build_features;
use neat_trader::market_data::{synthetic_dataset, Dataset};
use neat_trader::persist::{load_genome, save_genome, PersistError, PopulationFile};
use neat_trader::store::{ingest_csv, write_csv, Store};
use neat_trader::trainer::{
    append_history_csv, checkpoint_name, train, write_history_csv, TrainError, TrainOptions, TrainRunState,
};

use crate::failure::{Classify, ExitKind, Failure};
use crate::{Cli, Command, GlobalOpts, SynthArgs, TrainArgs};

type Outcome = Result<(), Failure>;

/// Config file plus global flag overrides.
fn engine_config(g: &GlobalOpts) -> Result<EngineConfig, Failure> {
    let mut cfg = match &g.config {
        Some(p) => EngineConfig::load(p).or_usage()?,
        None => EngineConfig::default(),
    };
    if let Some(dir) = &g.out_dir {
        cfg.paths.output_dir = dir.clone();
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(j) = g.jobs {
        cfg.jobs = j as usize;
    }
    Ok(cfg)
}

fn prepare_out(cfg: &EngineConfig) -> Outcome {
    std::fs::create_dir_all(&cfg.paths.output_dir)
        .map_err(|e| anyhow::anyhow!("cannot create {}: {e}", cfg.paths.output_dir.display()))
        .or_runtime()
}

fn open_store(cfg: &EngineConfig) -> Result<Store, Failure> {
    let path = cfg.paths.store_path();
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| anyhow::anyhow!("cannot create {}: {e}", dir.display()))
            .or_runtime()?;
    }
    Store::open(&path).or_data()
}

fn load_dataset(cfg: &EngineConfig) -> Result<Dataset, Failure> {
    let path = cfg.paths.store_path();
    if !path.is_file() {
        return Err(Failure::data(format!(
            "no bar store at {} (run `ingest` or `synth` first)",
            path.display()
        )));
    }
    let data = Store::open(&path).or_data()?.load_dataset().or_data()?;
    if data.is_empty() {
        return Err(Failure::data(format!("bar store {} is empty", path.display())));
    }
    Ok(data)
}

fn persist_failure(e: PersistError, reading: bool) -> Failure {
    let kind = if reading { ExitKind::Data } else { ExitKind::Runtime };
    Failure { kind, error: e.into() }
}

fn train_failure(e: TrainError) -> Failure {
    let kind = match &e {
        TrainError::Data(_) => ExitKind::Data,
        TrainError::Schedule(_) | TrainError::Config(_) => ExitKind::Usage,
        _ => ExitKind::Runtime,
    };
    Failure { kind, error: e.into() }
}

fn eval_failure(e: EvalError) -> Failure {
    let kind = match &e {
        EvalError::Data(_) | EvalError::EmptyPopulation => ExitKind::Data,
        EvalError::Config(_) => ExitKind::Usage,
        _ => ExitKind::Runtime,
    };
    Failure { kind, error: e.into() }
}

fn write_text(path: &Path, text: &str) -> Outcome {
    std::fs::write(path, text)
        .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
        .or_runtime()
}

pub fn run(cli: Cli) -> Outcome {
    let cfg = engine_config(&cli.global)?;
    cfg.validate().or_usage()?;
    prepare_out(&cfg)?;
    match cli.command {
        Command::Ingest { files } => ingest(&cfg, &files),
        Command::Synth(args) => synth(&cfg, &args),
        Command::Train(args) => train_cmd(cfg, &args),
        Command::Select { population, runs } => select(&cfg, population, runs),
        Command::Evaluate { genome, runs } => evaluate(&cfg, genome, runs),
        Command::Backtest { genome, ticker, from, to } => backtest(&cfg, &genome, &ticker, from, to),
        Command::Report { history, runs } => report(&cfg, history, runs),
    }
}

fn ingest(cfg: &EngineConfig, files: &[PathBuf]) -> Outcome {
    let mut store = open_store(cfg)?;
    for f in files {
        let stats = ingest_csv(f, &mut store).or_data()?;
        println!("{}: {stats}", f.display());
    }
    println!("store: {}", store.stats().or_data()?);
    Ok(())
}

fn synth(cfg: &EngineConfig, args: &SynthArgs) -> Outcome {
    let mut params = cfg.synthetic.clone();
    if let Some(v) = args.drift {
        params.drift = v;
    }
    if let Some(v) = args.volatility {
        params.volatility = v;
    }
    if let Some(v) = args.cycle_amplitude {
        params.cycle_amplitude = v;
    }
    if let Some(v) = args.cycle_period {
        params.cycle_period = v;
    }
    let data = synthetic_dataset(args.tickers, args.bars, cfg.seed, &params).or_usage()?;
    let mut store = open_store(cfg)?;
    for t in data.tickers() {
        let bars = data.bars(t).unwrap_or_default();
        store.upsert(bars).or_data()?;
        if args.csv {
            write_csv(&cfg.paths.output(&format!("{t}.csv")), bars).or_runtime()?;
        }
    }
    println!("store: {}", store.stats().or_data()?);
    Ok(())
}

fn train_cmd(mut cfg: EngineConfig, args: &TrainArgs) -> Outcome {
    if let Some(f) = args.fitness {
        cfg.fitness = f;
    }
    if let Some(s) = &args.stages {
        cfg.schedule = s.clone();
    }
    if let Some(p) = args.population {
        cfg.neat.population_size = p;
    }
    cfg.validate().or_usage()?;
    let tc = cfg.train_config();
    let data = load_dataset(&cfg)?;
    let state = match &args.resume {
        Some(p) => TrainRunState::load_checkpoint(p).map_err(|e| match e {
            TrainError::Persist(pe) => persist_failure(pe, true),
            other => train_failure(other),
        })?,
        None => TrainRunState::new(&tc.neat, cfg.seed).map_err(train_failure)?,
    };
    let total = tc.schedule.total_generations();
    if state.generation > total {
        return Err(Failure::usage(format!(
            "checkpoint is at generation {} but the schedule ends at {total}",
            state.generation
        )));
    }

    let history = cfg.paths.output("history.csv");
    write_history_csv(&history, &state.history).map_err(train_failure)?;
    let opts = TrainOptions {
        checkpoint_dir: Some(cfg.paths.checkpoint_dir()),
        stop_after: None,
    };
    let state = train(&data, &tc, state, &opts, |_, row| {
        if row.generation % 10 == 0 || row.generation == total {
            log::info!(
                "gen {} stage {} champion {:.4} mean {:.4} species {}",
                row.generation,
                row.stage,
                row.champion_fitness,
                row.mean_fitness,
                row.species
            );
        }
        append_history_csv(&history, row)
    })
    .map_err(train_failure)?;

    state
        .save_checkpoint(&cfg.paths.checkpoint_dir().join(checkpoint_name(state.generation)))
        .map_err(train_failure)?;
    let pop_path = cfg.paths.output("population.json");
    PopulationFile::new(state.generation, state.population.clone())
        .save(&pop_path)
        .map_err(|e| persist_failure(e, false))?;
    if let Some(best) = &state.best {
        save_genome(&cfg.paths.output("best_genome.json"), best).map_err(|e| persist_failure(e, false))?;
    }
    let last = state.history.last();
    println!(
        "trained {} generations; champion fitness {}; population {}; history {}",
        state.generation,
        last.map(|r| format!("{:.4}", r.champion_fitness)).unwrap_or_else(|| "-".into()),
        pop_path.display(),
        history.display()
    );
    Ok(())
}

fn select(cfg: &EngineConfig, population: Option<PathBuf>, runs: Option<usize>) -> Outcome {
    let path = population.unwrap_or_else(|| cfg.paths.output("population.json"));
    let pop = PopulationFile::load(&path).map_err(|e| persist_failure(e, true))?;
    let data = load_dataset(cfg)?;
    let criteria = SelectionCriteria {
        n_runs: runs.unwrap_or(cfg.selection.n_runs),
        ..cfg.selection.clone()
    };
    let result = select_champion(&pop.genomes, &data, &criteria, &cfg.eval_settings(), cfg.seed).map_err(eval_failure)?;
    result
        .write_csv(&cfg.paths.output("selection.csv"))
        .map_err(eval_failure)?;
    let champion = pop
        .genomes
        .iter()
        .find(|g| g.id == result.champion)
        .expect("champion comes from the population");
    save_genome(&cfg.paths.output("champion.json"), champion).map_err(|e| persist_failure(e, false))?;
    print!("{}", result.table());
    let s = result.champion_summary();
    println!(
        "champion {} mean_sqn {:.4} trades/run {:.2} avg_duration {:.2} days",
        s.genome_id, s.mean_sqn, s.mean_trades, s.avg_duration_days
    );
    Ok(())
}

fn write_comparison(cfg: &EngineConfig, r: &ComparisonReport) -> Outcome {
    r.write_runs_csv(&cfg.paths.output("evaluation_runs.csv"))
        .map_err(eval_failure)?;
    r.write_summary_csv(&cfg.paths.output("evaluation_summary.csv"))
        .map_err(eval_failure)?;
    write_text(&cfg.paths.output("evaluation.txt"), &r.table())?;
    let points: Vec<(f64, f64)> = r.runs.iter().map(|x| (x.bnh_return, x.model_return)).collect();
    write_text(
        &cfg.paths.output("evaluation_scatter.svg"),
        &scatter_svg(&points, "Model vs Buy & Hold", "Buy & Hold return [%]", "Model return [%]"),
    )
}

fn evaluate(cfg: &EngineConfig, genome: Option<PathBuf>, runs: Option<usize>) -> Outcome {
    let path = genome.unwrap_or_else(|| cfg.paths.output("champion.json"));
    let g = load_genome(&path).map_err(|e| persist_failure(e, true))?;
    let data = load_dataset(cfg)?;
    let n = runs.unwrap_or(cfg.evaluation.runs);
    let r = compare_vs_buy_and_hold(&g, &data, n, cfg.evaluation.window_days, &cfg.eval_settings(), cfg.seed)
        .map_err(eval_failure)?;
    write_comparison(cfg, &r)?;
    print!("{}", r.table());
    Ok(())
}

fn backtest(cfg: &EngineConfig, genome: &Path, ticker: &str, from: chrono::NaiveDate, to: chrono::NaiveDate) -> Outcome {
    if from > to {
        return Err(Failure::usage(format!("--from {from} is after --to {to}")));
    }
    let g = load_genome(genome).map_err(|e| persist_failure(e, true))?;
    let data = load_dataset(cfg)?;
    let window = data.window_between(ticker, from, to, cfg.warmup).or_data()?;
    let features = build_features(&window, &cfg.indicators).or_data()?;
    let report = run_backtest(&g, &window, &features, &cfg.broker).or_runtime()?;
    let stem = format!("backtest_{ticker}_{from}_{to}");
    write_text(
        &cfg.paths.output(&format!("{stem}.json")),
        &report.to_json().or_runtime()?,
    )?;
    report
        .write_equity_csv(&cfg.paths.output(&format!("{stem}_equity.csv")))
        .or_runtime()?;
    write_text(
        &cfg.paths.output(&format!("{stem}_equity.svg")),
        &line_svg(&report.equity_curve, &format!("{ticker} equity")),
    )?;
    print!("{}", report.summary());
    Ok(())
}

#[derive(Debug, serde::Deserialize)]
struct HistoryLine {
    generation: u32,
    champion_fitness: f64,
    mean_fitness: f64,
    species: usize,
}

fn report(cfg: &EngineConfig, history: Option<PathBuf>, runs: Option<PathBuf>) -> Outcome {
    let explicit = history.is_some() || runs.is_some();
    let history = history.unwrap_or_else(|| cfg.paths.output("history.csv"));
    let runs = runs.unwrap_or_else(|| cfg.paths.output("evaluation_runs.csv"));
    let mut produced = false;
    if history.is_file() {
        let mut rdr = csv::Reader::from_path(&history).or_data()?;
        let rows: Vec<HistoryLine> = rdr.deserialize().collect::<Result<_, _>>().or_data()?;
        let champ: Vec<f64> = rows.iter().map(|r| r.champion_fitness).collect();
        let mean: Vec<f64> = rows.iter().map(|r| r.mean_fitness).collect();
        write_text(&cfg.paths.output("history_champion.svg"), &line_svg(&champ, "Champion fitness"))?;
        write_text(&cfg.paths.output("history_mean.svg"), &line_svg(&mean, "Mean fitness"))?;
        if let Some(last) = rows.last() {
            let best = champ.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            println!(
                "history: {} generations, last champion {:.4}, best champion {:.4}, last mean {:.4}, species {}",
                last.generation, last.champion_fitness, best, last.mean_fitness, last.species
            );
        } else {
            println!("history: empty");
        }
        produced = true;
    }
    if runs.is_file() {
        let records = ComparisonReport::read_runs_csv(&runs).map_err(|e| Failure {
            kind: ExitKind::Data,
            error: e.into(),
        })?;
        let r = ComparisonReport::from_runs(records);
        write_comparison(cfg, &r)?;
        print!("{}", r.table());
        produced = true;
    }
    if !produced || (explicit && !(history.is_file() || runs.is_file())) {
        return Err(Failure::data(format!(
            "nothing to report: neither {} nor {} exists",
            history.display(),
            runs.display()
        )));
    }
    Ok(())
}
