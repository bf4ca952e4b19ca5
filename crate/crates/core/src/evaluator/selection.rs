use std::fmt::Write as _;

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{sample_windows, EvalError, EvalSettings, PreparedWindow};
use crate::backtest::run_backtest;
use crate::neat::{Genome, GenomeId};
use crate::trainer::parallel_map;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionCriteria {
    pub n_runs: usize,
    pub window_days: u32,
    /// Survivors must hold trades for strictly less than this on average.
    pub max_avg_duration_days: f64,
    /// Inclusive band on the mean number of trades per run.
    pub min_trades: f64,
    pub max_trades: f64,
}

impl Default for SelectionCriteria {
    fn default() -> Self {
        SelectionCriteria {
            n_runs: 20,
            window_days: 365,
            max_avg_duration_days: 90.0,
            min_trades: 5.0,
            max_trades: 200.0,
        }
    }
}

impl SelectionCriteria {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.n_runs == 0 {
            return Err(EvalError::Config("n_runs must be at least 1".into()));
        }
        if self.window_days == 0 {
            return Err(EvalError::Config("window_days must be positive".into()));
        }
        if !(self.min_trades < self.max_trades) {
            return Err(EvalError::Config("trade band needs min < max".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualSummary {
    pub genome_id: GenomeId,
    pub mean_sqn: f64,
    pub mean_return: f64,
    pub mean_trades: f64,
    /// Total holding days over total trades across all runs; 0 without trades.
    pub avg_duration_days: f64,
    pub passes_filters: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRef {
    pub ticker: String,
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub champion: GenomeId,
    /// True when no individual passed the filters and ranking fell back to sqn alone.
    pub relaxed: bool,
    pub windows: Vec<WindowRef>,
    /// In population order.
    pub summaries: Vec<IndividualSummary>,
}

impl SelectionResult {
    pub fn champion_summary(&self) -> &IndividualSummary {
        self.summaries
            .iter()
            .find(|s| s.genome_id == self.champion)
            .expect("champion is summarized")
    }

    /// Aligned table, best mean sqn first.
    pub fn table(&self) -> String {
        let mut rows: Vec<&IndividualSummary> = self.summaries.iter().collect();
        rows.sort_by(|a, b| b.mean_sqn.total_cmp(&a.mean_sqn).then(a.genome_id.cmp(&b.genome_id)));
        let mut out = format!(
            "{:>10} {:>12} {:>12} {:>12} {:>14} {:>6}\n",
            "genome", "mean_sqn", "mean_ret[%]", "trades/run", "avg_dur[days]", "pass"
        );
        for s in rows {
            let mark = if s.genome_id == self.champion { "*" } else { "" };
            let _ = writeln!(
                out,
                "{:>10} {:>12.4} {:>12.4} {:>12.2} {:>14.2} {:>6}{}",
                s.genome_id,
                s.mean_sqn,
                s.mean_return,
                s.mean_trades,
                s.avg_duration_days,
                if s.passes_filters { "yes" } else { "no" },
                mark
            );
        }
        out
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<(), EvalError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| EvalError::output(path, e))?;
        for s in &self.summaries {
            w.serialize(s).map_err(|e| EvalError::output(path, e))?;
        }
        w.flush().map_err(|e| EvalError::output(path, e.into()))
    }
}

fn summarize(genome: &Genome, windows: &[PreparedWindow], settings: &EvalSettings, criteria: &SelectionCriteria) -> Result<IndividualSummary, EvalError> {
    let mut sqn = 0.0;
    let mut ret = 0.0;
    let mut trades = 0usize;
    let mut days = 0.0;
    for pw in windows {
        let r = run_backtest(genome, &pw.window, &pw.features, &settings.broker)?;
        sqn += r.sqn;
        ret += r.pnl_pct;
        trades += r.n_trades;
        days += r.trades.iter().map(|t| t.duration_days as f64).sum::<f64>();
    }
    let n = windows.len() as f64;
    let mean_trades = trades as f64 / n;
    let avg_duration_days = if trades == 0 { 0.0 } else { days / trades as f64 };
    Ok(IndividualSummary {
        genome_id: genome.id,
        mean_sqn: sqn / n,
        mean_return: ret / n,
        mean_trades,
        avg_duration_days,
        passes_filters: avg_duration_days < criteria.max_avg_duration_days
            && mean_trades >= criteria.min_trades
            && mean_trades <= criteria.max_trades,
    })
}

/// Backtests every genome on the same `n_runs` sampled windows and picks the
/// highest mean sqn among those passing the duration and trade-count filters
/// (ties to the lower id). With no survivors the filters are dropped.
pub fn select_champion(
    population: &[Genome],
    data: &crate::market_data::Dataset,
    criteria: &SelectionCriteria,
    settings: &EvalSettings,
    seed: u64,
) -> Result<SelectionResult, EvalError> {
    criteria.validate()?;
    if population.is_empty() {
        return Err(EvalError::EmptyPopulation);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let windows = sample_windows(data, criteria.n_runs, criteria.window_days, settings, &mut rng)?;
    let pool = crate::trainer::build_pool(settings.jobs).map_err(|e| EvalError::Config(e.to_string()))?;
    let summaries = parallel_map(pool.as_ref(), population, |g| summarize(g, &windows, settings, criteria))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    let best = |only_passing: bool| {
        summaries
            .iter()
            .filter(|s| !only_passing || s.passes_filters)
            .max_by(|a, b| a.mean_sqn.total_cmp(&b.mean_sqn).then(b.genome_id.cmp(&a.genome_id)))
            .map(|s| s.genome_id)
    };
    let (champion, relaxed) = match best(true) {
        Some(id) => (id, false),
        None => {
            log::warn!("no individual passed the selection filters; ranking by mean sqn alone");
            (best(false).expect("non-empty population"), true)
        }
    };
    Ok(SelectionResult {
        champion,
        relaxed,
        windows: windows
            .iter()
            .map(|pw| WindowRef {
                ticker: pw.window.ticker().to_string(),
                start: pw.window.start_date(),
                end: pw.window.end_date(),
            })
            .collect(),
        summaries,
    })
}
