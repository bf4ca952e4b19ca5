use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{sample_windows, EvalError, EvalSettings, PreparedWindow};
use crate::backtest::{run_backtest, run_policy, BacktestReport, BuyAndHold};
use crate::market_data::Dataset;
use crate::neat::Genome;
use crate::num::{mean, sample_std};
use crate::trainer::parallel_map;

/// One paired run: the model and Buy & Hold on the same bars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: usize,
    pub ticker: String,
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
    pub model_return: f64,
    pub bnh_return: f64,
    pub model_exposure: f64,
    pub bnh_exposure: f64,
    pub n_trades: usize,
    pub winning_trades: usize,
    pub avg_duration: f64,
}

impl RunRecord {
    fn new(run_id: usize, model: &BacktestReport, bnh: &BacktestReport) -> Self {
        RunRecord {
            run_id,
            ticker: model.ticker.clone(),
            start: model.start,
            end: model.end,
            model_return: model.pnl_pct,
            bnh_return: bnh.pnl_pct,
            model_exposure: model.exposure_pct,
            bnh_exposure: bnh.exposure_pct,
            n_trades: model.n_trades,
            winning_trades: model.winning_trades,
            avg_duration: model.avg_duration_days,
        }
    }
}

/// Model versus Buy & Hold over many random windows. Returns and exposures
/// are percentages; standard deviations are sample (n - 1) deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub n_runs: usize,
    pub avg_return_model: f64,
    pub avg_return_bnh: f64,
    pub std_return_model: f64,
    pub std_return_bnh: f64,
    /// Winning trades over all trades across every run.
    pub model_winning_trades: usize,
    pub model_trades: usize,
    /// 0 when the model never traded; see `model_traded`.
    pub win_rate_model: f64,
    pub model_traded: bool,
    /// Runs with a positive Buy & Hold return over all runs.
    pub bnh_positive_runs: usize,
    pub win_rate_bnh: f64,
    /// Runs where one side's return was strictly higher.
    pub relative_wins_model: usize,
    pub relative_wins_bnh: usize,
    pub ties: usize,
    pub exposure_model: f64,
    pub exposure_bnh: f64,
    pub runs: Vec<RunRecord>,
}

impl ComparisonReport {
    /// Aggregates per-run records.
    pub fn from_runs(runs: Vec<RunRecord>) -> Self {
        let model: Vec<f64> = runs.iter().map(|r| r.model_return).collect();
        let bnh: Vec<f64> = runs.iter().map(|r| r.bnh_return).collect();
        let model_trades: usize = runs.iter().map(|r| r.n_trades).sum();
        let model_winning_trades: usize = runs.iter().map(|r| r.winning_trades).sum();
        let bnh_positive_runs = runs.iter().filter(|r| r.bnh_return > 0.0).count();
        let relative_wins_model = runs.iter().filter(|r| r.model_return > r.bnh_return).count();
        let relative_wins_bnh = runs.iter().filter(|r| r.bnh_return > r.model_return).count();
        let n = runs.len();
        ComparisonReport {
            n_runs: n,
            avg_return_model: mean(&model),
            avg_return_bnh: mean(&bnh),
            std_return_model: sample_std(&model),
            std_return_bnh: sample_std(&bnh),
            model_winning_trades,
            model_trades,
            win_rate_model: if model_trades == 0 {
                0.0
            } else {
                model_winning_trades as f64 / model_trades as f64
            },
            model_traded: model_trades > 0,
            bnh_positive_runs,
            win_rate_bnh: if n == 0 { 0.0 } else { bnh_positive_runs as f64 / n as f64 },
            relative_wins_model,
            relative_wins_bnh,
            ties: n - relative_wins_model - relative_wins_bnh,
            exposure_model: mean(&runs.iter().map(|r| r.model_exposure).collect::<Vec<_>>()),
            exposure_bnh: mean(&runs.iter().map(|r| r.bnh_exposure).collect::<Vec<_>>()),
            runs,
        }
    }

    /// The five summary rows as `(metric, model, buy & hold)` cells.
    pub fn rows(&self) -> [(&'static str, String, String); 5] {
        let rate = |num: usize, den: usize, r: f64| {
            if den == 0 {
                format!("{num}/{den}=n/a")
            } else {
                format!("{num}/{den}={:.2}%", r * 100.0)
            }
        };
        [
            (
                "Average Return",
                format!("{:.2}%", self.avg_return_model),
                format!("{:.2}%", self.avg_return_bnh),
            ),
            (
                "Std of Return",
                format!("{:.2}%", self.std_return_model),
                format!("{:.2}%", self.std_return_bnh),
            ),
            (
                "Win Rate",
                rate(self.model_winning_trades, self.model_trades, self.win_rate_model),
                rate(self.bnh_positive_runs, self.n_runs, self.win_rate_bnh),
            ),
            (
                "Relative Win Rate",
                self.relative_wins_model.to_string(),
                self.relative_wins_bnh.to_string(),
            ),
            (
                "Exposure Time",
                format!("{:.2}%", self.exposure_model),
                format!("{:.2}%", self.exposure_bnh),
            ),
        ]
    }

    /// Aligned text table; a ties line follows when any run tied.
    pub fn table(&self) -> String {
        let rows = self.rows();
        let w0 = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max("Metrics".len());
        let w1 = rows.iter().map(|r| r.1.len()).max().unwrap_or(0).max("Model".len());
        let w2 = rows.iter().map(|r| r.2.len()).max().unwrap_or(0).max("Buy & Hold".len());
        let mut out = String::new();
        let _ = writeln!(out, "{:<w0$}  {:>w1$}  {:>w2$}", "Metrics", "Model", "Buy & Hold");
        let _ = writeln!(out, "{}", "-".repeat(w0 + w1 + w2 + 4));
        for (m, a, b) in &rows {
            let _ = writeln!(out, "{m:<w0$}  {a:>w1$}  {b:>w2$}");
        }
        if self.ties > 0 {
            let _ = writeln!(out, "({} of {} runs tied)", self.ties, self.n_runs);
        }
        out
    }

    /// `metric,model,buy_and_hold` CSV of the summary rows.
    pub fn write_summary_csv(&self, path: &Path) -> Result<(), EvalError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| EvalError::output(path, e))?;
        w.write_record(["metric", "model", "buy_and_hold"])
            .map_err(|e| EvalError::output(path, e))?;
        for (m, a, b) in self.rows() {
            w.write_record([m, &a, &b]).map_err(|e| EvalError::output(path, e))?;
        }
        w.flush().map_err(|e| EvalError::output(path, e.into()))
    }

    pub fn write_runs_csv(&self, path: &Path) -> Result<(), EvalError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| EvalError::output(path, e))?;
        for r in &self.runs {
            w.serialize(r).map_err(|e| EvalError::output(path, e))?;
        }
        w.flush().map_err(|e| EvalError::output(path, e.into()))
    }

    pub fn read_runs_csv(path: &Path) -> Result<Vec<RunRecord>, EvalError> {
        let mut r = csv::Reader::from_path(path).map_err(|e| EvalError::output(path, e))?;
        r.deserialize()
            .collect::<Result<Vec<RunRecord>, _>>()
            .map_err(|e| EvalError::output(path, e))
    }
}

fn paired_run(id: usize, genome: &Genome, pw: &PreparedWindow, settings: &EvalSettings) -> Result<RunRecord, EvalError> {
    let model = run_backtest(genome, &pw.window, &pw.features, &settings.broker)?;
    let bnh = run_policy(&mut BuyAndHold::default(), &pw.window, &pw.features, &settings.broker)?;
    Ok(RunRecord::new(id, &model, &bnh))
}

/// Runs the genome and Buy & Hold on `n_runs` sampled windows of
/// `window_days`; both legs see identical bars.
pub fn compare_vs_buy_and_hold(
    genome: &Genome,
    data: &Dataset,
    n_runs: usize,
    window_days: u32,
    settings: &EvalSettings,
    seed: u64,
) -> Result<ComparisonReport, EvalError> {
    if n_runs == 0 {
        return Err(EvalError::Config("n_runs must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let windows = sample_windows(data, n_runs, window_days, settings, &mut rng)?;
    let pool = crate::trainer::build_pool(settings.jobs).map_err(|e| EvalError::Config(e.to_string()))?;
    let indexed: Vec<(usize, &PreparedWindow)> = windows.iter().enumerate().collect();
    let runs = parallel_map(pool.as_ref(), &indexed, |(i, pw)| paired_run(i + 1, genome, pw, settings))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ComparisonReport::from_runs(runs))
}
