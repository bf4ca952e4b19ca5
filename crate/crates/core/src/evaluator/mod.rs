//! Champion selection and the comparison against Buy & Hold.
//!
//! Selection backtests every individual on the same set of random windows and
//! ranks the ones with short average holds and a sane trade count by mean sqn.
//! The comparison then pairs the champion with Buy & Hold on fresh windows.

mod comparison;
pub mod plot;
mod selection;

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::backtest::{BacktestError, BrokerConfig};
use crate::indicators::{build_features, FeatureVector, IndicatorConfig, IndicatorError};
use crate::market_data::{DataError, Dataset, SeriesWindow, DEFAULT_WARMUP};
use crate::neat::{Genome, GenomeId, InnovationLedger, BIAS_NODE, OUTPUT_NODES};

pub use comparison::{compare_vs_buy_and_hold, ComparisonReport, RunRecord};
pub use selection::{select_champion, IndividualSummary, SelectionCriteria, SelectionResult, WindowRef};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Indicator(#[from] IndicatorError),
    #[error(transparent)]
    Backtest(#[from] BacktestError),
    #[error("population is empty")]
    EmptyPopulation,
    #[error("invalid evaluation settings: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl EvalError {
    pub(crate) fn output(path: &Path, source: csv::Error) -> Self {
        EvalError::Output {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Backtest and feature settings shared by selection and comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSettings {
    pub indicators: IndicatorConfig,
    pub broker: BrokerConfig,
    pub warmup: usize,
    pub jobs: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            indicators: IndicatorConfig::default(),
            broker: BrokerConfig::default(),
            warmup: DEFAULT_WARMUP,
            jobs: 1,
        }
    }
}

/// A window with its features computed once.
#[derive(Debug, Clone)]
pub struct PreparedWindow {
    pub window: SeriesWindow,
    pub features: Vec<FeatureVector<f64>>,
}

impl PreparedWindow {
    pub fn new(window: SeriesWindow, cfg: &IndicatorConfig) -> Result<Self, IndicatorError> {
        let features = build_features(&window, cfg)?;
        Ok(PreparedWindow { window, features })
    }
}

/// Draws `n` windows in order from `rng`.
pub fn sample_windows<R: Rng + ?Sized>(
    data: &Dataset,
    n: usize,
    window_days: u32,
    settings: &EvalSettings,
    rng: &mut R,
) -> Result<Vec<PreparedWindow>, EvalError> {
    (0..n)
        .map(|_| {
            let w = data.sample_window(window_days, settings.warmup, rng)?;
            Ok(PreparedWindow::new(w, &settings.indicators)?)
        })
        .collect()
}

/// Hand-wired genome that buys with all equity on the first bar and then
/// keeps asking to buy: the bias drives buy and volume high and sell low.
pub fn buy_and_hold_genome(id: GenomeId, ledger: &mut InnovationLedger) -> Genome {
    let [buy, sell, volume] = OUTPUT_NODES;
    Genome::from_connections(id, ledger, &[(BIAS_NODE, buy, 10.0), (BIAS_NODE, sell, -10.0), (BIAS_NODE, volume, 10.0)])
}
