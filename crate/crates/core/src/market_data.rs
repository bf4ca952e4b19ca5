//! Daily OHLCV bars, the in-memory dataset used for sampling, the synthetic
//! series generator and the random window sampler.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Default number of leading bars reserved for indicator priming.
pub const DEFAULT_WARMUP: usize = 50;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("malformed header in {path}: expected Ticker,Datetime,Open,High,Low,Close,Adj_Close,Volume, got {found}")]
    MalformedHeader { path: PathBuf, found: String },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("store error: {0}")]
    Store(#[from] rusqlite::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("insufficient history: no ticker covers {warmup_len} warmup bars plus a {window_days}-day window")]
    InsufficientHistory { window_days: u32, warmup_len: usize },
    #[error("unknown ticker {0}")]
    UnknownTicker(String),
    #[error("no bars for {ticker} between {from} and {to}")]
    EmptyRange {
        ticker: String,
        from: NaiveDate,
        to: NaiveDate,
    },
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("invalid synthetic parameters: {0}")]
    InvalidParams(String),
}

/// One daily OHLCV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub ticker: String,
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub adj_close: f64,
    pub volume: f64,
}

impl Bar {
    /// Checks the row invariants, returning a reason on violation.
    pub fn validate(&self) -> Result<(), String> {
        let prices = [self.open, self.high, self.low, self.close, self.adj_close];
        if prices.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err("prices must be finite and positive".into());
        }
        if !self.volume.is_finite() || self.volume < 0.0 {
            return Err("volume must be finite and non-negative".into());
        }
        if self.high < self.low {
            return Err("high < low".into());
        }
        if self.low > self.open.min(self.close) || self.high < self.open.max(self.close) {
            return Err("open/close outside [low, high]".into());
        }
        Ok(())
    }

    /// Ratio applied to the raw prices to obtain the adjusted series.
    #[inline]
    pub fn adjustment(&self) -> f64 {
        self.adj_close / self.close
    }
}

/// Adjusted price columns of a window, as consumed by indicators and the broker.
#[derive(Debug, Clone, Default)]
pub struct PriceSeries {
    pub open: Vec<f64>,
    pub high: Vec<f64>,
    pub low: Vec<f64>,
    pub close: Vec<f64>,
    pub volume: Vec<f64>,
}

impl PriceSeries {
    pub fn len(&self) -> usize {
        self.close.len()
    }

    pub fn is_empty(&self) -> bool {
        self.close.is_empty()
    }

    /// Adjusted columns: every raw price is scaled by `adj_close / close`.
    pub fn from_bars(bars: &[Bar]) -> Self {
        let mut s = PriceSeries {
            open: Vec::with_capacity(bars.len()),
            high: Vec::with_capacity(bars.len()),
            low: Vec::with_capacity(bars.len()),
            close: Vec::with_capacity(bars.len()),
            volume: Vec::with_capacity(bars.len()),
        };
        for b in bars {
            let k = b.adjustment();
            s.open.push(b.open * k);
            s.high.push(b.high * k);
            s.low.push(b.low * k);
            s.close.push(b.adj_close);
            s.volume.push(b.volume);
        }
        s
    }

    pub fn convert<T: crate::Real>(xs: &[f64]) -> Vec<T> {
        xs.iter().map(|&x| T::lit(x)).collect()
    }
}

/// A contiguous run of bars for one ticker: `warmup_len` priming bars followed
/// by `trade_len` tradable bars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesWindow {
    ticker: String,
    bars: Vec<Bar>,
    warmup_len: usize,
    trade_len: usize,
}

impl SeriesWindow {
    pub fn new(ticker: impl Into<String>, bars: Vec<Bar>, warmup_len: usize) -> Result<Self, DataError> {
        let ticker = ticker.into();
        if bars.len() < warmup_len {
            return Err(DataError::InvalidWindow(format!(
                "{} bars cannot hold {} warmup bars",
                bars.len(),
                warmup_len
            )));
        }
        if bars.windows(2).any(|w| w[0].date >= w[1].date) {
            return Err(DataError::InvalidWindow("bars must have strictly increasing dates".into()));
        }
        if let Some(b) = bars.iter().find(|b| b.ticker != ticker) {
            return Err(DataError::InvalidWindow(format!("bar for {} in {} window", b.ticker, ticker)));
        }
        let trade_len = bars.len() - warmup_len;
        Ok(SeriesWindow {
            ticker,
            bars,
            warmup_len,
            trade_len,
        })
    }

    pub fn ticker(&self) -> &str {
        &self.ticker
    }

    pub fn bars(&self) -> &[Bar] {
        &self.bars
    }

    pub fn warmup_len(&self) -> usize {
        self.warmup_len
    }

    pub fn trade_len(&self) -> usize {
        self.trade_len
    }

    pub fn trade_bars(&self) -> &[Bar] {
        &self.bars[self.warmup_len..]
    }

    pub fn start_date(&self) -> Option<NaiveDate> {
        self.trade_bars().first().map(|b| b.date)
    }

    pub fn end_date(&self) -> Option<NaiveDate> {
        self.trade_bars().last().map(|b| b.date)
    }

    pub fn prices(&self) -> PriceSeries {
        PriceSeries::from_bars(&self.bars)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub ticker_count: usize,
    pub row_count: usize,
    pub date_min: Option<NaiveDate>,
    pub date_max: Option<NaiveDate>,
    pub rejected_row_count: usize,
}

impl std::fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let d = |d: Option<NaiveDate>| d.map(|d| d.to_string()).unwrap_or_else(|| "-".into());
        write!(
            f,
            "tickers={} rows={} from={} to={} rejected={}",
            self.ticker_count,
            self.row_count,
            d(self.date_min),
            d(self.date_max),
            self.rejected_row_count
        )
    }
}

/// Per-ticker bar arrays, sorted by date with unique dates.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    series: BTreeMap<String, Vec<Bar>>,
}

impl Dataset {
    /// Builds a dataset; duplicate (ticker, date) keys keep the last bar seen.
    pub fn from_bars(bars: impl IntoIterator<Item = Bar>) -> Self {
        let mut keyed: BTreeMap<String, BTreeMap<NaiveDate, Bar>> = BTreeMap::new();
        for b in bars {
            keyed.entry(b.ticker.clone()).or_default().insert(b.date, b);
        }
        Dataset {
            series: keyed
                .into_iter()
                .map(|(t, m)| (t, m.into_values().collect()))
                .collect(),
        }
    }

    pub fn tickers(&self) -> impl Iterator<Item = &str> {
        self.series.keys().map(String::as_str)
    }

    pub fn bars(&self, ticker: &str) -> Option<&[Bar]> {
        self.series.get(ticker).map(Vec::as_slice)
    }

    pub fn is_empty(&self) -> bool {
        self.series.values().all(Vec::is_empty)
    }

    pub fn stats(&self) -> DatasetStats {
        let row_count = self.series.values().map(Vec::len).sum();
        DatasetStats {
            ticker_count: self.series.values().filter(|v| !v.is_empty()).count(),
            row_count,
            date_min: self.series.values().filter_map(|v| v.first()).map(|b| b.date).min(),
            date_max: self.series.values().filter_map(|v| v.last()).map(|b| b.date).max(),
            rejected_row_count: 0,
        }
    }

    /// Inclusive range of valid window start indices for one ticker: the start
    /// must leave `warmup_len` bars in front and the whole calendar span must be
    /// covered by the ticker's history.
    fn start_range(bars: &[Bar], window_days: u32, warmup_len: usize) -> Option<(usize, usize)> {
        let last = bars.last()?.date;
        let span = Duration::days(i64::from(window_days) - 1);
        // starts are monotone in date, so the valid ones form a prefix of [warmup_len..]
        let upper = bars.partition_point(|b| b.date + span <= last);
        if upper == 0 || upper <= warmup_len {
            return None;
        }
        Some((warmup_len, upper - 1))
    }

    /// Tickers with at least one valid start for the given window shape.
    pub fn eligible_tickers(&self, window_days: u32, warmup_len: usize) -> Vec<&str> {
        self.series
            .iter()
            .filter(|(_, bars)| Self::start_range(bars, window_days, warmup_len).is_some())
            .map(|(t, _)| t.as_str())
            .collect()
    }

    /// Samples a random window: a uniformly chosen eligible ticker, then a
    /// uniformly chosen start bar. The trade section holds the bars dated within
    /// `[start, start + window_days)`, preceded by `warmup_len` bars.
    pub fn sample_window<R: Rng + ?Sized>(
        &self,
        window_days: u32,
        warmup_len: usize,
        rng: &mut R,
    ) -> Result<SeriesWindow, DataError> {
        if window_days == 0 {
            return Err(DataError::InvalidWindow("window_days must be positive".into()));
        }
        let eligible = self.eligible_tickers(window_days, warmup_len);
        if eligible.is_empty() {
            return Err(DataError::InsufficientHistory {
                window_days,
                warmup_len,
            });
        }
        let ticker = eligible[rng.random_range(0..eligible.len())];
        let bars = &self.series[ticker];
        let (lo, hi) = Self::start_range(bars, window_days, warmup_len).expect("eligible");
        let start = rng.random_range(lo..=hi);
        let end_excl = bars[start].date + Duration::days(i64::from(window_days));
        let stop = start + bars[start..].partition_point(|b| b.date < end_excl);
        SeriesWindow::new(ticker, bars[start - warmup_len..stop].to_vec(), warmup_len)
    }

    /// Window whose trade section covers `[from, to]` (inclusive) for one ticker.
    pub fn window_between(
        &self,
        ticker: &str,
        from: NaiveDate,
        to: NaiveDate,
        warmup_len: usize,
    ) -> Result<SeriesWindow, DataError> {
        let bars = self
            .series
            .get(ticker)
            .ok_or_else(|| DataError::UnknownTicker(ticker.to_string()))?;
        let start = bars.partition_point(|b| b.date < from);
        let stop = bars.partition_point(|b| b.date <= to);
        if start >= stop {
            return Err(DataError::EmptyRange {
                ticker: ticker.to_string(),
                from,
                to,
            });
        }
        if start < warmup_len {
            return Err(DataError::InsufficientHistory {
                window_days: (to - from).num_days().max(0) as u32 + 1,
                warmup_len,
            });
        }
        SeriesWindow::new(ticker, bars[start - warmup_len..stop].to_vec(), warmup_len)
    }
}

/// Parameters of the synthetic generator. Log returns are i.i.d. normal with
/// mean `drift` and deviation `volatility`; an optional deterministic cycle
/// multiplies the price path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticParams {
    pub initial_price: f64,
    pub drift: f64,
    pub volatility: f64,
    /// Scale of the high/low wick noise, as a fraction of price.
    pub wick: f64,
    pub base_volume: f64,
    pub start_date: NaiveDate,
    /// Relative amplitude of the price cycle; 0 disables it.
    pub cycle_amplitude: f64,
    /// Cycle period in bars.
    pub cycle_period: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            initial_price: 100.0,
            drift: 0.0003,
            volatility: 0.015,
            wick: 0.005,
            base_volume: 1_000_000.0,
            start_date: NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date"),
            cycle_amplitude: 0.0,
            cycle_period: 20.0,
        }
    }
}

fn next_weekday(d: NaiveDate) -> NaiveDate {
    let mut n = d + Duration::days(1);
    while matches!(n.weekday(), Weekday::Sat | Weekday::Sun) {
        n += Duration::days(1);
    }
    n
}

/// Geometric Brownian motion bars on consecutive weekdays. Deterministic in
/// `(ticker, n_bars, seed, params)`.
pub fn generate_synthetic(
    ticker: &str,
    n_bars: usize,
    seed: u64,
    params: &SyntheticParams,
) -> Result<Vec<Bar>, DataError> {
    let p = params;
    if !(p.initial_price.is_finite() && p.initial_price > 0.0) {
        return Err(DataError::InvalidParams("initial_price must be positive".into()));
    }
    if !(p.volatility.is_finite() && p.volatility >= 0.0) {
        return Err(DataError::InvalidParams("volatility must be non-negative".into()));
    }
    if !(p.wick.is_finite() && (0.0..1.0).contains(&p.wick)) {
        return Err(DataError::InvalidParams("wick must be in [0, 1)".into()));
    }
    if !(0.0..1.0).contains(&p.cycle_amplitude) || !(p.cycle_period > 0.0) {
        return Err(DataError::InvalidParams("cycle amplitude must be in [0, 1) with positive period".into()));
    }
    if !(p.base_volume.is_finite() && p.base_volume > 0.0) {
        return Err(DataError::InvalidParams("base_volume must be positive".into()));
    }
    if n_bars == 0 {
        return Err(DataError::InvalidParams("n_bars must be at least 1".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bars = Vec::with_capacity(n_bars);
    let mut level = 0.0_f64;
    let mut prev_close = p.initial_price;
    let mut date = p.start_date;
    while matches!(date.weekday(), Weekday::Sat | Weekday::Sun) {
        date = next_weekday(date);
    }
    for t in 0..n_bars {
        let z: f64 = rng.sample(StandardNormal);
        let up: f64 = rng.sample(StandardNormal);
        let down: f64 = rng.sample(StandardNormal);
        let vz: f64 = rng.sample(StandardNormal);

        level += p.drift + p.volatility * z;
        let cycle = 1.0 + p.cycle_amplitude * (2.0 * PI * (t + 1) as f64 / p.cycle_period).sin();
        let close = p.initial_price * level.exp() * cycle;
        let open = prev_close;
        let high = open.max(close) * (1.0 + (p.wick * up).abs());
        let low = open.min(close) * (1.0 - (p.wick * down).abs().min(0.5));
        let volume = (p.base_volume * (0.25 * vz).exp()).round().max(1.0);
        bars.push(Bar {
            ticker: ticker.to_string(),
            date,
            open,
            high,
            low,
            close,
            adj_close: close,
            volume,
        });
        prev_close = close;
        date = next_weekday(date);
    }
    Ok(bars)
}

/// Convenience: a dataset of `n_tickers` synthetic series named `SYN0`, `SYN1`, ...
pub fn synthetic_dataset(
    n_tickers: usize,
    n_bars: usize,
    seed: u64,
    params: &SyntheticParams,
) -> Result<Dataset, DataError> {
    let mut all = Vec::with_capacity(n_tickers * n_bars);
    for i in 0..n_tickers {
        let ticker = format!("SYN{i}");
        all.extend(generate_synthetic(&ticker, n_bars, seed.wrapping_add(i as u64), params)?);
    }
    Ok(Dataset::from_bars(all))
}
