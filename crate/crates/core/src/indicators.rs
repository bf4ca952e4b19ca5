//! Technical-indicator feature extraction.
//!
//! Every `*_series` function returns a vector aligned with its input where
//! entries before the indicator is primed are `NaN`. The per-index functions
//! (`sma_ratio`, `stochastic`, ...) evaluate one bar and report insufficient
//! history as an error instead.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::market_data::{PriceSeries, SeriesWindow};
use crate::Real;

/// Number of network inputs produced per bar.
pub const N_INPUTS: usize = 11;

/// Input names in network order.
pub const INPUT_NAMES: [&str; N_INPUTS] = [
    "long_position",
    "short_position",
    "sma5",
    "sma10",
    "slow_k",
    "slow_d",
    "willr",
    "macd_diff",
    "cci",
    "rsi",
    "adosc",
];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IndicatorError {
    #[error("insufficient history: index {index} needs at least {needed} prior bars")]
    InsufficientHistory { index: usize, needed: usize },
    #[error("warmup of {warmup} bars is shorter than the {needed} bars the configuration needs")]
    WarmupTooShort { warmup: usize, needed: usize },
    #[error("invalid indicator configuration: {0}")]
    InvalidConfig(String),
    #[error("series lengths differ")]
    LengthMismatch,
}

/// Money-flow multiplier used by the accumulation/distribution line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoneyFlow {
    /// `((C - L) - (H - C)) / (H - L)`.
    #[default]
    Standard,
    /// `(H - C[t-1]) / (H - L)`, with `C[-1] = C[0]`.
    PreviousClose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IndicatorConfig {
    pub sma_fast: usize,
    pub sma_slow: usize,
    pub stoch_fastk: usize,
    pub stoch_slowk: usize,
    pub stoch_slowd: usize,
    pub willr_n: usize,
    pub macd_fast: usize,
    pub macd_slow: usize,
    pub macd_signal: usize,
    pub cci_n: usize,
    pub rsi_n: usize,
    pub adosc_fast: usize,
    pub adosc_slow: usize,
    pub adosc_zscore_len: usize,
    pub money_flow: MoneyFlow,
}

impl Default for IndicatorConfig {
    fn default() -> Self {
        IndicatorConfig {
            sma_fast: 5,
            sma_slow: 10,
            stoch_fastk: 14,
            stoch_slowk: 3,
            stoch_slowd: 3,
            willr_n: 14,
            macd_fast: 12,
            macd_slow: 26,
            macd_signal: 9,
            cci_n: 14,
            rsi_n: 14,
            adosc_fast: 3,
            adosc_slow: 10,
            adosc_zscore_len: 50,
            money_flow: MoneyFlow::Standard,
        }
    }
}

impl IndicatorConfig {
    pub fn validate(&self) -> Result<(), IndicatorError> {
        let periods = [
            ("sma_fast", self.sma_fast),
            ("sma_slow", self.sma_slow),
            ("stoch_fastk", self.stoch_fastk),
            ("stoch_slowk", self.stoch_slowk),
            ("stoch_slowd", self.stoch_slowd),
            ("willr_n", self.willr_n),
            ("macd_fast", self.macd_fast),
            ("macd_slow", self.macd_slow),
            ("macd_signal", self.macd_signal),
            ("cci_n", self.cci_n),
            ("rsi_n", self.rsi_n),
            ("adosc_fast", self.adosc_fast),
            ("adosc_slow", self.adosc_slow),
            ("adosc_zscore_len", self.adosc_zscore_len),
        ];
        if let Some((name, _)) = periods.iter().find(|(_, p)| *p == 0) {
            return Err(IndicatorError::InvalidConfig(format!("{name} must be at least 1")));
        }
        for (fast, slow, what) in [
            (self.sma_fast, self.sma_slow, "sma"),
            (self.macd_fast, self.macd_slow, "macd"),
            (self.adosc_fast, self.adosc_slow, "adosc"),
        ] {
            if fast >= slow {
                return Err(IndicatorError::InvalidConfig(format!("{what}: fast period must be below slow")));
            }
        }
        Ok(())
    }

    /// Smallest bar index at which every feature is defined, i.e. the minimum
    /// number of warmup bars in front of the first tradable bar.
    pub fn min_warmup(&self) -> usize {
        [
            self.sma_slow - 1,
            self.sma_fast - 1,
            self.stoch_fastk + self.stoch_slowk + self.stoch_slowd - 3,
            self.willr_n - 1,
            1,
            self.cci_n - 1,
            self.rsi_n,
            self.adosc_zscore_len - 1,
        ]
        .into_iter()
        .max()
        .unwrap_or(0)
    }
}

/// The eleven network inputs at one bar.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector<T> {
    pub long_position: T,
    pub short_position: T,
    pub sma5: T,
    pub sma10: T,
    pub slow_k: T,
    pub slow_d: T,
    pub willr: T,
    pub macd_diff: T,
    pub cci: T,
    pub rsi: T,
    pub adosc: T,
}

impl<T: Real> FeatureVector<T> {
    pub fn to_inputs(&self) -> [T; N_INPUTS] {
        [
            self.long_position,
            self.short_position,
            self.sma5,
            self.sma10,
            self.slow_k,
            self.slow_d,
            self.willr,
            self.macd_diff,
            self.cci,
            self.rsi,
            self.adosc,
        ]
    }

    pub fn with_positions(mut self, long: T, short: T) -> Self {
        self.long_position = long;
        self.short_position = short;
        self
    }

    pub fn is_finite(&self) -> bool {
        self.to_inputs().iter().all(|x| x.is_finite())
    }
}

fn nan_vec<T: Real>(n: usize) -> Vec<T> {
    vec![T::nan(); n]
}

fn at<T: Real>(series: &[T], t: usize, needed: usize) -> Result<T, IndicatorError> {
    match series.get(t) {
        Some(v) if !v.is_nan() => Ok(*v),
        _ => Err(IndicatorError::InsufficientHistory { index: t, needed }),
    }
}

/// Exponential moving average with `EMA(t) = EMA(t-1)(n-1)/n + x(t)/n`,
/// seeded with the first value.
pub fn ema_series<T: Real>(xs: &[T], n: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(xs.len());
    let n_t = T::from_count(n);
    let keep = (n_t - T::one()) / n_t;
    let mut prev = T::zero();
    for (i, &x) in xs.iter().enumerate() {
        prev = if i == 0 { x } else { prev * keep + x / n_t };
        out.push(prev);
    }
    out
}

/// Trailing simple moving average over `n` values.
pub fn sma_series<T: Real>(xs: &[T], n: usize) -> Vec<T> {
    let mut out = nan_vec(xs.len());
    if n == 0 {
        return out;
    }
    let n_t = T::from_count(n);
    for t in n.saturating_sub(1)..xs.len() {
        out[t] = xs[t + 1 - n..=t].iter().copied().sum::<T>() / n_t;
    }
    out
}

/// Rolling extreme over a trailing window, via a monotone deque.
fn rolling_extreme<T: Real>(xs: &[T], n: usize, keep_max: bool) -> Vec<T> {
    let mut out = nan_vec(xs.len());
    let mut dq: VecDeque<usize> = VecDeque::new();
    for (i, &x) in xs.iter().enumerate() {
        while let Some(&back) = dq.back() {
            let dominated = if keep_max { xs[back] <= x } else { xs[back] >= x };
            if !dominated {
                break;
            }
            dq.pop_back();
        }
        dq.push_back(i);
        if dq[0] + n <= i {
            dq.pop_front();
        }
        if i + 1 >= n {
            out[i] = xs[dq[0]];
        }
    }
    out
}

pub fn sma_ratio_series<T: Real>(closes: &[T], n: usize) -> Vec<T> {
    sma_series(closes, n)
        .into_iter()
        .zip(closes)
        .map(|(m, &c)| c / m)
        .collect()
}

/// Close over the mean of the last `n` closes (inclusive of `t`).
pub fn sma_ratio<T: Real>(closes: &[T], n: usize, t: usize) -> Result<T, IndicatorError> {
    if n == 0 || t + 1 < n || t >= closes.len() {
        return Err(IndicatorError::InsufficientHistory { index: t, needed: n });
    }
    at(&sma_ratio_series(&closes[..=t], n), t, n)
}

/// Position of `c` within `[ll, hh]` in percent, 50 when the range is empty.
fn range_position<T: Real>(c: T, ll: T, hh: T) -> T {
    let span = hh - ll;
    if span <= T::zero() {
        T::lit(50.0)
    } else {
        (c - ll) / span * T::lit(100.0)
    }
}

fn check_len(lens: &[usize]) -> Result<usize, IndicatorError> {
    let n = lens[0];
    if lens.iter().any(|&l| l != n) {
        return Err(IndicatorError::LengthMismatch);
    }
    Ok(n)
}

pub fn fast_k_series<T: Real>(high: &[T], low: &[T], close: &[T], n: usize) -> Vec<T> {
    let hh = rolling_extreme(high, n, true);
    let ll = rolling_extreme(low, n, false);
    (0..close.len())
        .map(|t| {
            if hh[t].is_nan() {
                T::nan()
            } else {
                range_position(close[t], ll[t], hh[t])
            }
        })
        .collect()
}

/// Averages `xs` over a trailing window, skipping the unprimed prefix.
fn smooth_primed<T: Real>(xs: &[T], n: usize) -> Vec<T> {
    let first = xs.iter().position(|x| !x.is_nan()).unwrap_or(xs.len());
    let mut out = nan_vec(xs.len());
    let tail = sma_series(&xs[first..], n);
    out[first..].copy_from_slice(&tail);
    out
}

/// Slow %K and slow %D series.
pub fn stochastic_series<T: Real>(high: &[T], low: &[T], close: &[T], cfg: &IndicatorConfig) -> (Vec<T>, Vec<T>) {
    let fast = fast_k_series(high, low, close, cfg.stoch_fastk);
    let slow_k = smooth_primed(&fast, cfg.stoch_slowk);
    let slow_d = smooth_primed(&slow_k, cfg.stoch_slowd);
    (slow_k, slow_d)
}

/// `(slow_k, slow_d)` at bar `t`.
pub fn stochastic<T: Real>(
    high: &[T],
    low: &[T],
    close: &[T],
    cfg: &IndicatorConfig,
    t: usize,
) -> Result<(T, T), IndicatorError> {
    let n = check_len(&[high.len(), low.len(), close.len()])?;
    let needed = cfg.stoch_fastk + cfg.stoch_slowk + cfg.stoch_slowd - 2;
    if t >= n {
        return Err(IndicatorError::InsufficientHistory { index: t, needed });
    }
    let (k, d) = stochastic_series(&high[..=t], &low[..=t], &close[..=t], cfg);
    Ok((at(&k, t, needed)?, at(&d, t, needed)?))
}

pub fn willr_series<T: Real>(high: &[T], low: &[T], close: &[T], n: usize) -> Vec<T> {
    let hh = rolling_extreme(high, n, true);
    let ll = rolling_extreme(low, n, false);
    (0..close.len())
        .map(|t| {
            if hh[t].is_nan() {
                return T::nan();
            }
            let span = hh[t] - ll[t];
            if span <= T::zero() {
                T::lit(-50.0)
            } else {
                (hh[t] - close[t]) / span * T::lit(-100.0)
            }
        })
        .collect()
}

/// Williams %R in `[-100, 0]`.
pub fn willr<T: Real>(high: &[T], low: &[T], close: &[T], n: usize, t: usize) -> Result<T, IndicatorError> {
    let len = check_len(&[high.len(), low.len(), close.len()])?;
    if n == 0 || t >= len {
        return Err(IndicatorError::InsufficientHistory { index: t, needed: n });
    }
    at(&willr_series(&high[..=t], &low[..=t], &close[..=t], n), t, n)
}

/// MACD line: `DIFF - EMA_signal(DIFF)` with `DIFF = EMA_fast - EMA_slow`.
pub fn macd_line_series<T: Real>(closes: &[T], cfg: &IndicatorConfig) -> Vec<T> {
    let fast = ema_series(closes, cfg.macd_fast);
    let slow = ema_series(closes, cfg.macd_slow);
    let diff: Vec<T> = fast.iter().zip(&slow).map(|(&f, &s)| f - s).collect();
    let signal = ema_series(&diff, cfg.macd_signal);
    diff.iter().zip(&signal).map(|(&d, &s)| d - s).collect()
}

pub fn macd_diff_series<T: Real>(closes: &[T], cfg: &IndicatorConfig) -> Vec<T> {
    let line = macd_line_series(closes, cfg);
    let mut out = nan_vec(closes.len());
    for t in 1..closes.len() {
        out[t] = (line[t] - line[t - 1]) / closes[t];
    }
    out
}

/// One-bar change of the MACD line divided by the close.
pub fn macd_diff<T: Real>(closes: &[T], cfg: &IndicatorConfig, t: usize) -> Result<T, IndicatorError> {
    if t >= closes.len() {
        return Err(IndicatorError::InsufficientHistory { index: t, needed: 2 });
    }
    at(&macd_diff_series(&closes[..=t], cfg), t, 2)
}

pub fn cci_series<T: Real>(high: &[T], low: &[T], close: &[T], n: usize) -> Vec<T> {
    let typical: Vec<T> = (0..close.len())
        .map(|i| (high[i] + low[i] + close[i]) / T::lit(3.0))
        .collect();
    let mean = sma_series(&typical, n);
    let n_t = T::from_count(n);
    let mut out = nan_vec(close.len());
    for t in n.saturating_sub(1)..close.len() {
        let m = mean[t];
        let mad = typical[t + 1 - n..=t].iter().map(|&x| (x - m).abs()).sum::<T>() / n_t;
        out[t] = if mad > T::zero() {
            (typical[t] - m) / (T::lit(0.015) * mad)
        } else {
            T::zero()
        };
    }
    out
}

/// Commodity channel index; zero when the mean deviation vanishes.
pub fn cci<T: Real>(high: &[T], low: &[T], close: &[T], n: usize, t: usize) -> Result<T, IndicatorError> {
    let len = check_len(&[high.len(), low.len(), close.len()])?;
    if n == 0 || t >= len {
        return Err(IndicatorError::InsufficientHistory { index: t, needed: n });
    }
    at(&cci_series(&high[..=t], &low[..=t], &close[..=t], n), t, n)
}

pub fn rsi_series<T: Real>(closes: &[T], n: usize) -> Vec<T> {
    let mut out = nan_vec(closes.len());
    if n == 0 {
        return out;
    }
    let mut up = vec![T::zero(); closes.len()];
    let mut down = vec![T::zero(); closes.len()];
    for i in 1..closes.len() {
        let d = closes[i] - closes[i - 1];
        up[i] = d.max(T::zero());
        down[i] = (-d).max(T::zero());
    }
    let n_t = T::from_count(n);
    for t in n..closes.len() {
        let avg_up = up[t + 1 - n..=t].iter().copied().sum::<T>() / n_t;
        let avg_down = down[t + 1 - n..=t].iter().copied().sum::<T>() / n_t;
        out[t] = rsi_from_averages(avg_up, avg_down);
    }
    out
}

fn rsi_from_averages<T: Real>(avg_up: T, avg_down: T) -> T {
    let hundred = T::lit(100.0);
    match (avg_up > T::zero(), avg_down > T::zero()) {
        (false, false) => T::lit(50.0),
        (_, false) => hundred,
        (false, true) => T::zero(),
        (true, true) => hundred - hundred / (T::one() + avg_up / avg_down),
    }
}

/// Relative strength index from simple `n`-bar averages of close changes.
pub fn rsi<T: Real>(closes: &[T], n: usize, t: usize) -> Result<T, IndicatorError> {
    if n == 0 || t >= closes.len() {
        return Err(IndicatorError::InsufficientHistory { index: t, needed: n + 1 });
    }
    at(&rsi_series(&closes[..=t], n), t, n + 1)
}

/// Money-flow volume per bar.
pub fn money_flow_volume<T: Real>(high: &[T], low: &[T], close: &[T], volume: &[T], rule: MoneyFlow) -> Vec<T> {
    (0..close.len())
        .map(|i| {
            let span = high[i] - low[i];
            if span <= T::zero() {
                return T::zero();
            }
            let mult = match rule {
                MoneyFlow::Standard => ((close[i] - low[i]) - (high[i] - close[i])) / span,
                MoneyFlow::PreviousClose => {
                    let prev = if i == 0 { close[0] } else { close[i - 1] };
                    (high[i] - prev) / span
                }
            };
            mult * volume[i]
        })
        .collect()
}

/// Accumulation/distribution line, accumulated from the first bar.
pub fn ad_line_series<T: Real>(high: &[T], low: &[T], close: &[T], volume: &[T], rule: MoneyFlow) -> Vec<T> {
    let mut acc = T::zero();
    money_flow_volume(high, low, close, volume, rule)
        .into_iter()
        .map(|f| {
            acc = acc + f;
            acc
        })
        .collect()
}

/// Raw Chaikin oscillator `EMA_fast(AD) - EMA_slow(AD)`.
pub fn adosc_raw_series<T: Real>(high: &[T], low: &[T], close: &[T], volume: &[T], cfg: &IndicatorConfig) -> Vec<T> {
    let ad = ad_line_series(high, low, close, volume, cfg.money_flow);
    let fast = ema_series(&ad, cfg.adosc_fast);
    let slow = ema_series(&ad, cfg.adosc_slow);
    fast.iter().zip(&slow).map(|(&f, &s)| f - s).collect()
}

/// Z-score of `x` against a window; zero when the window has no spread
/// relative to its magnitude.
pub fn zscore<T: Real>(window: &[T], x: T) -> T {
    let m = crate::num::mean(window);
    let sd = crate::num::population_std(window);
    let scale = window.iter().fold(T::zero(), |a, v| a.max(v.abs()));
    if sd <= scale * T::epsilon() * T::lit(64.0) {
        T::zero()
    } else {
        (x - m) / sd
    }
}

pub fn adosc_series<T: Real>(high: &[T], low: &[T], close: &[T], volume: &[T], cfg: &IndicatorConfig) -> Vec<T> {
    let raw = adosc_raw_series(high, low, close, volume, cfg);
    let z = cfg.adosc_zscore_len;
    let mut out = nan_vec(close.len());
    for t in z.saturating_sub(1)..close.len() {
        out[t] = zscore(&raw[t + 1 - z..=t], raw[t]);
    }
    out
}

/// Chaikin A/D oscillator, z-scored over `adosc_zscore_len` bars.
pub fn adosc<T: Real>(
    high: &[T],
    low: &[T],
    close: &[T],
    volume: &[T],
    cfg: &IndicatorConfig,
    t: usize,
) -> Result<T, IndicatorError> {
    let len = check_len(&[high.len(), low.len(), close.len(), volume.len()])?;
    if t >= len {
        return Err(IndicatorError::InsufficientHistory {
            index: t,
            needed: cfg.adosc_zscore_len,
        });
    }
    let s = adosc_series(&high[..=t], &low[..=t], &close[..=t], &volume[..=t], cfg);
    at(&s, t, cfg.adosc_zscore_len)
}

/// Feature vectors for every tradable bar of a window, positions zeroed.
pub fn build_features<T: Real>(
    window: &SeriesWindow,
    cfg: &IndicatorConfig,
) -> Result<Vec<FeatureVector<T>>, IndicatorError> {
    cfg.validate()?;
    let needed = cfg.min_warmup();
    if window.warmup_len() < needed {
        return Err(IndicatorError::WarmupTooShort {
            warmup: window.warmup_len(),
            needed,
        });
    }
    features_from_prices(&window.prices(), window.warmup_len(), cfg)
}

/// Feature vectors for bars `first..` of an adjusted price series.
pub fn features_from_prices<T: Real>(
    prices: &PriceSeries,
    first: usize,
    cfg: &IndicatorConfig,
) -> Result<Vec<FeatureVector<T>>, IndicatorError> {
    let h: Vec<T> = PriceSeries::convert(&prices.high);
    let l: Vec<T> = PriceSeries::convert(&prices.low);
    let c: Vec<T> = PriceSeries::convert(&prices.close);
    let v: Vec<T> = PriceSeries::convert(&prices.volume);

    let sma5 = sma_ratio_series(&c, cfg.sma_fast);
    let sma10 = sma_ratio_series(&c, cfg.sma_slow);
    let (slow_k, slow_d) = stochastic_series(&h, &l, &c, cfg);
    let wr = willr_series(&h, &l, &c, cfg.willr_n);
    let macd = macd_diff_series(&c, cfg);
    let cc = cci_series(&h, &l, &c, cfg.cci_n);
    let rs = rsi_series(&c, cfg.rsi_n);
    let ad = adosc_series(&h, &l, &c, &v, cfg);

    let mut out = Vec::with_capacity(c.len().saturating_sub(first));
    for t in first..c.len() {
        let fv = FeatureVector {
            long_position: T::zero(),
            short_position: T::zero(),
            sma5: sma5[t],
            sma10: sma10[t],
            slow_k: slow_k[t],
            slow_d: slow_d[t],
            willr: wr[t],
            macd_diff: macd[t],
            cci: cc[t],
            rsi: rs[t],
            adosc: ad[t],
        };
        if fv.to_inputs().iter().any(|x| x.is_nan()) {
            return Err(IndicatorError::InsufficientHistory {
                index: t,
                needed: cfg.min_warmup(),
            });
        }
        out.push(fv);
    }
    Ok(out)
}
