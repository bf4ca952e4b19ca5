//! Event-driven single-instrument backtester.
//!
//! For each tradable bar the policy sees that bar's features (with the current
//! long/short exposure injected) and its decision fills at the next bar's open.
//! The last bar's decision is discarded and any open position is liquidated at
//! the final close. Because the first fill can happen at the second tradable
//! bar's open, Buy & Hold is measured from that open, and exposure is counted
//! over the bars on which a position can be held (every bar but the first).

mod broker;
pub mod metrics;
mod policy;
mod report;

use serde::{Deserialize, Serialize};

use crate::indicators::FeatureVector;
use crate::market_data::SeriesWindow;
use crate::neat::{Genome, NeatError};
use crate::Real;
use broker::Broker;

pub use metrics::{max_drawdown, sqn, MetricsError};
pub use policy::{BuyAndHold, Inert, NetworkPolicy, Policy, RandomPolicy};
pub use report::{AccountSnapshot, BacktestReport, Direction, Fill, TradeRecord, REPORT_VERSION};

/// Output level above which buy or sell fires.
pub const ACTION_THRESHOLD: f64 = 0.5;

#[derive(Debug, thiserror::Error)]
pub enum BacktestError {
    #[error("window has no tradable bars")]
    EmptyTradeSection,
    #[error("{features} feature vectors for {bars} tradable bars")]
    FeatureMismatch { features: usize, bars: usize },
    #[error("non-finite network output")]
    NonFiniteOutput,
    #[error("invalid broker configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Network(#[from] NeatError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Action {
    /// Buy with this fraction of equity.
    Buy(f64),
    /// Sell with this fraction of equity.
    Sell(f64),
    Hold,
}

/// Maps `(buy, sell, volume)` outputs to an action: a side fires above 0.5,
/// the larger fires when both do (an exact tie holds), and the order size is
/// the volume output clamped to `[0, 1]`.
pub fn decide<T: Real>(buy: T, sell: T, volume: T) -> Result<Action, BacktestError> {
    let (b, s, v) = match (buy.to_f64(), sell.to_f64(), volume.to_f64()) {
        (Some(b), Some(s), Some(v)) if b.is_finite() && s.is_finite() && v.is_finite() => (b, s, v),
        _ => return Err(BacktestError::NonFiniteOutput),
    };
    let frac = v.clamp(0.0, 1.0);
    let buy_on = b > ACTION_THRESHOLD;
    let sell_on = s > ACTION_THRESHOLD;
    Ok(match (buy_on, sell_on) {
        (true, false) => Action::Buy(frac),
        (false, true) => Action::Sell(frac),
        (true, true) if b > s => Action::Buy(frac),
        (true, true) if s > b => Action::Sell(frac),
        _ => Action::Hold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BrokerConfig {
    pub initial_cash: f64,
    /// Percent of notional charged on every fill.
    pub commission_pct: f64,
    /// Orders smaller than this fraction of equity are ignored.
    pub volume_floor: f64,
    /// Short notional cap as a multiple of equity.
    pub max_short_leverage: f64,
}

impl Default for BrokerConfig {
    fn default() -> Self {
        BrokerConfig {
            initial_cash: 100_000.0,
            commission_pct: 0.0,
            volume_floor: 0.01,
            max_short_leverage: 1.0,
        }
    }
}

impl BrokerConfig {
    pub fn validate(&self) -> Result<(), BacktestError> {
        if !(self.initial_cash.is_finite() && self.initial_cash > 0.0) {
            return Err(BacktestError::InvalidConfig("initial_cash must be positive".into()));
        }
        if !(self.commission_pct.is_finite() && self.commission_pct >= 0.0) {
            return Err(BacktestError::InvalidConfig("commission_pct must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.volume_floor) {
            return Err(BacktestError::InvalidConfig("volume_floor must be in [0, 1]".into()));
        }
        if !(self.max_short_leverage.is_finite() && self.max_short_leverage >= 0.0) {
            return Err(BacktestError::InvalidConfig("max_short_leverage must be non-negative".into()));
        }
        Ok(())
    }
}

/// Buy & Hold return in percent for a trade section: long from the second
/// bar's open to the last close. Sections shorter than two bars return 0.
pub fn buy_and_hold_pct(opens: &[f64], closes: &[f64]) -> f64 {
    if opens.len() < 2 || closes.len() < 2 {
        return 0.0;
    }
    (closes[closes.len() - 1] / opens[1] - 1.0) * 100.0
}

/// Backtests a genome's network on a window.
pub fn run_backtest(
    genome: &Genome,
    window: &SeriesWindow,
    features: &[FeatureVector<f64>],
    cfg: &BrokerConfig,
) -> Result<BacktestReport, BacktestError> {
    run_policy(&mut NetworkPolicy::new(genome), window, features, cfg)
}

/// Backtests any policy on a window; `features` must hold one vector per
/// tradable bar.
pub fn run_policy<P: Policy + ?Sized>(
    policy: &mut P,
    window: &SeriesWindow,
    features: &[FeatureVector<f64>],
    cfg: &BrokerConfig,
) -> Result<BacktestReport, BacktestError> {
    cfg.validate()?;
    let n = window.trade_len();
    if n == 0 {
        return Err(BacktestError::EmptyTradeSection);
    }
    if features.len() != n {
        return Err(BacktestError::FeatureMismatch {
            features: features.len(),
            bars: n,
        });
    }
    let prices = window.prices();
    let w = window.warmup_len();
    let opens = &prices.open[w..];
    let closes = &prices.close[w..];
    let bars = window.trade_bars();

    policy.reset();
    let mut broker = Broker::new(cfg);
    let mut pending = Action::Hold;
    let mut snapshots = Vec::with_capacity(n);
    let mut exposed_bars = 0usize;
    let mut bankrupt = false;

    for t in 0..n {
        let date = bars[t].date;
        match std::mem::replace(&mut pending, Action::Hold) {
            Action::Buy(f) => broker.order(Direction::Long, f, opens[t], t, date),
            Action::Sell(f) => broker.order(Direction::Short, f, opens[t], t, date),
            Action::Hold => {}
        }
        let net = broker.net_position();
        let equity = broker.equity(closes[t]);
        snapshots.push(AccountSnapshot {
            date,
            close: closes[t],
            cash: broker.cash(),
            net_position: net,
            equity,
        });
        if net != 0.0 {
            exposed_bars += 1;
        }
        if !(equity > 0.0) {
            bankrupt = true;
            break;
        }
        if t + 1 < n {
            let long = (net.max(0.0) * closes[t] / equity).clamp(0.0, 1.0);
            let short = ((-net).max(0.0) * closes[t] / equity).clamp(0.0, 1.0);
            pending = policy.act(&features[t].with_positions(long, short))?;
        }
    }

    let last = snapshots.len() - 1;
    broker.liquidate(closes[last], last, bars[last].date);
    let final_equity = broker.cash();
    let mut equity_curve: Vec<f64> = snapshots.iter().map(|s| s.equity).collect();
    equity_curve[last] = final_equity;

    let trades = std::mem::take(&mut broker.trades);
    let pnls: Vec<f64> = trades.iter().map(|t| t.pnl).collect();
    let winning_trades = pnls.iter().filter(|&&p| p > 0.0).count();
    let n_trades = trades.len();
    let avg_duration_days = if n_trades == 0 {
        0.0
    } else {
        trades.iter().map(|t| t.duration_days as f64).sum::<f64>() / n_trades as f64
    };
    let pnl_pct = (final_equity / cfg.initial_cash - 1.0) * 100.0;
    let bnh_pct = buy_and_hold_pct(opens, closes);
    let holdable = n.saturating_sub(1);
    let exposure_pct = if holdable == 0 {
        0.0
    } else {
        exposed_bars as f64 / holdable as f64 * 100.0
    };
    Ok(BacktestReport {
        version: REPORT_VERSION,
        ticker: window.ticker().to_string(),
        start: window.start_date(),
        end: window.end_date(),
        trade_bars: n,
        initial_equity: cfg.initial_cash,
        final_equity,
        pnl_pct,
        bnh_pct,
        pnl_relative: pnl_pct - bnh_pct,
        max_drawdown_pct: max_drawdown(&equity_curve).unwrap_or(0.0),
        n_trades,
        winning_trades,
        avg_duration_days,
        exposure_pct,
        sqn: sqn(&pnls),
        win_rate: if n_trades == 0 {
            0.0
        } else {
            winning_trades as f64 / n_trades as f64
        },
        bankrupt,
        equity_curve,
        snapshots,
        fills: std::mem::take(&mut broker.fills),
        trades,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indicators::build_features;
    use crate::market_data::{synthetic_dataset, Bar, SyntheticParams};
    use chrono::{Duration, NaiveDate};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn decide_examples() {
        assert_eq!(decide(0.9, 0.2, 0.5).unwrap(), Action::Buy(0.5));
        assert_eq!(decide(0.7, 0.8, 1.0).unwrap(), Action::Sell(1.0));
        assert_eq!(decide(0.4, 0.4, 0.9).unwrap(), Action::Hold);
        assert_eq!(decide(0.8, 0.8, 0.9).unwrap(), Action::Hold);
        assert_eq!(decide(0.5, 0.5, 0.9).unwrap(), Action::Hold);
        assert_eq!(decide(0.6_f32, 0.1, 1.5).unwrap(), Action::Buy(1.0));
        assert!(matches!(decide(f64::NAN, 0.1, 0.1), Err(BacktestError::NonFiniteOutput)));
    }

    /// Flat-priced window with hand-set opens/closes for the trade section.
    fn window_from(prices: &[(f64, f64)]) -> SeriesWindow {
        let d0 = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
        let mut bars = Vec::new();
        let bar = |i: usize, o: f64, c: f64| Bar {
            ticker: "T".into(),
            date: d0 + Duration::days(i as i64),
            open: o,
            high: o.max(c),
            low: o.min(c),
            close: c,
            adj_close: c,
            volume: 1000.0,
        };
        for i in 0..50 {
            bars.push(bar(i, 10.0, 10.0));
        }
        for (k, &(o, c)) in prices.iter().enumerate() {
            bars.push(bar(50 + k, o, c));
        }
        SeriesWindow::new("T", bars, 50).unwrap()
    }

    struct Script(Vec<Action>, usize);
    impl Policy for Script {
        fn reset(&mut self) {
            self.1 = 0;
        }
        fn act(&mut self, _: &FeatureVector<f64>) -> Result<Action, BacktestError> {
            let a = self.0.get(self.1).copied().unwrap_or(Action::Hold);
            self.1 += 1;
            Ok(a)
        }
    }

    #[test]
    fn buy_and_hold_matches_closed_form() {
        let w = window_from(&[(10.0, 10.0), (10.0, 11.0), (11.0, 12.0), (12.0, 15.0)]);
        let f = vec![FeatureVector::default(); 4];
        let r = run_policy(&mut BuyAndHold::default(), &w, &f, &BrokerConfig::default()).unwrap();
        assert!((r.bnh_pct - 50.0).abs() < 1e-12);
        assert!(r.pnl_relative.abs() < 1e-9);
        assert_eq!(r.exposure_pct, 100.0);
        assert_eq!(r.n_trades, 1);
        assert_eq!(r.trades[0].duration, 2);
    }

    #[test]
    fn inert_strategy() {
        let w = window_from(&[(10.0, 10.0), (10.0, 11.0), (11.0, 12.0)]);
        let f = vec![FeatureVector::default(); 3];
        let r = run_policy(&mut Inert, &w, &f, &BrokerConfig::default()).unwrap();
        assert_eq!((r.n_trades, r.exposure_pct, r.pnl_pct), (0, 0.0, 0.0));
        assert_eq!(r.avg_duration_days, 0.0);
        assert_eq!(r.sqn, 0.0);
    }

    #[test]
    fn short_then_cover_and_flip() {
        // sell all at 20, then buy 100% of equity at 10: covers, then goes long
        let w = window_from(&[(20.0, 20.0), (20.0, 20.0), (10.0, 10.0), (10.0, 12.0)]);
        let f = vec![FeatureVector::default(); 4];
        let mut p = Script(vec![Action::Sell(1.0), Action::Buy(1.0)], 0);
        let r = run_policy(&mut p, &w, &f, &BrokerConfig::default()).unwrap();
        let short = &r.trades[0];
        assert_eq!(short.direction, Direction::Short);
        assert!((short.pnl - 50_000.0).abs() < 1e-6);
        // order is 150k / 10 = 15000 shares: 5000 cover, 10000 open long
        let long = &r.trades[1];
        assert_eq!(long.direction, Direction::Long);
        assert!((long.size - 10_000.0).abs() < 1e-6);
        assert!((r.final_equity - 170_000.0).abs() < 1e-6);
        assert!(r.snapshots.iter().all(|s| (s.cash + s.net_position * s.close - s.equity).abs() < 1e-9 * s.equity));
    }

    #[test]
    fn volume_floor_ignores_tiny_orders() {
        let w = window_from(&[(10.0, 10.0), (10.0, 11.0), (11.0, 12.0)]);
        let f = vec![FeatureVector::default(); 3];
        let mut p = Script(vec![Action::Buy(0.005)], 0);
        let r = run_policy(&mut p, &w, &f, &BrokerConfig::default()).unwrap();
        assert!(r.fills.is_empty());
    }

    #[test]
    fn commission_is_charged_per_fill() {
        let w = window_from(&[(10.0, 10.0), (10.0, 10.0), (10.0, 10.0)]);
        let f = vec![FeatureVector::default(); 3];
        let cfg = BrokerConfig {
            commission_pct: 0.1,
            ..Default::default()
        };
        let r = run_policy(&mut BuyAndHold::default(), &w, &f, &cfg).unwrap();
        assert_eq!(r.fills.len(), 2);
        let fees: f64 = r.fills.iter().map(|f| f.commission).sum();
        assert!((r.final_equity - (100_000.0 - fees)).abs() < 1e-6);
        assert!((r.trades[0].pnl + fees).abs() < 1e-6);
        assert!(r.pnl_pct < 0.0);
    }

    #[test]
    fn errors() {
        let w = window_from(&[(10.0, 10.0), (10.0, 11.0)]);
        assert!(matches!(
            run_policy(&mut Inert, &w, &[], &BrokerConfig::default()),
            Err(BacktestError::FeatureMismatch { .. })
        ));
        let empty = window_from(&[]);
        assert!(matches!(
            run_policy(&mut Inert, &empty, &[], &BrokerConfig::default()),
            Err(BacktestError::EmptyTradeSection)
        ));
    }

    #[test]
    fn bankruptcy_stops_the_run() {
        let w = window_from(&[(10.0, 10.0), (10.0, 10.0), (25.0, 25.0), (25.0, 30.0)]);
        let f = vec![FeatureVector::default(); 4];
        let mut p = Script(vec![Action::Sell(1.0)], 0);
        let r = run_policy(&mut p, &w, &f, &BrokerConfig::default()).unwrap();
        assert!(r.bankrupt);
        assert_eq!(r.equity_curve.len(), 3);
    }

    #[test]
    fn random_policy_on_synthetic_windows() {
        let ds = synthetic_dataset(2, 600, 11, &SyntheticParams::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for k in 0..20 {
            let w = ds.sample_window(90, 50, &mut rng).unwrap();
            let f = build_features(&w, &Default::default()).unwrap();
            let r = run_policy(&mut RandomPolicy::new(k), &w, &f, &BrokerConfig::default()).unwrap();
            assert!(r.max_drawdown_pct >= 0.0);
            assert!((0.0..=100.0).contains(&r.exposure_pct));
            assert_eq!(r.pnl_relative, r.pnl_pct - r.bnh_pct);
        }
    }
}
