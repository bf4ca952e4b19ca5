use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

/// Current version of the serialized report layout.
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Long,
    Short,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Long => 1.0,
            Direction::Short => -1.0,
        }
    }
}

/// One closed (possibly partial) position lot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub direction: Direction,
    pub entry_bar: usize,
    pub exit_bar: usize,
    pub entry_date: NaiveDate,
    pub exit_date: NaiveDate,
    pub entry_price: f64,
    pub exit_price: f64,
    /// Shares, always positive.
    pub size: f64,
    /// Entry and exit commission attributed to this lot.
    pub fees: f64,
    /// Net of fees, in currency.
    pub pnl: f64,
    /// Net pnl over entry notional, in percent.
    pub pnl_pct: f64,
    /// Bars held.
    pub duration: usize,
    pub duration_days: i64,
}

/// One execution against the simulated market.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fill {
    pub bar: usize,
    pub price: f64,
    /// Signed: positive buys, negative sells.
    pub shares: f64,
    pub commission: f64,
}

/// Account state marked at a bar's close, before any end-of-run liquidation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccountSnapshot {
    pub date: NaiveDate,
    pub close: f64,
    pub cash: f64,
    pub net_position: f64,
    pub equity: f64,
}

/// Everything fitness functions and the evaluator read from one run.
/// Return-like fields are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub version: u32,
    pub ticker: String,
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
    pub trade_bars: usize,
    pub initial_equity: f64,
    pub final_equity: f64,
    pub pnl_pct: f64,
    pub bnh_pct: f64,
    pub pnl_relative: f64,
    pub max_drawdown_pct: f64,
    pub n_trades: usize,
    pub winning_trades: usize,
    pub avg_duration_days: f64,
    pub exposure_pct: f64,
    pub sqn: f64,
    pub win_rate: f64,
    pub bankrupt: bool,
    /// Per-bar equity; the last point is after end-of-run liquidation.
    pub equity_curve: Vec<f64>,
    pub snapshots: Vec<AccountSnapshot>,
    pub fills: Vec<Fill>,
    pub trades: Vec<TradeRecord>,
}

impl BacktestReport {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    pub fn trade_pnls(&self) -> Vec<f64> {
        self.trades.iter().map(|t| t.pnl).collect()
    }

    /// Two-column `date,equity` CSV.
    pub fn write_equity_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "date,equity")?;
        for (s, e) in self.snapshots.iter().zip(&self.equity_curve) {
            writeln!(f, "{},{}", s.date, e)?;
        }
        f.flush()
    }

    /// Human-readable metric block.
    pub fn summary(&self) -> String {
        let d = |d: Option<NaiveDate>| d.map(|d| d.to_string()).unwrap_or_else(|| "-".into());
        let rows: [(&str, String); 12] = [
            ("Ticker", self.ticker.clone()),
            ("Start", d(self.start)),
            ("End", d(self.end)),
            ("Return [%]", format!("{:.4}", self.pnl_pct)),
            ("Buy & Hold Return [%]", format!("{:.4}", self.bnh_pct)),
            ("Relative Return [%]", format!("{:.4}", self.pnl_relative)),
            ("Max. Drawdown [%]", format!("{:.4}", self.max_drawdown_pct)),
            ("Exposure Time [%]", format!("{:.4}", self.exposure_pct)),
            ("# Trades", self.n_trades.to_string()),
            ("Win Rate [%]", format!("{:.4}", self.win_rate * 100.0)),
            ("Avg. Trade Duration [days]", format!("{:.4}", self.avg_duration_days)),
            ("SQN", format!("{:.4}", self.sqn)),
        ];
        rows.iter()
            .map(|(k, v)| format!("{k:<28}{v:>16}\n"))
            .collect()
    }
}
