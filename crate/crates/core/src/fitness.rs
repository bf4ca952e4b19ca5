//! Scalar fitness from a backtest report.
//!
//! * `sqn`: trade-count-scaled system quality number of the trade pnls.
//! * `mo`: `pnl + w_rel * relative - w_dd * max_drawdown` (percent units).
//! * `mo-active`: `mo + w_trades * n_trades - w_dur * avg_duration_days`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::backtest::{sqn, BacktestReport};
use crate::num::{mean, sample_std};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitnessError {
    #[error("unknown fitness option `{0}` (expected sqn, mo or mo-active)")]
    UnknownOption(String),
    #[error("fitness weight `{0}` is not finite")]
    NonFiniteWeight(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FitnessOption {
    #[serde(rename = "sqn")]
    Sqn,
    #[serde(rename = "mo")]
    MultiObjective,
    #[default]
    #[serde(rename = "mo-active")]
    MultiObjectiveActive,
}

impl FitnessOption {
    pub fn as_str(self) -> &'static str {
        match self {
            FitnessOption::Sqn => "sqn",
            FitnessOption::MultiObjective => "mo",
            FitnessOption::MultiObjectiveActive => "mo-active",
        }
    }
}

impl fmt::Display for FitnessOption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FitnessOption {
    type Err = FitnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sqn" | "1" => Ok(FitnessOption::Sqn),
            "mo" | "2" => Ok(FitnessOption::MultiObjective),
            "mo-active" | "3" => Ok(FitnessOption::MultiObjectiveActive),
            other => Err(FitnessError::UnknownOption(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitnessWeights {
    pub w_rel: f64,
    pub w_dd: f64,
    pub w_trades: f64,
    pub w_dur: f64,
    /// Scale the sqn by `sqrt(n)` instead of `n`.
    pub sqrt_trades: bool,
}

impl Default for FitnessWeights {
    fn default() -> Self {
        FitnessWeights {
            w_rel: 1.5,
            w_dd: 0.5,
            w_trades: 0.0005,
            w_dur: 1.0,
            sqrt_trades: false,
        }
    }
}

impl FitnessWeights {
    pub fn validate(&self) -> Result<(), FitnessError> {
        for (name, w) in [
            ("w_rel", self.w_rel),
            ("w_dd", self.w_dd),
            ("w_trades", self.w_trades),
            ("w_dur", self.w_dur),
        ] {
            if !w.is_finite() {
                return Err(FitnessError::NonFiniteWeight(name));
            }
        }
        Ok(())
    }
}

pub fn fitness1(r: &BacktestReport, w: &FitnessWeights) -> f64 {
    if !w.sqrt_trades {
        return r.sqn;
    }
    let pnls = r.trade_pnls();
    let sd = sample_std(&pnls);
    if pnls.len() < 2 || !(sd > 0.0) {
        return 0.0;
    }
    (pnls.len() as f64).sqrt() * mean(&pnls) / sd
}

pub fn fitness2(r: &BacktestReport, w: &FitnessWeights) -> f64 {
    r.pnl_pct + w.w_rel * r.pnl_relative - w.w_dd * r.max_drawdown_pct
}

pub fn fitness3(r: &BacktestReport, w: &FitnessWeights) -> f64 {
    fitness2(r, w) + w.w_trades * r.n_trades as f64 - w.w_dur * r.avg_duration_days
}

pub fn evaluate(option: FitnessOption, r: &BacktestReport, w: &FitnessWeights) -> f64 {
    match option {
        FitnessOption::Sqn => fitness1(r, w),
        FitnessOption::MultiObjective => fitness2(r, w),
        FitnessOption::MultiObjectiveActive => fitness3(r, w),
    }
}

/// Recomputes the report's sqn from its trade log.
pub fn trade_sqn(r: &BacktestReport) -> f64 {
    sqn(&r.trade_pnls())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backtest::{Direction, TradeRecord, REPORT_VERSION};
    use chrono::NaiveDate;

    fn report(pnl: f64, rel: f64, dd: f64, n_trades: usize, dur: f64) -> BacktestReport {
        BacktestReport {
            version: REPORT_VERSION,
            ticker: "X".into(),
            start: None,
            end: None,
            trade_bars: 0,
            initial_equity: 100.0,
            final_equity: 100.0,
            pnl_pct: pnl,
            bnh_pct: pnl - rel,
            pnl_relative: rel,
            max_drawdown_pct: dd,
            n_trades,
            winning_trades: 0,
            avg_duration_days: dur,
            exposure_pct: 0.0,
            sqn: 0.0,
            win_rate: 0.0,
            bankrupt: false,
            equity_curve: vec![],
            snapshots: vec![],
            fills: vec![],
            trades: vec![],
        }
    }

    fn with_trades(pnls: &[f64]) -> BacktestReport {
        let d = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let mut r = report(0.0, 0.0, 0.0, pnls.len(), 0.0);
        r.trades = pnls
            .iter()
            .map(|&p| TradeRecord {
                direction: Direction::Long,
                entry_bar: 0,
                exit_bar: 1,
                entry_date: d,
                exit_date: d,
                entry_price: 1.0,
                exit_price: 1.0,
                size: 1.0,
                fees: 0.0,
                pnl: p,
                pnl_pct: p,
                duration: 1,
                duration_days: 0,
            })
            .collect();
        r.sqn = trade_sqn(&r);
        r
    }

    #[test]
    fn parse_options() {
        assert_eq!("sqn".parse::<FitnessOption>().unwrap(), FitnessOption::Sqn);
        assert_eq!("MO".parse::<FitnessOption>().unwrap(), FitnessOption::MultiObjective);
        assert_eq!("mo-active".parse::<FitnessOption>().unwrap(), FitnessOption::MultiObjectiveActive);
        assert!("best".parse::<FitnessOption>().is_err());
        for o in [FitnessOption::Sqn, FitnessOption::MultiObjective, FitnessOption::MultiObjectiveActive] {
            assert_eq!(o.to_string().parse::<FitnessOption>().unwrap(), o);
        }
    }

    #[test]
    fn sqn_fitness() {
        let w = FitnessWeights::default();
        let r = with_trades(&[2.0, -1.0, 2.0, -1.0]);
        // n * mean / s = 4 * 0.5 / sqrt(3)
        assert!((fitness1(&r, &w) - 2.0 / 3.0_f64.sqrt()).abs() < 1e-12);
        assert_eq!(fitness1(&with_trades(&[]), &w), 0.0);
        let root = FitnessWeights {
            sqrt_trades: true,
            ..w
        };
        assert!((fitness1(&r, &root) - 1.0 / 3.0_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn multi_objective_examples() {
        let w = FitnessWeights::default();
        assert!((fitness2(&report(10.0, 4.0, 8.0, 0, 0.0), &w) - 12.0).abs() < 1e-12);
        assert_eq!(fitness2(&report(0.0, 0.0, 0.0, 0, 0.0), &w), 0.0);
        assert!((fitness2(&report(0.0, -10.0, 0.0, 0, 0.0), &w) + 15.0).abs() < 1e-12);
        assert!((fitness3(&report(10.0, 4.0, 8.0, 20, 5.0), &w) - 7.01).abs() < 1e-12);
        let inert = report(0.0, -3.0, 0.0, 0, 0.0);
        assert_eq!(fitness3(&inert, &w), fitness2(&inert, &w));
    }

    #[test]
    fn longer_holds_score_lower() {
        let w = FitnessWeights::default();
        let a = fitness3(&report(1.0, 1.0, 1.0, 10, 3.0), &w);
        let b = fitness3(&report(1.0, 1.0, 1.0, 10, 3.5), &w);
        assert!(b < a);
    }

    #[test]
    fn weights_must_be_finite() {
        let w = FitnessWeights {
            w_dd: f64::NAN,
            ..Default::default()
        };
        assert_eq!(w.validate(), Err(FitnessError::NonFiniteWeight("w_dd")));
    }
}
