use std::collections::VecDeque;

use chrono::NaiveDate;

use super::report::{Direction, Fill, TradeRecord};
use super::BrokerConfig;

/// Share counts below this are treated as zero.
const DUST: f64 = 1e-12;
/// Opening fills smaller than this fraction of equity are float residue.
const DUST_NOTIONAL: f64 = 1e-9;

#[derive(Debug, Clone)]
struct Lot {
    direction: Direction,
    shares: f64,
    entry_price: f64,
    entry_bar: usize,
    entry_date: NaiveDate,
    /// Entry commission not yet attributed to a closed trade.
    entry_fee: f64,
}

/// Single-instrument net-position account with FIFO lots.
#[derive(Debug, Clone)]
pub(crate) struct Broker {
    cfg: BrokerConfig,
    cash: f64,
    lots: VecDeque<Lot>,
    pub(crate) fills: Vec<Fill>,
    pub(crate) trades: Vec<TradeRecord>,
}

impl Broker {
    pub(crate) fn new(cfg: &BrokerConfig) -> Self {
        Broker {
            cfg: cfg.clone(),
            cash: cfg.initial_cash,
            lots: VecDeque::new(),
            fills: Vec::new(),
            trades: Vec::new(),
        }
    }

    pub(crate) fn cash(&self) -> f64 {
        self.cash
    }

    /// Signed share count: long > 0, short < 0.
    pub(crate) fn net_position(&self) -> f64 {
        self.lots.iter().map(|l| l.direction.sign() * l.shares).sum()
    }

    pub(crate) fn equity(&self, price: f64) -> f64 {
        self.cash + self.net_position() * price
    }

    fn held(&self, dir: Direction) -> f64 {
        self.lots.iter().filter(|l| l.direction == dir).map(|l| l.shares).sum()
    }

    /// Executes a buy (`dir = Long`) or sell (`dir = Short`) of `fraction` of
    /// equity at `price`: the opposite side is reduced first, the remainder
    /// opens or extends this side within the cash and short limits.
    pub(crate) fn order(&mut self, dir: Direction, fraction: f64, price: f64, bar: usize, date: NaiveDate) {
        let equity = self.equity(price);
        if !(equity > 0.0) || fraction < self.cfg.volume_floor {
            return;
        }
        let wanted = fraction.min(1.0) * equity / price;
        let opposite = match dir {
            Direction::Long => Direction::Short,
            Direction::Short => Direction::Long,
        };
        let reduce = wanted.min(self.held(opposite));
        if reduce > DUST {
            self.fill(dir, reduce, price, bar, date);
        }
        let remaining = wanted - reduce;
        if remaining <= DUST || self.held(opposite) > DUST {
            return;
        }
        let c = self.cfg.commission_pct / 100.0;
        let room = match dir {
            // buying more long may not push cash below zero
            Direction::Long => self.cash / (price * (1.0 + c)),
            // total short notional is capped at a multiple of equity
            Direction::Short => {
                self.cfg.max_short_leverage * self.equity(price) / price - self.held(Direction::Short)
            }
        };
        let open = remaining.min(room.max(0.0));
        if open > DUST && open * price > DUST_NOTIONAL * equity {
            self.fill(dir, open, price, bar, date);
        }
    }

    /// Closes every lot at `price`.
    pub(crate) fn liquidate(&mut self, price: f64, bar: usize, date: NaiveDate) {
        let long = self.held(Direction::Long);
        if long > DUST {
            self.fill(Direction::Short, long, price, bar, date);
        }
        let short = self.held(Direction::Short);
        if short > DUST {
            self.fill(Direction::Long, short, price, bar, date);
        }
    }

    /// Moves `shares` in direction `dir` (Long = buy). Closing lots FIFO first,
    /// then opening a new lot with the rest.
    fn fill(&mut self, dir: Direction, shares: f64, price: f64, bar: usize, date: NaiveDate) {
        let commission = shares * price * self.cfg.commission_pct / 100.0;
        self.cash -= dir.sign() * shares * price + commission;
        self.fills.push(Fill {
            bar,
            price,
            shares: dir.sign() * shares,
            commission,
        });

        let mut left = shares;
        while left > DUST {
            let Some(lot) = self.lots.front_mut() else { break };
            if lot.direction == dir {
                break;
            }
            let q = left.min(lot.shares);
            let whole = q >= lot.shares - DUST;
            let q = if whole { lot.shares } else { q };
            let entry_fee = if whole { lot.entry_fee } else { lot.entry_fee * q / lot.shares };
            let exit_fee = commission * q / shares;
            let gross = lot.direction.sign() * q * (price - lot.entry_price);
            let pnl = gross - entry_fee - exit_fee;
            self.trades.push(TradeRecord {
                direction: lot.direction,
                entry_bar: lot.entry_bar,
                exit_bar: bar,
                entry_date: lot.entry_date,
                exit_date: date,
                entry_price: lot.entry_price,
                exit_price: price,
                size: q,
                fees: entry_fee + exit_fee,
                pnl,
                pnl_pct: pnl / (q * lot.entry_price) * 100.0,
                duration: bar - lot.entry_bar,
                duration_days: (date - lot.entry_date).num_days(),
            });
            if whole {
                self.lots.pop_front();
            } else {
                lot.shares -= q;
                lot.entry_fee -= entry_fee;
            }
            left -= q;
        }
        if left > DUST {
            self.lots.push_back(Lot {
                direction: dir,
                shares: left,
                entry_price: price,
                entry_bar: bar,
                entry_date: date,
                entry_fee: commission * left / shares,
            });
        }
    }
}
