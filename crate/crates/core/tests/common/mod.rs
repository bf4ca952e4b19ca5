//! Shared test helpers: naive indicator oracles and random market data.
//!
//! The oracles recompute every value from the raw bars with the textbook
//! formula and no incremental state. Moving averages use the closed-form
//! weighted sum rather than the recursion, extremes use plain scans.

#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord)]

use chrono::{Duration, NaiveDate};
use neat_trader::indicators::IndicatorConfig;
use neat_trader::market_data::{Bar, PriceSeries};
use rand::Rng;

/// Relative difference with an exact-zero escape.
pub fn rel_err(a: f64, b: f64) -> f64 {
    rel_err_scaled(a, b, 0.0)
}

/// Relative difference against `max(|a|, |b|, scale)`. `scale` is the size of
/// the operands a value was differenced from, for quantities that sit near
/// zero by cancellation.
pub fn rel_err_scaled(a: f64, b: f64, scale: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs()).max(scale)
}

/// `EMA_n(xs)[t]` as the explicit weighted sum
/// `(1-a)^t x0 + sum_{k=1..t} a (1-a)^(t-k) x_k` with `a = 1/n`.
pub fn ema_at(xs: &[f64], n: usize, t: usize) -> f64 {
    let a = 1.0 / n as f64;
    let keep = 1.0 - a;
    let mut s = keep.powi(t as i32) * xs[0];
    for (k, &x) in xs.iter().enumerate().take(t + 1).skip(1) {
        s += a * keep.powi((t - k) as i32) * x;
    }
    s
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn highest(xs: &[f64]) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for &x in xs {
        if x > m {
            m = x;
        }
    }
    m
}

fn lowest(xs: &[f64]) -> f64 {
    let mut m = f64::INFINITY;
    for &x in xs {
        if x < m {
            m = x;
        }
    }
    m
}

/// Columns of a price series plus the oracle functions over them.
pub struct Oracle<'a> {
    pub h: &'a [f64],
    pub l: &'a [f64],
    pub c: &'a [f64],
    pub v: &'a [f64],
    pub cfg: &'a IndicatorConfig,
    macd_line: Vec<f64>,
    adosc_raw: Vec<f64>,
}

impl Oracle<'_> {
    /// Precomputes the EMA-based lines with the closed form (quadratic cost).
    pub fn from_prices<'a>(p: &'a PriceSeries, cfg: &'a IndicatorConfig) -> Oracle<'a> {
        let c = &p.close;
        let diff: Vec<f64> = (0..c.len())
            .map(|i| ema_at(c, cfg.macd_fast, i) - ema_at(c, cfg.macd_slow, i))
            .collect();
        let macd_line = (0..c.len()).map(|i| diff[i] - ema_at(&diff, cfg.macd_signal, i)).collect();
        let mut o = Oracle {
            h: &p.high,
            l: &p.low,
            c,
            v: &p.volume,
            cfg,
            macd_line,
            adosc_raw: Vec::new(),
        };
        let ad: Vec<f64> = (0..c.len()).map(|i| o.ad(i)).collect();
        o.adosc_raw = (0..c.len())
            .map(|i| ema_at(&ad, cfg.adosc_fast, i) - ema_at(&ad, cfg.adosc_slow, i))
            .collect();
        o
    }

    pub fn sma_ratio(&self, n: usize, t: usize) -> f64 {
        self.c[t] / mean(&self.c[t + 1 - n..=t])
    }

    fn fast_k(&self, t: usize) -> f64 {
        let n = self.cfg.stoch_fastk;
        let hh = highest(&self.h[t + 1 - n..=t]);
        let ll = lowest(&self.l[t + 1 - n..=t]);
        if hh - ll <= 0.0 {
            50.0
        } else {
            100.0 * (self.c[t] - ll) / (hh - ll)
        }
    }

    pub fn slow_k(&self, t: usize) -> f64 {
        let m = self.cfg.stoch_slowk;
        let ks: Vec<f64> = (t + 1 - m..=t).map(|i| self.fast_k(i)).collect();
        mean(&ks)
    }

    pub fn slow_d(&self, t: usize) -> f64 {
        let m = self.cfg.stoch_slowd;
        let ks: Vec<f64> = (t + 1 - m..=t).map(|i| self.slow_k(i)).collect();
        mean(&ks)
    }

    pub fn willr(&self, t: usize) -> f64 {
        let n = self.cfg.willr_n;
        let hh = highest(&self.h[t + 1 - n..=t]);
        let ll = lowest(&self.l[t + 1 - n..=t]);
        if hh - ll <= 0.0 {
            -50.0
        } else {
            -100.0 * (hh - self.c[t]) / (hh - ll)
        }
    }

    pub fn macd_diff(&self, t: usize) -> f64 {
        (self.macd_line[t] - self.macd_line[t - 1]) / self.c[t]
    }

    /// Magnitude of the two MACD line values behind `macd_diff(t)`.
    pub fn macd_diff_scale(&self, t: usize) -> f64 {
        (self.macd_line[t].abs() + self.macd_line[t - 1].abs()) / self.c[t]
    }

    pub fn cci(&self, t: usize) -> f64 {
        let n = self.cfg.cci_n;
        let tp: Vec<f64> = (t + 1 - n..=t).map(|i| (self.h[i] + self.l[i] + self.c[i]) / 3.0).collect();
        let m = mean(&tp);
        let mad = tp.iter().map(|x| (x - m).abs()).sum::<f64>() / n as f64;
        if mad > 0.0 {
            (tp[n - 1] - m) / (0.015 * mad)
        } else {
            0.0
        }
    }

    /// `100 G / (G + L)` over the last `n` close changes.
    pub fn rsi(&self, t: usize) -> f64 {
        let n = self.cfg.rsi_n;
        let (mut g, mut l) = (0.0, 0.0);
        for i in t + 1 - n..=t {
            let d = self.c[i] - self.c[i - 1];
            if d > 0.0 {
                g += d;
            } else {
                l -= d;
            }
        }
        match (g > 0.0, l > 0.0) {
            (false, false) => 50.0,
            (true, false) => 100.0,
            (false, true) => 0.0,
            (true, true) => 100.0 * g / (g + l),
        }
    }

    /// Accumulation/distribution line at bar `t`, summed from bar 0.
    pub fn ad(&self, t: usize) -> f64 {
        (0..=t)
            .map(|i| {
                let span = self.h[i] - self.l[i];
                if span <= 0.0 {
                    0.0
                } else {
                    ((self.c[i] - self.l[i]) - (self.h[i] - self.c[i])) / span * self.v[i]
                }
            })
            .sum()
    }

    /// Z-scored Chaikin oscillator; zero when the window has no spread.
    pub fn adosc(&self, t: usize) -> f64 {
        let z = self.cfg.adosc_zscore_len;
        let raw = &self.adosc_raw[t + 1 - z..=t];
        let m = mean(raw);
        let var = raw.iter().map(|x| (x - m).powi(2)).sum::<f64>() / z as f64;
        let sd = var.sqrt();
        let scale = raw.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
        if sd <= scale * f64::EPSILON * 64.0 {
            0.0
        } else {
            (raw[z - 1] - m) / sd
        }
    }

    /// `(|x| + |mean|) / sd` for the z-score behind `adosc(t)`.
    pub fn adosc_scale(&self, t: usize) -> f64 {
        let z = self.cfg.adosc_zscore_len;
        let raw = &self.adosc_raw[t + 1 - z..=t];
        let m = mean(raw);
        let sd = (raw.iter().map(|x| (x - m).powi(2)).sum::<f64>() / z as f64).sqrt();
        if sd > 0.0 {
            (raw[z - 1].abs() + m.abs()) / sd
        } else {
            0.0
        }
    }

    /// Operand magnitude for features computed by cancellation, else 0.
    pub fn feature_scale(&self, j: usize, t: usize) -> f64 {
        match FEATURE_NAMES[j] {
            "macd_diff" => self.macd_diff_scale(t),
            "adosc" => self.adosc_scale(t),
            _ => 0.0,
        }
    }

    /// The nine indicator inputs at bar `t`, in network order.
    pub fn features(&self, t: usize) -> [f64; 9] {
        [
            self.sma_ratio(self.cfg.sma_fast, t),
            self.sma_ratio(self.cfg.sma_slow, t),
            self.slow_k(t),
            self.slow_d(t),
            self.willr(t),
            self.macd_diff(t),
            self.cci(t),
            self.rsi(t),
            self.adosc(t),
        ]
    }
}

pub const FEATURE_NAMES: [&str; 9] = [
    "sma5", "sma10", "slow_k", "slow_d", "willr", "macd_diff", "cci", "rsi", "adosc",
];

/// Random OHLCV columns with regime switches, occasional flat bars, flat
/// stretches and zero volume, so the degenerate branches get exercised.
pub fn random_prices<R: Rng + ?Sized>(rng: &mut R, n: usize) -> PriceSeries {
    let mut p = PriceSeries::default();
    let mut price: f64 = rng.random_range(5.0..500.0);
    let mut vol: f64 = rng.random_range(0.002..0.05);
    let mut flat_left = 0usize;
    for _ in 0..n {
        if rng.random_bool(0.02) {
            vol = rng.random_range(0.002..0.05);
        }
        if flat_left == 0 && rng.random_bool(0.01) {
            flat_left = rng.random_range(3..30);
        }
        let open = price;
        if flat_left > 0 {
            flat_left -= 1;
            p.open.push(open);
            p.high.push(open);
            p.low.push(open);
            p.close.push(open);
            p.volume.push(if rng.random_bool(0.5) { 0.0 } else { 1000.0 });
            continue;
        }
        let r: f64 = rng.random_range(-1.0..1.0) * vol * 1.7;
        let close = (open * r.exp()).max(0.01);
        let up: f64 = rng.random_range(0.0..vol);
        let down: f64 = rng.random_range(0.0..vol);
        let (hi, lo) = if rng.random_bool(0.03) {
            (open.max(close), open.min(close))
        } else {
            (open.max(close) * (1.0 + up), open.min(close) * (1.0 - down))
        };
        let volume = if rng.random_bool(0.02) {
            0.0
        } else {
            (rng.random_range(1e3..1e7_f64)).round()
        };
        p.open.push(open);
        p.high.push(hi);
        p.low.push(lo);
        p.close.push(close);
        p.volume.push(volume);
        price = close;
    }
    p
}

/// The same columns as weekday bars for one ticker.
pub fn bars_from_prices(ticker: &str, p: &PriceSeries) -> Vec<Bar> {
    let mut date = NaiveDate::from_ymd_opt(2010, 1, 4).unwrap();
    (0..p.len())
        .map(|i| {
            let b = Bar {
                ticker: ticker.to_string(),
                date,
                open: p.open[i],
                high: p.high[i],
                low: p.low[i],
                close: p.close[i],
                adj_close: p.close[i],
                volume: p.volume[i],
            };
            date += Duration::days(if i % 5 == 4 { 3 } else { 1 });
            b
        })
        .collect()
}

/// Checks every indicator input of `features_from_prices` against the oracle
/// for one series; returns the largest relative error and where it occurred.
pub fn max_feature_error(p: &PriceSeries, cfg: &IndicatorConfig) -> (f64, String) {
    let first = cfg.min_warmup();
    let got: Vec<neat_trader::Features> =
        neat_trader::indicators::features_from_prices(p, first, cfg).expect("features");
    let oracle = Oracle::from_prices(p, cfg);
    let mut worst = (0.0, String::new());
    for (k, fv) in got.iter().enumerate() {
        let t = first + k;
        let inputs = fv.to_inputs();
        for (j, want) in oracle.features(t).into_iter().enumerate() {
            let e = rel_err_scaled(inputs[j + 2], want, oracle.feature_scale(j, t));
            if !(e <= worst.0) {
                worst = (e, format!("{} at bar {t}: got {} want {want}", FEATURE_NAMES[j], inputs[j + 2]));
            }
        }
    }
    worst
}

/// Applies `ops` random mutate/crossover operations to a small pool and
/// audits every result: genome validity, ledger agreement for each gene,
/// finite network outputs, and a never-decreasing innovation counter.
/// Returns the violations found (empty on success).
pub fn neat_fuzz(ops: usize, seed: u64) -> Vec<String> {
    use neat_trader::neat::{
        crossover, mutate, mutate_add_connection, mutate_add_node, mutate_weights, Genome, InnovationLedger,
        NeatConfig, RecurrentNetwork, FIRST_HIDDEN,
    };
    use rand::SeedableRng;

    let cfg = NeatConfig::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut ledger = InnovationLedger::new(FIRST_HIDDEN);
    let mut pool: Vec<Genome> = (0..24)
        .map(|_| {
            let id = ledger.new_genome_id();
            Genome::fully_connected(id, 1.0, &mut ledger, &mut rng)
        })
        .collect();
    let mut violations = Vec::new();
    let mut last_count = ledger.innovation_count();
    for op in 0..ops {
        if rng.random_bool(0.01) {
            ledger.new_generation();
        }
        let i = rng.random_range(0..pool.len());
        let kind = rng.random_range(0..5);
        let mut g = match kind {
            0 => {
                let mut g = pool[i].clone();
                mutate_add_node(&mut g, &mut ledger, &mut rng);
                g
            }
            1 => {
                let mut g = pool[i].clone();
                mutate_add_connection(&mut g, &mut ledger, 1.0, &mut rng);
                g
            }
            2 => {
                let mut g = pool[i].clone();
                mutate_weights(&mut g, &cfg, &mut rng);
                g
            }
            3 => {
                let mut g = pool[i].clone();
                mutate(&mut g, &cfg, &mut ledger, &mut rng);
                g
            }
            _ => {
                let j = rng.random_range(0..pool.len());
                let (mut a, mut b) = (pool[i].clone(), pool[j].clone());
                a.fitness = Some(rng.random_range(0..3) as f64);
                b.fitness = Some(rng.random_range(0..3) as f64);
                let id = ledger.new_genome_id();
                match crossover(&a, &b, id, &cfg, &mut rng) {
                    Ok(c) => c,
                    Err(e) => {
                        violations.push(format!("op {op}: crossover failed: {e}"));
                        continue;
                    }
                }
            }
        };
        if let Err(e) = g.validate() {
            violations.push(format!("op {op} kind {kind}: {e}"));
        }
        let count = ledger.innovation_count();
        if count < last_count {
            violations.push(format!("op {op}: innovation counter went back"));
        }
        last_count = count;
        for c in &g.connections {
            if ledger.lookup(c.in_node, c.out_node) != Some(c.innovation) || c.innovation >= count {
                violations.push(format!("op {op}: gene {} disagrees with the ledger", c.innovation));
            }
        }
        if op % 16 == 0 {
            let mut net = RecurrentNetwork::<f64>::decode(&g);
            let x = [0.3; neat_trader::indicators::N_INPUTS];
            match net.activate(&x) {
                Ok(out) if out.iter().all(|v| v.is_finite()) => {}
                other => violations.push(format!("op {op}: bad activation {other:?}")),
            }
        }
        if g.connections.len() > 300 {
            let id = ledger.new_genome_id();
            g = Genome::fully_connected(id, 1.0, &mut ledger, &mut rng);
        }
        g.fitness = None;
        pool[i] = g;
    }
    violations
}

/// Three hand-made paired runs. Model: 4 of 10 trades won; Buy & Hold up in
/// 2 of 3 runs; model strictly ahead once, behind once, one tie.
pub fn comparison_fixture() -> Vec<neat_trader::evaluator::RunRecord> {
    use neat_trader::evaluator::RunRecord;
    let run = |id: usize, m: f64, b: f64, exp: f64, n: usize, w: usize| RunRecord {
        run_id: id,
        ticker: "FIX".into(),
        start: NaiveDate::from_ymd_opt(2020, 1, 2),
        end: NaiveDate::from_ymd_opt(2020, 12, 31),
        model_return: m,
        bnh_return: b,
        model_exposure: exp,
        bnh_exposure: 100.0,
        n_trades: n,
        winning_trades: w,
        avg_duration: 5.0,
    };
    vec![
        run(0, 12.0, 6.0, 80.0, 6, 3),
        run(1, -3.0, 9.0, 50.0, 4, 1),
        run(2, -2.0, -2.0, 20.0, 0, 0),
    ]
}

/// Replays the fill log from the starting cash and checks every snapshot and
/// the final equity against it. Returns the worst relative mismatch.
pub fn audit_fills(r: &neat_trader::backtest::BacktestReport, w: &neat_trader::market_data::SeriesWindow) -> f64 {
    let p = w.prices();
    let closes = &p.close[w.warmup_len()..];
    let opens = &p.open[w.warmup_len()..];
    let last = r.snapshots.len() - 1;

    // Trailing fills at the last bar's close are the end-of-run liquidation.
    let mut split = r.fills.len();
    let mut unwind = 0.0;
    let net_last = r.snapshots[last].net_position;
    if net_last != 0.0 {
        while split > 0 && (unwind + net_last).abs() > 1e-9 * net_last.abs() {
            split -= 1;
            unwind += r.fills[split].shares;
        }
    }
    let (trading, liquidation) = r.fills.split_at(split);
    for f in liquidation {
        assert_eq!((f.bar, f.price), (last, closes[last]));
    }

    let scale = r.initial_equity;
    let mut worst: f64 = 0.0;
    let mut cash = r.initial_equity;
    let mut pos = 0.0;
    let mut it = trading.iter().peekable();
    for (t, s) in r.snapshots.iter().enumerate() {
        while let Some(f) = it.next_if(|f| f.bar == t) {
            assert_eq!(f.price, opens[t], "order fills at the open");
            cash -= f.shares * f.price + f.commission;
            pos += f.shares;
        }
        worst = worst
            .max((s.cash - cash).abs() / scale)
            .max((s.equity - (s.cash + s.net_position * s.close)).abs() / scale)
            .max((s.equity - (cash + pos * closes[t])).abs() / scale);
        worst = worst.max((s.net_position - pos).abs() * closes[t] / scale);
    }
    assert!(it.next().is_none(), "fills after the last snapshot");
    for f in liquidation {
        cash -= f.shares * f.price + f.commission;
        pos += f.shares;
    }
    worst = worst.max(pos.abs() * closes[last] / scale);
    worst = worst.max((r.final_equity - cash).abs() / scale);
    let trade_total: f64 = r.trades.iter().map(|t| t.pnl).sum();
    worst.max((r.final_equity - r.initial_equity - trade_total).abs() / scale)
}
