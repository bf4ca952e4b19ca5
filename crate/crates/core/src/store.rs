//! On-disk bar store (one SQLite file) and CSV ingestion.
//!
//! Schema:
//!
//! ```sql
//! CREATE TABLE bars (
//!     ticker    TEXT NOT NULL,
//!     date      TEXT NOT NULL,   -- YYYY-MM-DD
//!     open      REAL NOT NULL,
//!     high      REAL NOT NULL,
//!     low       REAL NOT NULL,
//!     close     REAL NOT NULL,
//!     adj_close REAL NOT NULL,
//!     volume    REAL NOT NULL,
//!     PRIMARY KEY (ticker, date)
//! );
//! ```

use std::path::Path;

use chrono::NaiveDate;
use rusqlite::{params, Connection};

use crate::market_data::{Bar, DataError, Dataset, DatasetStats};

const SCHEMA: &str = "CREATE TABLE IF NOT EXISTS bars (
    ticker    TEXT NOT NULL,
    date      TEXT NOT NULL,
    open      REAL NOT NULL,
    high      REAL NOT NULL,
    low       REAL NOT NULL,
    close     REAL NOT NULL,
    adj_close REAL NOT NULL,
    volume    REAL NOT NULL,
    PRIMARY KEY (ticker, date)
) WITHOUT ROWID;";

pub const CSV_HEADER: [&str; 8] = ["Ticker", "Datetime", "Open", "High", "Low", "Close", "Adj_Close", "Volume"];

pub struct Store {
    conn: Connection,
}

impl Store {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let conn = Connection::open(path)?;
        conn.execute_batch(SCHEMA)?;
        Ok(Store { conn })
    }

    pub fn open_in_memory() -> Result<Self, DataError> {
        let conn = Connection::open_in_memory()?;
        conn.execute_batch(SCHEMA)?;
        Ok(Store { conn })
    }

    /// Upserts bars keyed on (ticker, date); later writes win.
    pub fn upsert(&mut self, bars: &[Bar]) -> Result<(), DataError> {
        let tx = self.conn.transaction()?;
        {
            let mut stmt = tx.prepare_cached(
                "INSERT OR REPLACE INTO bars (ticker, date, open, high, low, close, adj_close, volume)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8)",
            )?;
            for b in bars {
                stmt.execute(params![
                    b.ticker,
                    b.date.to_string(),
                    b.open,
                    b.high,
                    b.low,
                    b.close,
                    b.adj_close,
                    b.volume
                ])?;
            }
        }
        tx.commit()?;
        Ok(())
    }

    pub fn stats(&self) -> Result<DatasetStats, DataError> {
        let (rows, tickers, min, max): (i64, i64, Option<String>, Option<String>) = self.conn.query_row(
            "SELECT COUNT(*), COUNT(DISTINCT ticker), MIN(date), MAX(date) FROM bars",
            [],
            |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?, r.get(3)?)),
        )?;
        let parse = |s: Option<String>| s.and_then(|s| NaiveDate::parse_from_str(&s, "%Y-%m-%d").ok());
        Ok(DatasetStats {
            ticker_count: tickers as usize,
            row_count: rows as usize,
            date_min: parse(min),
            date_max: parse(max),
            rejected_row_count: 0,
        })
    }

    /// Loads every bar into the in-memory sampling cache.
    pub fn load_dataset(&self) -> Result<Dataset, DataError> {
        let mut stmt = self.conn.prepare(
            "SELECT ticker, date, open, high, low, close, adj_close, volume FROM bars ORDER BY ticker, date",
        )?;
        let rows = stmt.query_map([], |r| {
            let date: String = r.get(1)?;
            Ok((
                date,
                Bar {
                    ticker: r.get(0)?,
                    date: NaiveDate::MIN,
                    open: r.get(2)?,
                    high: r.get(3)?,
                    low: r.get(4)?,
                    close: r.get(5)?,
                    adj_close: r.get(6)?,
                    volume: r.get(7)?,
                },
            ))
        })?;
        let mut bars = Vec::new();
        for row in rows {
            let (date, mut bar) = row?;
            bar.date = NaiveDate::parse_from_str(&date, "%Y-%m-%d").map_err(|e| {
                DataError::Store(rusqlite::Error::FromSqlConversionFailure(
                    1,
                    rusqlite::types::Type::Text,
                    Box::new(e),
                ))
            })?;
            bars.push(bar);
        }
        Ok(Dataset::from_bars(bars))
    }
}

/// Accepts `YYYY-MM-DD`, optionally followed by a time part.
fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    let day = s.split(['T', ' ']).next()?;
    NaiveDate::parse_from_str(day, "%Y-%m-%d").ok()
}

fn parse_row(rec: &csv::StringRecord) -> Option<Bar> {
    if rec.len() != CSV_HEADER.len() {
        return None;
    }
    let num = |i: usize| rec.get(i)?.trim().parse::<f64>().ok();
    let ticker = rec.get(0)?.trim();
    if ticker.is_empty() {
        return None;
    }
    let bar = Bar {
        ticker: ticker.to_string(),
        date: parse_date(rec.get(1)?)?,
        open: num(2)?,
        high: num(3)?,
        low: num(4)?,
        close: num(5)?,
        adj_close: num(6)?,
        volume: num(7)?,
    };
    bar.validate().ok().map(|_| bar)
}

/// Reads bars from a CSV file, returning valid bars and the count of rejected rows.
pub fn read_csv(path: &Path) -> Result<(Vec<Bar>, usize), DataError> {
    if !path.is_file() {
        return Err(DataError::MissingFile(path.to_path_buf()));
    }
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let header = rdr.headers()?.clone();
    let matches = header.len() == CSV_HEADER.len()
        && header
            .iter()
            .zip(CSV_HEADER)
            .all(|(got, want)| got.trim().eq_ignore_ascii_case(want));
    if !matches {
        return Err(DataError::MalformedHeader {
            path: path.to_path_buf(),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut bars = Vec::new();
    let mut rejected = 0;
    for rec in rdr.records() {
        match rec.ok().as_ref().and_then(parse_row) {
            Some(b) => bars.push(b),
            None => rejected += 1,
        }
    }
    Ok((bars, rejected))
}

/// Ingests one CSV into the store. The returned stats cover the whole store;
/// `rejected_row_count` counts the rows of this file that failed validation.
pub fn ingest_csv(path: &Path, store: &mut Store) -> Result<DatasetStats, DataError> {
    let (bars, rejected) = read_csv(path)?;
    store.upsert(&bars)?;
    let mut stats = store.stats()?;
    stats.rejected_row_count = rejected;
    Ok(stats)
}

/// Writes bars in the ingest CSV schema.
pub fn write_csv(path: &Path, bars: &[Bar]) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for b in bars {
        w.write_record([
            b.ticker.clone(),
            b.date.to_string(),
            b.open.to_string(),
            b.high.to_string(),
            b.low.to_string(),
            b.close.to_string(),
            b.adj_close.to_string(),
            b.volume.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
