//! Raw microstructure events, trade-sign classification and the daily price
//! panel that factor signals are built from.

mod io;

use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{CrowdingError, Result};
use crate::panel::{Panel, StockId};

pub use io::{
    ingest_book_snapshots, ingest_metaorders, ingest_price_panel, ingest_trades,
    merge_metaorders, read_book_snapshots, read_metaorders, read_price_panel, read_trades,
    write_book_snapshots, write_metaorders, write_prices, write_trades, IngestOptions, Ingested,
    RowError,
};

/// Date plus milliseconds since midnight.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Timestamp {
    pub date: NaiveDate,
    pub time_ms: u32,
}

impl Timestamp {
    pub fn new(date: NaiveDate, time_ms: u32) -> Self {
        Timestamp { date, time_ms }
    }
}

/// Continuous trading session as a half-open `[open_ms, close_ms)` window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub open_ms: u32,
    pub close_ms: u32,
}

impl Default for Session {
    /// US cash equities, 09:30 to 16:00.
    fn default() -> Self {
        Session {
            open_ms: 34_200_000,
            close_ms: 57_600_000,
        }
    }
}

impl Session {
    pub fn contains(&self, time_ms: u32) -> bool {
        (self.open_ms..self.close_ms).contains(&time_ms)
    }

    pub fn length_ms(&self) -> u32 {
        self.close_ms - self.open_ms
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub stock: StockId,
    pub timestamp: Timestamp,
    pub price: f64,
    /// Prevailing mid at execution, supplied by the data producer.
    pub mid_price: f64,
    pub volume: u64,
}

impl TradeRecord {
    pub fn sign(&self, tolerance: f64) -> Result<TradeSign> {
        classify_trade_sign(self.price, self.mid_price, tolerance)
    }
}

/// Aggressor side inferred from the trade price relative to the mid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TradeSign {
    Buy,
    Sell,
    /// Executed at the mid; never enters an imbalance.
    Excluded,
}

impl TradeSign {
    pub fn side(self) -> Option<Side> {
        match self {
            TradeSign::Buy => Some(Side::Buy),
            TradeSign::Sell => Some(Side::Sell),
            TradeSign::Excluded => None,
        }
    }
}

/// `+1` above `mid·(1+tol)`, `-1` below `mid·(1-tol)`, excluded in between.
pub fn classify_trade_sign(price: f64, mid_price: f64, tolerance: f64) -> Result<TradeSign> {
    if !(price > 0.0 && price.is_finite()) || !(mid_price > 0.0 && mid_price.is_finite()) {
        return Err(CrowdingError::RejectedRecord(format!(
            "price {price} and mid {mid_price} must be positive"
        )));
    }
    if !(tolerance >= 0.0) {
        return Err(CrowdingError::InvalidParameter(format!(
            "price tolerance must be non-negative, got {tolerance}"
        )));
    }
    Ok(if price > mid_price * (1.0 + tolerance) {
        TradeSign::Buy
    } else if price < mid_price * (1.0 - tolerance) {
        TradeSign::Sell
    } else {
        TradeSign::Excluded
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BookSnapshot {
    pub stock: StockId,
    pub timestamp: Timestamp,
    pub bid_volume: f64,
    pub ask_volume: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    pub fn sign(self) -> i64 {
        match self {
            Side::Buy => 1,
            Side::Sell => -1,
        }
    }

    pub fn flipped(self) -> Side {
        match self {
            Side::Buy => Side::Sell,
            Side::Sell => Side::Buy,
        }
    }

    pub fn from_sign(x: f64) -> Option<Side> {
        if x > 0.0 {
            Some(Side::Buy)
        } else if x < 0.0 {
            Some(Side::Sell)
        } else {
            None
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Side::Buy => "B",
            Side::Sell => "S",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// One trading decision: trades sharing client, stock, dates and side.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaorderRecord {
    pub client_id: String,
    pub stock: StockId,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub side: Side,
    pub volume: u64,
}

/// The grouping key; records with equal keys are one metaorder.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MetaorderKey {
    pub stock: StockId,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub client_id: String,
    pub side: Side,
}

impl MetaorderRecord {
    pub fn key(&self) -> MetaorderKey {
        MetaorderKey {
            stock: self.stock.clone(),
            start_date: self.start_date,
            end_date: self.end_date,
            client_id: self.client_id.clone(),
            side: self.side,
        }
    }

    pub fn is_active_on(&self, date: NaiveDate) -> bool {
        self.start_date <= date && date <= self.end_date
    }
}

/// One row of the daily price file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceRow {
    pub stock: StockId,
    pub date: NaiveDate,
    pub close: f64,
    pub book_value: Option<f64>,
    pub market_cap: Option<f64>,
}

/// Daily closes on the trading-day grid formed by every date in the input.
#[derive(Clone, Debug, PartialEq)]
pub struct PricePanel {
    pub close: Panel,
    /// `close_t / close_{t-1} - 1` where both adjacent closes exist.
    pub returns: Panel,
    /// Book value per share.
    pub book_value: Option<Panel>,
    pub market_cap: Option<Panel>,
}

impl PricePanel {
    /// Rows must already be validated; on duplicate (stock, date) the last wins.
    pub fn from_rows(rows: &[PriceRow]) -> PricePanel {
        let close = Panel::from_cells(rows.iter().map(|r| (r.stock.clone(), r.date, r.close)));
        let stocks = close.stocks().clone();
        let dates = close.dates().clone();

        let optional = |get: fn(&PriceRow) -> Option<f64>| -> Option<Panel> {
            if !rows.iter().any(|r| get(r).is_some()) {
                return None;
            }
            let mut p = Panel::missing(stocks.clone(), dates.clone()).expect("grid");
            for r in rows {
                let i = p.stock_index(&r.stock).expect("stock");
                let t = p.date_index(r.date).expect("date");
                p.set(i, t, get(r));
            }
            Some(p)
        };
        let book_value = optional(|r| r.book_value);
        let market_cap = optional(|r| r.market_cap);

        let returns = simple_returns(&close);
        PricePanel {
            close,
            returns,
            book_value,
            market_cap,
        }
    }

    pub fn stocks(&self) -> &[StockId] {
        self.close.stocks()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        self.close.dates()
    }
}

fn simple_returns(close: &Panel) -> Panel {
    let mut values = vec![f64::NAN; close.values().len()];
    let n = close.n_dates();
    for (i, row) in close.rows().enumerate() {
        for t in 1..n {
            // NaN propagates, so gaps give missing returns.
            values[i * n + t] = row[t] / row[t - 1] - 1.0;
        }
    }
    close.with_values(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_rule() {
        assert_eq!(classify_trade_sign(10.01, 10.00, 0.0).unwrap(), TradeSign::Buy);
        assert_eq!(classify_trade_sign(9.99, 10.00, 0.0).unwrap(), TradeSign::Sell);
        assert_eq!(classify_trade_sign(10.00, 10.00, 0.0).unwrap(), TradeSign::Excluded);
    }

    #[test]
    fn sign_rule_tolerance_band() {
        assert_eq!(classify_trade_sign(10.0005, 10.0, 1e-4).unwrap(), TradeSign::Excluded);
        assert_eq!(classify_trade_sign(10.002, 10.0, 1e-4).unwrap(), TradeSign::Buy);
        assert_eq!(classify_trade_sign(9.998, 10.0, 1e-4).unwrap(), TradeSign::Sell);
    }

    #[test]
    fn sign_rule_rejects_bad_prices() {
        assert!(classify_trade_sign(0.0, 10.0, 0.0).is_err());
        assert!(classify_trade_sign(10.0, -1.0, 0.0).is_err());
        assert!(classify_trade_sign(10.0, 10.0, -0.1).is_err());
        assert!(classify_trade_sign(f64::NAN, 10.0, 0.0).is_err());
    }

    #[test]
    fn price_panel_returns() {
        let d1 = NaiveDate::from_ymd_opt(2020, 1, 2).unwrap();
        let d2 = NaiveDate::from_ymd_opt(2020, 1, 3).unwrap();
        let rows = vec![
            PriceRow { stock: "A".into(), date: d1, close: 100.0, book_value: None, market_cap: None },
            PriceRow { stock: "A".into(), date: d2, close: 110.0, book_value: None, market_cap: None },
        ];
        let p = PricePanel::from_rows(&rows);
        assert_eq!(p.returns.get(0, 0), None);
        assert!((p.returns.get(0, 1).unwrap() - 0.10).abs() < 1e-12);
        assert!(p.book_value.is_none());
    }

    #[test]
    fn price_panel_gap_is_missing_not_zero() {
        let d = |day| NaiveDate::from_ymd_opt(2020, 1, day).unwrap();
        let rows = vec![
            PriceRow { stock: "A".into(), date: d(2), close: 100.0, book_value: None, market_cap: None },
            PriceRow { stock: "B".into(), date: d(3), close: 50.0, book_value: None, market_cap: None },
            PriceRow { stock: "A".into(), date: d(6), close: 101.0, book_value: None, market_cap: None },
        ];
        let p = PricePanel::from_rows(&rows);
        // A is absent on the 3rd, so neither the 3rd nor the 6th has a return.
        assert_eq!(p.returns.present_count(), 0);
    }
}
