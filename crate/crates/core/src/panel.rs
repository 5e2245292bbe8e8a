//! Columnar (stock × trading day) panels.
//!
//! Every per-(stock, day) quantity in the crate lives in a [`Panel`]: one
//! contiguous row per stock, one column per date, `NaN` marking a missing
//! cell. Grids are shared through `Arc` so that many derived panels (one per
//! slowing timescale, one per reshuffled sample) cost a single allocation.

use std::fmt;
use std::sync::Arc;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{CrowdingError, Result};

/// Opaque stock symbol.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StockId(Arc<str>);

impl StockId {
    pub fn new(symbol: &str) -> Self {
        StockId(Arc::from(symbol))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for StockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl fmt::Display for StockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for StockId {
    fn from(s: &str) -> Self {
        StockId::new(s)
    }
}

/// Dense stock × date matrix with `NaN` for missing cells.
///
/// Stocks and dates are both strictly increasing; the constructors enforce it.
#[derive(Clone, Debug)]
pub struct Panel {
    stocks: Arc<[StockId]>,
    dates: Arc<[NaiveDate]>,
    values: Vec<f64>,
}

impl PartialEq for Panel {
    /// Bitwise comparison: two missing cells compare equal.
    fn eq(&self, other: &Self) -> bool {
        self.same_grid(other)
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()))
    }
}

impl Panel {
    pub fn new(
        stocks: Arc<[StockId]>,
        dates: Arc<[NaiveDate]>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if values.len() != stocks.len() * dates.len() {
            return Err(CrowdingError::InvalidParameter(format!(
                "panel of {} stocks × {} dates needs {} values, got {}",
                stocks.len(),
                dates.len(),
                stocks.len() * dates.len(),
                values.len()
            )));
        }
        if !stocks.windows(2).all(|w| w[0] < w[1]) {
            return Err(CrowdingError::InvalidParameter(
                "panel stocks must be strictly increasing".into(),
            ));
        }
        if !dates.windows(2).all(|w| w[0] < w[1]) {
            return Err(CrowdingError::InvalidParameter(
                "panel dates must be strictly increasing".into(),
            ));
        }
        Ok(Panel {
            stocks,
            dates,
            values,
        })
    }

    /// A panel where every cell is missing.
    pub fn missing(stocks: Arc<[StockId]>, dates: Arc<[NaiveDate]>) -> Result<Self> {
        let n = stocks.len() * dates.len();
        Panel::new(stocks, dates, vec![f64::NAN; n])
    }

    /// Builds a panel from sparse cells. The grid is the sorted union of the
    /// stocks and dates seen; later duplicates overwrite earlier ones.
    pub fn from_cells<I>(cells: I) -> Self
    where
        I: IntoIterator<Item = (StockId, NaiveDate, f64)>,
    {
        let cells: Vec<_> = cells.into_iter().collect();
        let mut stocks: Vec<StockId> = cells.iter().map(|c| c.0.clone()).collect();
        stocks.sort();
        stocks.dedup();
        let mut dates: Vec<NaiveDate> = cells.iter().map(|c| c.1).collect();
        dates.sort();
        dates.dedup();
        let mut panel = Panel::missing(stocks.into(), dates.into()).expect("sorted grid");
        for (s, d, v) in cells {
            let i = panel.stock_index(&s).expect("stock in grid");
            let t = panel.date_index(d).expect("date in grid");
            panel.values[i * panel.dates.len() + t] = v;
        }
        panel
    }

    /// Same grid, values produced cell-by-cell from `self`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Panel {
        Panel {
            stocks: self.stocks.clone(),
            dates: self.dates.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Same grid with new values; panics on a length mismatch.
    pub fn with_values(&self, values: Vec<f64>) -> Panel {
        assert_eq!(values.len(), self.values.len(), "value count must match grid");
        Panel {
            stocks: self.stocks.clone(),
            dates: self.dates.clone(),
            values,
        }
    }

    pub fn stocks(&self) -> &Arc<[StockId]> {
        &self.stocks
    }

    pub fn dates(&self) -> &Arc<[NaiveDate]> {
        &self.dates
    }

    pub fn n_stocks(&self) -> usize {
        self.stocks.len()
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn stock_index(&self, stock: &StockId) -> Option<usize> {
        self.stocks.binary_search(stock).ok()
    }

    pub fn date_index(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    pub fn get(&self, stock: usize, day: usize) -> Option<f64> {
        let v = self.values[stock * self.dates.len() + day];
        (!v.is_nan()).then_some(v)
    }

    pub fn set(&mut self, stock: usize, day: usize, value: Option<f64>) {
        let n = self.dates.len();
        self.values[stock * n + day] = value.unwrap_or(f64::NAN);
    }

    pub fn lookup(&self, stock: &StockId, date: NaiveDate) -> Option<f64> {
        self.get(self.stock_index(stock)?, self.date_index(date)?)
    }

    pub fn row(&self, stock: usize) -> &[f64] {
        let n = self.dates.len();
        &self.values[stock * n..(stock + 1) * n]
    }

    pub fn row_mut(&mut self, stock: usize) -> &mut [f64] {
        let n = self.dates.len();
        &mut self.values[stock * n..(stock + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics, and a zero-date panel has no cells anyway
        let n = self.dates.len().max(1);
        self.values.chunks_exact(n).take(self.stocks.len())
    }

    pub fn same_grid(&self, other: &Panel) -> bool {
        (Arc::ptr_eq(&self.stocks, &other.stocks) || self.stocks == other.stocks)
            && (Arc::ptr_eq(&self.dates, &other.dates) || self.dates == other.dates)
    }

    pub fn present_count(&self) -> usize {
        self.values.iter().filter(|v| !v.is_nan()).count()
    }

    /// Present cells as `(stock, date, value)` in (stock, date) order.
    pub fn cells(&self) -> impl Iterator<Item = (&StockId, NaiveDate, f64)> + '_ {
        let n = self.dates.len();
        self.values.iter().enumerate().filter_map(move |(k, &v)| {
            (!v.is_nan()).then(|| (&self.stocks[k / n], self.dates[k % n], v))
        })
    }

    /// Projects onto another grid. Cells absent from `self` come out missing.
    pub fn reindex(&self, stocks: &Arc<[StockId]>, dates: &Arc<[NaiveDate]>) -> Panel {
        if Arc::ptr_eq(stocks, &self.stocks) && Arc::ptr_eq(dates, &self.dates) {
            return self.clone();
        }
        let date_map: Vec<Option<usize>> = dates.iter().map(|&d| self.date_index(d)).collect();
        let mut values = Vec::with_capacity(stocks.len() * dates.len());
        for stock in stocks.iter() {
            match self.stock_index(stock) {
                Some(i) => {
                    let row = self.row(i);
                    values.extend(date_map.iter().map(|m| m.map_or(f64::NAN, |t| row[t])));
                }
                None => values.extend(std::iter::repeat_n(f64::NAN, dates.len())),
            }
        }
        Panel {
            stocks: stocks.clone(),
            dates: dates.clone(),
            values,
        }
    }

    /// Reindexes onto the grid of `other`.
    pub fn aligned_to(&self, other: &Panel) -> Panel {
        self.reindex(&other.stocks, &other.dates)
    }
}

/// `n` consecutive weekdays starting at `start` (rolled forward off a weekend).
pub fn weekday_calendar(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if is_weekday(d) {
            out.push(d);
        }
        d = d.succ_opt().expect("date in range");
    }
    out
}

/// The `n` weekdays strictly before `end`, in increasing order.
pub fn weekdays_before(end: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = end;
    while out.len() < n {
        d = d.pred_opt().expect("date in range");
        if is_weekday(d) {
            out.push(d);
        }
    }
    out.reverse();
    out
}

pub fn is_weekday(d: NaiveDate) -> bool {
    !matches!(d.weekday(), Weekday::Sat | Weekday::Sun)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    #[test]
    fn from_cells_builds_sorted_grid() {
        let p = Panel::from_cells([
            (StockId::new("B"), d(2020, 1, 3), 2.0),
            (StockId::new("A"), d(2020, 1, 2), 1.0),
        ]);
        assert_eq!(p.n_stocks(), 2);
        assert_eq!(p.n_dates(), 2);
        assert_eq!(p.lookup(&"A".into(), d(2020, 1, 2)), Some(1.0));
        assert_eq!(p.lookup(&"A".into(), d(2020, 1, 3)), None);
        assert_eq!(p.present_count(), 2);
    }

    #[test]
    fn reindex_fills_missing() {
        let p = Panel::from_cells([(StockId::new("A"), d(2020, 1, 2), 1.0)]);
        let stocks: Arc<[StockId]> = vec![StockId::new("A"), StockId::new("Z")].into();
        let dates: Arc<[NaiveDate]> = vec![d(2020, 1, 1), d(2020, 1, 2)].into();
        let r = p.reindex(&stocks, &dates);
        assert_eq!(r.get(0, 0), None);
        assert_eq!(r.get(0, 1), Some(1.0));
        assert_eq!(r.get(1, 1), None);
    }

    #[test]
    fn rejects_unsorted_grid() {
        let stocks: Arc<[StockId]> = vec![StockId::new("B"), StockId::new("A")].into();
        let dates: Arc<[NaiveDate]> = vec![d(2020, 1, 1)].into();
        assert!(Panel::missing(stocks, dates).is_err());
    }

    #[test]
    fn weekday_calendars() {
        let cal = weekday_calendar(d(2021, 1, 1), 3); // Friday
        assert_eq!(cal, vec![d(2021, 1, 1), d(2021, 1, 4), d(2021, 1, 5)]);
        let before = weekdays_before(d(2021, 1, 4), 2);
        assert_eq!(before, vec![d(2020, 12, 31), d(2021, 1, 1)]);
    }
}
