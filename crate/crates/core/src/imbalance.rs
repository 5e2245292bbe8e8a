//! Daily imbalance metrics per (stock, day).
//!
//! Trade and volume imbalances are signed fractions of aggressive flow, the
//! book imbalance compares day-averaged best-bid and best-ask depth, and the
//! metaorder imbalances repeat the trade/volume construction over metaorders
//! active on the day. Every metric lies in `[-1, 1]`; a day without the
//! required observations yields a missing value, never a zero.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CrowdingError, Result};
use crate::market_data::{BookSnapshot, MetaorderRecord, Side, TradeRecord};
use crate::panel::{is_weekday, Panel, StockId};

/// `Σε / Σ|ε|`; `None` for an empty day.
pub fn trade_imbalance(signs: &[Side]) -> Option<f64> {
    if signs.is_empty() {
        return None;
    }
    let net: i64 = signs.iter().map(|s| s.sign()).sum();
    Some(net as f64 / signs.len() as f64)
}

/// `Σεv / Σv`.
pub fn volume_imbalance(signs: &[Side], volumes: &[u64]) -> Result<Option<f64>> {
    if signs.len() != volumes.len() {
        return Err(CrowdingError::LengthMismatch {
            left: signs.len(),
            right: volumes.len(),
        });
    }
    let mut acc = VolumeAcc::default();
    for (s, &v) in signs.iter().zip(volumes) {
        acc.add(*s, v);
    }
    Ok(acc.value())
}

#[derive(Clone, Copy, Debug, Default)]
struct VolumeAcc {
    net: i128,
    total: u128,
}

impl VolumeAcc {
    fn add(&mut self, side: Side, volume: u64) {
        self.net += side.sign() as i128 * volume as i128;
        self.total += volume as u128;
    }

    fn value(&self) -> Option<f64> {
        (self.total > 0).then(|| self.net as f64 / self.total as f64)
    }
}

/// `(V̄bid − V̄ask) / (V̄bid + V̄ask)` with both sides averaged over the day's
/// snapshots. `None` without snapshots or with an empty book all day.
pub fn book_imbalance(snapshots: &[BookSnapshot]) -> Option<f64> {
    let mut acc = BookAcc::default();
    for s in snapshots {
        acc.add(s.bid_volume, s.ask_volume);
    }
    acc.value()
}

#[derive(Clone, Copy, Debug, Default)]
struct BookAcc {
    bid: f64,
    ask: f64,
    n: usize,
}

impl BookAcc {
    fn add(&mut self, bid: f64, ask: f64) {
        self.bid += bid;
        self.ask += ask;
        self.n += 1;
    }

    fn value(&self) -> Option<f64> {
        if self.n == 0 {
            return None;
        }
        let bid = self.bid / self.n as f64;
        let ask = self.ask / self.n as f64;
        let total = bid + ask;
        (total > 0.0).then(|| (bid - ask) / total)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetaMode {
    /// Each active metaorder counts once per day.
    Count,
    /// Volume-weighted, each metaorder's volume spread evenly over its active days.
    Volume,
}

/// Number of weekdays in `[start_date, end_date]`, the days a metaorder is active.
pub fn active_days(m: &MetaorderRecord) -> usize {
    let mut n = 0;
    let mut d = m.start_date;
    while d <= m.end_date {
        if is_weekday(d) {
            n += 1;
        }
        d = d.succ_opt().expect("date in range");
    }
    n
}

/// Metaorder imbalance on `date` over the records active that day.
pub fn metaorder_imbalance(
    metaorders: &[MetaorderRecord],
    date: NaiveDate,
    mode: MetaMode,
) -> Option<f64> {
    let mut acc = MetaAcc::default();
    for m in metaorders.iter().filter(|m| m.is_active_on(date) && is_weekday(date)) {
        acc.add(m.side, m.volume as f64 / active_days(m) as f64);
    }
    match mode {
        MetaMode::Count => acc.count_value(),
        MetaMode::Volume => acc.volume_value(),
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct MetaAcc {
    net_count: i64,
    count: usize,
    net_volume: f64,
    volume: f64,
}

impl MetaAcc {
    fn add(&mut self, side: Side, daily_volume: f64) {
        self.net_count += side.sign();
        self.count += 1;
        self.net_volume += side.sign() as f64 * daily_volume;
        self.volume += daily_volume;
    }

    fn count_value(&self) -> Option<f64> {
        (self.count > 0).then(|| self.net_count as f64 / self.count as f64)
    }

    fn volume_value(&self) -> Option<f64> {
        (self.volume > 0.0).then(|| self.net_volume / self.volume)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[serde(rename = "i_trade")]
    Trade,
    #[serde(rename = "i_volume")]
    Volume,
    #[serde(rename = "i_book")]
    Book,
    #[serde(rename = "i_meta")]
    Meta,
    #[serde(rename = "i_metavolume")]
    MetaVolume,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Trade,
        Metric::Volume,
        Metric::Book,
        Metric::Meta,
        Metric::MetaVolume,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Trade => "i_trade",
            Metric::Volume => "i_volume",
            Metric::Book => "i_book",
            Metric::Meta => "i_meta",
            Metric::MetaVolume => "i_metavolume",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Metric {
    type Err = CrowdingError;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s || m.name().trim_start_matches("i_") == s)
            .ok_or_else(|| CrowdingError::InvalidParameter(format!("unknown imbalance metric {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceRow {
    pub stock: StockId,
    pub date: NaiveDate,
    pub i_trade: Option<f64>,
    pub i_volume: Option<f64>,
    pub i_book: Option<f64>,
    pub i_meta: Option<f64>,
    pub i_metavolume: Option<f64>,
    /// Non-excluded trades.
    pub n_trades: usize,
    pub n_snapshots: usize,
    pub n_metaorders: usize,
}

impl ImbalanceRow {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Trade => self.i_trade,
            Metric::Volume => self.i_volume,
            Metric::Book => self.i_book,
            Metric::Meta => self.i_meta,
            Metric::MetaVolume => self.i_metavolume,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PanelOptions {
    pub min_trades: usize,
    pub min_snapshots: usize,
    /// Relative band around the mid inside which trades are excluded.
    pub price_tolerance: f64,
}

impl Default for PanelOptions {
    fn default() -> Self {
        PanelOptions {
            min_trades: 1,
            min_snapshots: 1,
            price_tolerance: 0.0,
        }
    }
}

/// Rows sorted by (stock, date), one per stock-day seen in any input.
#[derive(Clone, Debug, PartialEq)]
pub struct DailyImbalancePanel {
    rows: Vec<ImbalanceRow>,
}

/// Running totals for one stock-day, reduced to an [`ImbalanceRow`] at the end.
#[derive(Clone, Debug, Default)]
pub struct DayAggregator {
    trade_net: i64,
    n_trades: usize,
    volume: VolumeAcc,
    book: BookAcc,
    meta: MetaAcc,
}

impl DayAggregator {
    pub fn add_trade(&mut self, side: Side, volume: u64) {
        self.trade_net += side.sign();
        self.n_trades += 1;
        self.volume.add(side, volume);
    }

    pub fn add_snapshot(&mut self, bid_volume: f64, ask_volume: f64) {
        self.book.add(bid_volume, ask_volume);
    }

    /// One active metaorder contributing `daily_volume` today.
    pub fn add_metaorder(&mut self, side: Side, daily_volume: f64) {
        self.meta.add(side, daily_volume);
    }

    pub fn finish(&self, stock: StockId, date: NaiveDate, opts: &PanelOptions) -> ImbalanceRow {
        let enough_trades = self.n_trades >= opts.min_trades.max(1);
        let enough_snaps = self.book.n >= opts.min_snapshots.max(1);
        ImbalanceRow {
            stock,
            date,
            i_trade: enough_trades.then(|| self.trade_net as f64 / self.n_trades as f64),
            i_volume: if enough_trades { self.volume.value() } else { None },
            i_book: if enough_snaps { self.book.value() } else { None },
            i_meta: self.meta.count_value(),
            i_metavolume: self.meta.volume_value(),
            n_trades: self.n_trades,
            n_snapshots: self.book.n,
            n_metaorders: self.meta.count,
        }
    }
}

#[derive(Default)]
struct StockInputs<'a> {
    trades: Vec<&'a TradeRecord>,
    snapshots: Vec<&'a BookSnapshot>,
    metaorders: Vec<&'a MetaorderRecord>,
}

/// Reduces raw events to the five daily metrics.
///
/// Work fans out per stock; rows are concatenated in stock order, so the
/// result does not depend on the thread schedule.
pub fn build_daily_panel(
    trades: &[TradeRecord],
    snapshots: &[BookSnapshot],
    metaorders: &[MetaorderRecord],
    opts: &PanelOptions,
) -> Result<DailyImbalancePanel> {
    if !(opts.price_tolerance >= 0.0) {
        return Err(CrowdingError::InvalidParameter(format!(
            "price tolerance must be non-negative, got {}",
            opts.price_tolerance
        )));
    }
    let mut by_stock: BTreeMap<&StockId, StockInputs<'_>> = BTreeMap::new();
    for t in trades {
        by_stock.entry(&t.stock).or_default().trades.push(t);
    }
    for s in snapshots {
        by_stock.entry(&s.stock).or_default().snapshots.push(s);
    }
    for m in metaorders {
        by_stock.entry(&m.stock).or_default().metaorders.push(m);
    }

    let per_stock: Vec<Result<Vec<ImbalanceRow>>> = by_stock
        .into_par_iter()
        .map(|(stock, inputs)| stock_rows(stock, &inputs, opts))
        .collect();
    let mut rows = Vec::new();
    for r in per_stock {
        rows.extend(r?);
    }
    Ok(DailyImbalancePanel { rows })
}

fn stock_rows(stock: &StockId, inputs: &StockInputs<'_>, opts: &PanelOptions) -> Result<Vec<ImbalanceRow>> {
    let mut days: BTreeMap<NaiveDate, DayAggregator> = BTreeMap::new();
    for t in &inputs.trades {
        let acc = days.entry(t.timestamp.date).or_default();
        if let Some(side) = t.sign(opts.price_tolerance)?.side() {
            acc.add_trade(side, t.volume);
        }
    }
    for s in &inputs.snapshots {
        days.entry(s.timestamp.date)
            .or_default()
            .add_snapshot(s.bid_volume, s.ask_volume);
    }
    for m in &inputs.metaorders {
        let per_day = m.volume as f64 / active_days(m).max(1) as f64;
        let mut d = m.start_date;
        while d <= m.end_date {
            if is_weekday(d) {
                days.entry(d).or_default().add_metaorder(m.side, per_day);
            }
            d = d.succ_opt().expect("date in range");
        }
    }
    Ok(days
        .into_iter()
        .map(|(date, acc)| acc.finish(stock.clone(), date, opts))
        .collect())
}

const PANEL_HEADER: [&str; 10] = [
    "stock",
    "date",
    "i_trade",
    "i_volume",
    "i_book",
    "i_meta",
    "i_metavolume",
    "n_trades",
    "n_snapshots",
    "n_metaorders",
];

impl DailyImbalancePanel {
    /// Sorts rows into (stock, date) order.
    pub fn from_rows(mut rows: Vec<ImbalanceRow>) -> Self {
        rows.sort_by(|a, b| (&a.stock, a.date).cmp(&(&b.stock, b.date)));
        DailyImbalancePanel { rows }
    }

    pub fn rows(&self) -> &[ImbalanceRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Sorted unique stocks and dates over all rows.
    pub fn grid(&self) -> (Arc<[StockId]>, Arc<[NaiveDate]>) {
        let mut stocks: Vec<StockId> = Vec::new();
        for r in &self.rows {
            if stocks.last() != Some(&r.stock) {
                stocks.push(r.stock.clone());
            }
        }
        let mut dates: Vec<NaiveDate> = self.rows.iter().map(|r| r.date).collect();
        dates.sort_unstable();
        dates.dedup();
        (stocks.into(), dates.into())
    }

    /// One metric as a dense panel over [`grid`](Self::grid).
    /// Mean daily trade count per stock over its rows: a liquidity measure
    /// for liquidity-weighted averaging.
    pub fn mean_daily_trades(&self) -> BTreeMap<StockId, f64> {
        let mut acc: BTreeMap<StockId, (usize, usize)> = BTreeMap::new();
        for r in &self.rows {
            let e = acc.entry(r.stock.clone()).or_default();
            e.0 += r.n_trades;
            e.1 += 1;
        }
        acc.into_iter().map(|(s, (t, n))| (s, t as f64 / n as f64)).collect()
    }

    pub fn metric(&self, metric: Metric) -> Panel {
        let (stocks, dates) = self.grid();
        self.metric_on(metric, &stocks, &dates)
    }

    pub fn metric_on(&self, metric: Metric, stocks: &Arc<[StockId]>, dates: &Arc<[NaiveDate]>) -> Panel {
        let mut panel = Panel::missing(stocks.clone(), dates.clone()).expect("sorted grid");
        for r in &self.rows {
            if let (Some(i), Some(t)) = (panel.stock_index(&r.stock), panel.date_index(r.date)) {
                panel.set(i, t, r.get(metric));
            }
        }
        panel
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| CrowdingError::io(path, e))?;
        let mut w = csv::Writer::from_writer(f);
        w.write_record(PANEL_HEADER).map_err(|e| CrowdingError::csv(path, e))?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.stock.to_string(),
                r.date.to_string(),
                opt(r.i_trade),
                opt(r.i_volume),
                opt(r.i_book),
                opt(r.i_meta),
                opt(r.i_metavolume),
                r.n_trades.to_string(),
                r.n_snapshots.to_string(),
                r.n_metaorders.to_string(),
            ])
            .map_err(|e| CrowdingError::csv(path, e))?;
        }
        let mut f = w.into_inner().map_err(|e| CrowdingError::io(path, e.into_error()))?;
        f.flush().map_err(|e| CrowdingError::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = csv::Reader::from_path(path).map_err(|e| CrowdingError::csv(path, e))?;
        let headers = rdr.headers().map_err(|e| CrowdingError::csv(path, e))?.clone();
        let missing: Vec<String> = PANEL_HEADER
            .iter()
            .filter(|h| !headers.iter().any(|x| x == **h))
            .map(|h| h.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(CrowdingError::MissingColumns {
                path: path.to_path_buf(),
                missing,
            });
        }
        let col = |name: &str| headers.iter().position(|h| h == name).expect("checked");
        let idx: Vec<usize> = PANEL_HEADER.iter().map(|h| col(h)).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| CrowdingError::csv(path, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            let bad = |what: &str| CrowdingError::RejectedRecord(format!("{}:{line}: bad {what}", path.display()));
            let opt = |k: usize| -> Result<Option<f64>> {
                let s = &rec[idx[k]];
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|_| bad(PANEL_HEADER[k]))
                }
            };
            let count = |k: usize| -> Result<usize> { rec[idx[k]].parse().map_err(|_| bad(PANEL_HEADER[k])) };
            rows.push(ImbalanceRow {
                stock: StockId::new(&rec[idx[0]]),
                date: NaiveDate::parse_from_str(&rec[idx[1]], "%Y-%m-%d").map_err(|_| bad("date"))?,
                i_trade: opt(2)?,
                i_volume: opt(3)?,
                i_book: opt(4)?,
                i_meta: opt(5)?,
                i_metavolume: opt(6)?,
                n_trades: count(7)?,
                n_snapshots: count(8)?,
                n_metaorders: count(9)?,
            });
        }
        Ok(DailyImbalancePanel::from_rows(rows))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::Timestamp;
    use Side::{Buy as B, Sell as S};

    fn d(day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 6, day).unwrap()
    }

    fn snap(bid: f64, ask: f64) -> BookSnapshot {
        BookSnapshot {
            stock: "X".into(),
            timestamp: Timestamp::new(d(1), 34_200_000),
            bid_volume: bid,
            ask_volume: ask,
        }
    }

    fn meta(side: Side, start: NaiveDate, end: NaiveDate, volume: u64) -> MetaorderRecord {
        MetaorderRecord {
            client_id: "c".into(),
            stock: "X".into(),
            start_date: start,
            end_date: end,
            side,
            volume,
        }
    }

    fn trade(stock: &str, date: NaiveDate, price: f64, volume: u64) -> TradeRecord {
        TradeRecord {
            stock: stock.into(),
            timestamp: Timestamp::new(date, 40_000_000),
            price,
            mid_price: 10.0,
            volume,
        }
    }

    #[test]
    fn trade_imbalance_examples() {
        assert_eq!(trade_imbalance(&[B, B, B]), Some(1.0));
        assert_eq!(trade_imbalance(&[B, B, S, S]), Some(0.0));
        assert_eq!(trade_imbalance(&[B, B, B, S]), Some(0.5));
        assert_eq!(trade_imbalance(&[]), None);
    }

    #[test]
    fn volume_imbalance_examples() {
        let v = volume_imbalance(&[B, S], &[100, 50]).unwrap().unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(volume_imbalance(&[S, S], &[3, 7]).unwrap(), Some(-1.0));
        assert_eq!(volume_imbalance(&[B, S], &[40, 40]).unwrap(), Some(0.0));
        assert_eq!(volume_imbalance(&[], &[]).unwrap(), None);
        assert!(matches!(
            volume_imbalance(&[B], &[1, 2]),
            Err(CrowdingError::LengthMismatch { left: 1, right: 2 })
        ));
    }

    #[test]
    fn book_imbalance_examples() {
        assert_eq!(book_imbalance(&[snap(5.0, 5.0), snap(7.0, 7.0)]), Some(0.0));
        assert_eq!(book_imbalance(&[snap(300.0, 100.0), snap(300.0, 100.0)]), Some(0.5));
        assert_eq!(book_imbalance(&[snap(300.0, 100.0), snap(100.0, 300.0)]), Some(0.0));
        assert_eq!(book_imbalance(&[snap(0.0, 0.0)]), None);
        assert_eq!(book_imbalance(&[]), None);
    }

    #[test]
    fn metaorder_count_mode() {
        let ms = vec![
            meta(B, d(1), d(1), 10),
            meta(B, d(1), d(1), 10),
            meta(B, d(1), d(1), 10),
            meta(S, d(1), d(1), 10),
        ];
        assert_eq!(metaorder_imbalance(&ms, d(1), MetaMode::Count), Some(0.5));
        assert_eq!(metaorder_imbalance(&ms, d(2), MetaMode::Count), None);
    }

    #[test]
    fn metaorder_volume_apportioned_over_active_days() {
        // 2020-06-01 is a Monday: five active weekdays.
        let m = meta(B, d(1), d(5), 500);
        assert_eq!(active_days(&m), 5);
        let other = meta(S, d(3), d(3), 100);
        let v = metaorder_imbalance(&[m.clone(), other], d(3), MetaMode::Volume).unwrap();
        assert_eq!(v, 0.0, "100 shares/day against a 100-share sell");
        let panel = build_daily_panel(&[], &[], &[m], &PanelOptions::default()).unwrap();
        assert_eq!(panel.len(), 5);
        assert!(panel.rows().iter().all(|r| r.i_metavolume == Some(1.0) && r.n_metaorders == 1));
    }

    #[test]
    fn panel_missing_vs_present() {
        let trades = vec![trade("A", d(1), 10.1, 10), trade("A", d(1), 9.9, 30)];
        let panel = build_daily_panel(&trades, &[], &[], &PanelOptions::default()).unwrap();
        let r = &panel.rows()[0];
        assert_eq!(r.i_trade, Some(0.0));
        assert_eq!(r.i_volume, Some(-0.5));
        assert_eq!(r.i_meta, None);
        assert_eq!(r.i_book, None);
    }

    #[test]
    fn panel_excluded_trades_never_count() {
        let trades = vec![trade("A", d(1), 10.0, 10), trade("A", d(1), 10.0, 30)];
        let panel = build_daily_panel(&trades, &[], &[], &PanelOptions::default()).unwrap();
        let r = &panel.rows()[0];
        assert_eq!(r.n_trades, 0);
        assert_eq!(r.i_trade, None);
        assert_eq!(r.i_volume, None);
    }

    #[test]
    fn panel_union_of_stocks() {
        let trades = vec![trade("A", d(1), 10.1, 10)];
        let mut s = snap(1.0, 3.0);
        s.stock = "B".into();
        let panel = build_daily_panel(&trades, &[s], &[], &PanelOptions::default()).unwrap();
        let stocks: Vec<&str> = panel.rows().iter().map(|r| r.stock.as_str()).collect();
        assert_eq!(stocks, vec!["A", "B"]);
        assert_eq!(panel.rows()[1].i_book, Some(-0.5));
    }

    #[test]
    fn panel_min_trades_threshold() {
        let trades = vec![trade("A", d(1), 10.1, 10), trade("A", d(2), 10.1, 10), trade("A", d(2), 9.0, 10)];
        let opts = PanelOptions {
            min_trades: 2,
            ..PanelOptions::default()
        };
        let panel = build_daily_panel(&trades, &[], &[], &opts).unwrap();
        assert_eq!(panel.rows()[0].i_trade, None);
        assert_eq!(panel.rows()[1].i_trade, Some(0.0));
    }

    #[test]
    fn metric_panel_and_csv_round_trip() {
        let trades = vec![trade("A", d(1), 10.1, 10), trade("B", d(2), 9.9, 10)];
        let panel = build_daily_panel(&trades, &[], &[], &PanelOptions::default()).unwrap();
        let p = panel.metric(Metric::Trade);
        assert_eq!(p.n_stocks(), 2);
        assert_eq!(p.n_dates(), 2);
        assert_eq!(p.get(0, 0), Some(1.0));
        assert_eq!(p.get(0, 1), None);
        assert_eq!(p.get(1, 1), Some(-1.0));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("panel.csv");
        panel.write_csv(&path).unwrap();
        let back = DailyImbalancePanel::read_csv(&path).unwrap();
        assert_eq!(back, panel);
    }

    #[test]
    fn metric_names_parse() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert_eq!("book".parse::<Metric>().unwrap(), Metric::Book);
        assert!("nope".parse::<Metric>().is_err());
    }
}
