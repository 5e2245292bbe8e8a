//! Delimited-text ingestion and emission for the four input schemas.
//!
//! Ingestion never aborts on a bad row: each malformed or invalid row is
//! reported with its line number and the remaining rows are kept. Only a
//! missing column or an unreadable file is fatal.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{
    BookSnapshot, MetaorderKey, MetaorderRecord, PricePanel, PriceRow, Session, Side, Timestamp,
    TradeRecord,
};
use crate::error::{CrowdingError, Result};
use crate::panel::StockId;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

/// Parsed records plus everything that went wrong on the way.
#[derive(Clone, Debug, PartialEq)]
pub struct Ingested<T> {
    pub records: Vec<T>,
    pub errors: Vec<RowError>,
    pub warnings: Vec<String>,
}

impl<T> Ingested<T> {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty() && self.warnings.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    pub session: Session,
}

const TRADE_COLUMNS: [&str; 6] = ["stock", "date", "time_ms", "price", "mid", "volume"];
const BOOK_COLUMNS: [&str; 5] = ["stock", "date", "time_ms", "bid_volume", "ask_volume"];
const META_COLUMNS: [&str; 6] = ["client", "stock", "start_date", "end_date", "sign", "volume"];
const PRICE_COLUMNS: [&str; 3] = ["stock", "date", "close"];

struct Table {
    source: PathBuf,
    reader: csv::Reader<Box<dyn Read>>,
    index: HashMap<String, usize>,
    empty: bool,
}

impl Table {
    fn open(reader: Box<dyn Read>, source: &Path, required: &[&str]) -> Result<Table> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let headers = reader
            .headers()
            .map_err(|e| CrowdingError::csv(source, e))?
            .clone();
        let empty = headers.is_empty() || (headers.len() == 1 && headers[0].is_empty());
        let index: HashMap<String, usize> = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.to_string(), i))
            .collect();
        if !empty {
            let missing: Vec<String> = required
                .iter()
                .filter(|c| !index.contains_key(**c))
                .map(|c| c.to_string())
                .collect();
            if !missing.is_empty() {
                return Err(CrowdingError::MissingColumns {
                    path: source.to_path_buf(),
                    missing,
                });
            }
        }
        Ok(Table {
            source: source.to_path_buf(),
            reader,
            index,
            empty,
        })
    }

    /// Calls `f` on every data row; row-level failures are collected.
    fn for_each_row(
        mut self,
        errors: &mut Vec<RowError>,
        mut f: impl FnMut(&Row<'_>) -> std::result::Result<(), String>,
    ) -> Result<()> {
        if self.empty {
            return Ok(());
        }
        let mut record = csv::StringRecord::new();
        loop {
            match self.reader.read_record(&mut record) {
                Ok(false) => break,
                Ok(true) => {
                    let line = record.position().map_or(0, |p| p.line());
                    if record.iter().all(str::is_empty) {
                        continue;
                    }
                    let row = Row {
                        record: &record,
                        index: &self.index,
                    };
                    if let Err(message) = f(&row) {
                        errors.push(RowError { line, message });
                    }
                }
                Err(e) => {
                    if e.is_io_error() {
                        return Err(CrowdingError::csv(&self.source, e));
                    }
                    let line = e.position().map_or(0, |p| p.line());
                    errors.push(RowError {
                        line,
                        message: e.to_string(),
                    });
                }
            }
        }
        Ok(())
    }
}

struct Row<'a> {
    record: &'a csv::StringRecord,
    index: &'a HashMap<String, usize>,
}

impl Row<'_> {
    fn raw(&self, col: &str) -> Option<&str> {
        self.index
            .get(col)
            .and_then(|&i| self.record.get(i))
            .filter(|s| !s.is_empty())
    }

    fn str(&self, col: &str) -> std::result::Result<&str, String> {
        self.raw(col).ok_or_else(|| format!("empty field `{col}`"))
    }

    fn parse<T: FromStr>(&self, col: &str) -> std::result::Result<T, String> {
        let s = self.str(col)?;
        s.parse()
            .map_err(|_| format!("cannot parse `{col}` value {s:?}"))
    }

    fn parse_opt<T: FromStr>(&self, col: &str) -> std::result::Result<Option<T>, String> {
        match self.raw(col) {
            None => Ok(None),
            Some(s) => s
                .parse()
                .map(Some)
                .map_err(|_| format!("cannot parse `{col}` value {s:?}")),
        }
    }

    fn date(&self, col: &str) -> std::result::Result<NaiveDate, String> {
        let s = self.str(col)?;
        NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| format!("`{col}` is not an ISO date: {s:?}"))
    }

    fn positive_f64(&self, col: &str) -> std::result::Result<f64, String> {
        let v: f64 = self.parse(col)?;
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(format!("`{col}` must be positive, got {v}"))
        }
    }

    fn positive_int(&self, col: &str) -> std::result::Result<u64, String> {
        let s = self.str(col)?;
        let v: i128 = s
            .parse()
            .map_err(|_| format!("cannot parse `{col}` value {s:?} as whole shares"))?;
        if v <= 0 {
            return Err(format!("`{col}` must be positive, got {v}"));
        }
        u64::try_from(v).map_err(|_| format!("`{col}` out of range: {v}"))
    }
}

fn open_file(path: &Path) -> Result<Box<dyn Read>> {
    let f = File::open(path).map_err(|e| CrowdingError::io(path, e))?;
    Ok(Box::new(std::io::BufReader::new(f)))
}

/// Warns once per (stock, day) whose rows were not in time order.
fn monotonicity_warnings<'a>(
    kind: &str,
    stamps: impl Iterator<Item = (&'a StockId, Timestamp)>,
) -> Vec<String> {
    let mut last: HashMap<(&StockId, NaiveDate), u32> = HashMap::new();
    let mut flagged: BTreeMap<(&StockId, NaiveDate), ()> = BTreeMap::new();
    for (stock, ts) in stamps {
        let key = (stock, ts.date);
        if let Some(&prev) = last.get(&key) {
            if ts.time_ms < prev {
                flagged.insert(key, ());
            }
        }
        last.insert(key, ts.time_ms);
    }
    flagged
        .keys()
        .map(|(s, d)| format!("{kind} for {s} on {d} were not in time order; sorted"))
        .collect()
}

pub fn ingest_trades(path: impl AsRef<Path>, opts: &IngestOptions) -> Result<Ingested<TradeRecord>> {
    let path = path.as_ref();
    read_trades(open_file(path)?, path, opts)
}

pub fn read_trades(
    reader: Box<dyn Read>,
    source: &Path,
    opts: &IngestOptions,
) -> Result<Ingested<TradeRecord>> {
    let table = Table::open(reader, source, &TRADE_COLUMNS)?;
    let mut errors = Vec::new();
    let mut records = Vec::new();
    table.for_each_row(&mut errors, |row| {
        let stock = StockId::new(row.str("stock")?);
        let date = row.date("date")?;
        let time_ms: u32 = row.parse("time_ms")?;
        if !opts.session.contains(time_ms) {
            return Err(format!("time_ms {time_ms} outside the continuous session"));
        }
        let price = row.positive_f64("price")?;
        let mid_price = row.positive_f64("mid")?;
        let volume = row.positive_int("volume")?;
        records.push(TradeRecord {
            stock,
            timestamp: Timestamp::new(date, time_ms),
            price,
            mid_price,
            volume,
        });
        Ok(())
    })?;
    let warnings = monotonicity_warnings("trades", records.iter().map(|r| (&r.stock, r.timestamp)));
    records.sort_by(|a, b| (&a.stock, a.timestamp).cmp(&(&b.stock, b.timestamp)));
    Ok(Ingested {
        records,
        errors,
        warnings,
    })
}

pub fn ingest_book_snapshots(
    path: impl AsRef<Path>,
    opts: &IngestOptions,
) -> Result<Ingested<BookSnapshot>> {
    let path = path.as_ref();
    read_book_snapshots(open_file(path)?, path, opts)
}

pub fn read_book_snapshots(
    reader: Box<dyn Read>,
    source: &Path,
    opts: &IngestOptions,
) -> Result<Ingested<BookSnapshot>> {
    let table = Table::open(reader, source, &BOOK_COLUMNS)?;
    let mut errors = Vec::new();
    let mut records = Vec::new();
    table.for_each_row(&mut errors, |row| {
        let stock = StockId::new(row.str("stock")?);
        let date = row.date("date")?;
        let time_ms: u32 = row.parse("time_ms")?;
        if !opts.session.contains(time_ms) {
            return Err(format!("time_ms {time_ms} outside the continuous session"));
        }
        let bid_volume: f64 = row.parse("bid_volume")?;
        let ask_volume: f64 = row.parse("ask_volume")?;
        for (name, v) in [("bid_volume", bid_volume), ("ask_volume", ask_volume)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("`{name}` must be non-negative, got {v}"));
            }
        }
        records.push(BookSnapshot {
            stock,
            timestamp: Timestamp::new(date, time_ms),
            bid_volume,
            ask_volume,
        });
        Ok(())
    })?;
    let mut warnings =
        monotonicity_warnings("snapshots", records.iter().map(|r| (&r.stock, r.timestamp)));
    records.sort_by(|a, b| (&a.stock, a.timestamp).cmp(&(&b.stock, b.timestamp)));

    // Stable sort keeps file order among equal stamps, so the last one wins.
    let mut deduped: Vec<BookSnapshot> = Vec::with_capacity(records.len());
    for snap in records {
        match deduped.last_mut() {
            Some(prev) if prev.stock == snap.stock && prev.timestamp == snap.timestamp => {
                warnings.push(format!(
                    "duplicate snapshot for {} at {} {}ms; kept the last",
                    snap.stock, snap.timestamp.date, snap.timestamp.time_ms
                ));
                *prev = snap;
            }
            _ => deduped.push(snap),
        }
    }
    Ok(Ingested {
        records: deduped,
        errors,
        warnings,
    })
}

pub fn ingest_metaorders(path: impl AsRef<Path>) -> Result<Ingested<MetaorderRecord>> {
    let path = path.as_ref();
    read_metaorders(open_file(path)?, path)
}

pub fn read_metaorders(reader: Box<dyn Read>, source: &Path) -> Result<Ingested<MetaorderRecord>> {
    let table = Table::open(reader, source, &META_COLUMNS)?;
    let mut errors = Vec::new();
    let mut rows = Vec::new();
    table.for_each_row(&mut errors, |row| {
        let client_id = row.str("client")?.to_string();
        let stock = StockId::new(row.str("stock")?);
        let start_date = row.date("start_date")?;
        let end_date = row.date("end_date")?;
        if start_date > end_date {
            return Err(format!("start_date {start_date} is after end_date {end_date}"));
        }
        let side = match row.str("sign")? {
            "B" | "b" => Side::Buy,
            "S" | "s" => Side::Sell,
            other => return Err(format!("sign must be B or S, got {other:?}")),
        };
        let volume = row.positive_int("volume")?;
        rows.push(MetaorderRecord {
            client_id,
            stock,
            start_date,
            end_date,
            side,
            volume,
        });
        Ok(())
    })?;
    Ok(Ingested {
        records: merge_metaorders(rows),
        errors,
        warnings: Vec::new(),
    })
}

/// Merges rows sharing the full grouping key by summing their volumes.
/// Output is sorted by key, so the merge is order-independent.
pub fn merge_metaorders(rows: impl IntoIterator<Item = MetaorderRecord>) -> Vec<MetaorderRecord> {
    let mut merged: BTreeMap<MetaorderKey, u64> = BTreeMap::new();
    for r in rows {
        *merged.entry(r.key()).or_insert(0) += r.volume;
    }
    merged
        .into_iter()
        .map(|(k, volume)| MetaorderRecord {
            client_id: k.client_id,
            stock: k.stock,
            start_date: k.start_date,
            end_date: k.end_date,
            side: k.side,
            volume,
        })
        .collect()
}

pub fn ingest_price_panel(path: impl AsRef<Path>) -> Result<Ingested<PricePanel>> {
    let path = path.as_ref();
    read_price_panel(open_file(path)?, path)
}

/// The returned `Ingested` holds exactly one panel.
pub fn read_price_panel(reader: Box<dyn Read>, source: &Path) -> Result<Ingested<PricePanel>> {
    let table = Table::open(reader, source, &PRICE_COLUMNS)?;
    let mut errors = Vec::new();
    let mut rows: Vec<PriceRow> = Vec::new();
    table.for_each_row(&mut errors, |row| {
        let stock = StockId::new(row.str("stock")?);
        let date = row.date("date")?;
        let close = row.positive_f64("close")?;
        let book_value: Option<f64> = row.parse_opt("book_value")?;
        let market_cap: Option<f64> = row.parse_opt("market_cap")?;
        if let Some(bv) = book_value {
            if !bv.is_finite() {
                return Err(format!("`book_value` must be finite, got {bv}"));
            }
        }
        if let Some(mc) = market_cap {
            if !(mc > 0.0 && mc.is_finite()) {
                return Err(format!("`market_cap` must be positive, got {mc}"));
            }
        }
        rows.push(PriceRow {
            stock,
            date,
            close,
            book_value,
            market_cap,
        });
        Ok(())
    })?;
    let mut seen: HashMap<(&StockId, NaiveDate), usize> = HashMap::new();
    let mut warnings = Vec::new();
    for r in &rows {
        let count = seen.entry((&r.stock, r.date)).or_insert(0);
        *count += 1;
        if *count == 2 {
            warnings.push(format!("duplicate price row for {} on {}; kept the last", r.stock, r.date));
        }
    }
    Ok(Ingested {
        records: vec![PricePanel::from_rows(&rows)],
        errors,
        warnings,
    })
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CrowdingError::io(parent, e))?;
    }
    let f = File::create(path).map_err(|e| CrowdingError::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

fn finish(mut w: csv::Writer<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| CrowdingError::io(path, e))?;
    let mut f = w
        .into_inner()
        .map_err(|e| CrowdingError::io(path, e.into_error()))?;
    f.flush().map_err(|e| CrowdingError::io(path, e))
}

macro_rules! write_rows {
    ($path:expr, $header:expr, $rows:expr, |$r:ident| $fields:expr) => {{
        let path: &Path = $path;
        let mut w = writer(path)?;
        w.write_record($header).map_err(|e| CrowdingError::csv(path, e))?;
        for $r in $rows {
            w.write_record($fields).map_err(|e| CrowdingError::csv(path, e))?;
        }
        finish(w, path)
    }};
}

pub fn write_trades(path: impl AsRef<Path>, trades: &[TradeRecord]) -> Result<()> {
    write_rows!(path.as_ref(), TRADE_COLUMNS, trades, |r| [
        r.stock.to_string(),
        r.timestamp.date.to_string(),
        r.timestamp.time_ms.to_string(),
        r.price.to_string(),
        r.mid_price.to_string(),
        r.volume.to_string(),
    ])
}

pub fn write_book_snapshots(path: impl AsRef<Path>, snapshots: &[BookSnapshot]) -> Result<()> {
    write_rows!(path.as_ref(), BOOK_COLUMNS, snapshots, |r| [
        r.stock.to_string(),
        r.timestamp.date.to_string(),
        r.timestamp.time_ms.to_string(),
        r.bid_volume.to_string(),
        r.ask_volume.to_string(),
    ])
}

pub fn write_metaorders(path: impl AsRef<Path>, metaorders: &[MetaorderRecord]) -> Result<()> {
    write_rows!(path.as_ref(), META_COLUMNS, metaorders, |r| [
        r.client_id.clone(),
        r.stock.to_string(),
        r.start_date.to_string(),
        r.end_date.to_string(),
        r.side.code().to_string(),
        r.volume.to_string(),
    ])
}

pub fn write_prices(path: impl AsRef<Path>, rows: &[PriceRow]) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    write_rows!(
        path.as_ref(),
        ["stock", "date", "close", "book_value", "market_cap"],
        rows,
        |r| [
            r.stock.to_string(),
            r.date.to_string(),
            r.close.to_string(),
            opt(r.book_value),
            opt(r.market_cap),
        ]
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn src(text: &str) -> Box<dyn Read> {
        Box::new(std::io::Cursor::new(text.as_bytes().to_vec()))
    }

    fn p() -> &'static Path {
        Path::new("<memory>")
    }

    const HDR: &str = "stock,date,time_ms,price,mid,volume\n";

    #[test]
    fn trades_well_formed_sorted() {
        let text = format!(
            "{HDR}AAA,2020-01-02,36000000,10.01,10.00,100\n\
             AAA,2020-01-02,35000000,9.99,10.00,50\n\
             AAA,2020-01-02,37000000,10.00,10.00,10\n"
        );
        let ing = read_trades(src(&text), p(), &IngestOptions::default()).unwrap();
        assert_eq!(ing.records.len(), 3);
        assert!(ing.errors.is_empty());
        let times: Vec<u32> = ing.records.iter().map(|r| r.timestamp.time_ms).collect();
        assert_eq!(times, vec![35_000_000, 36_000_000, 37_000_000]);
        assert_eq!(ing.warnings.len(), 1, "out-of-order stock-day is flagged once");
    }

    #[test]
    fn trades_zero_volume_is_row_error() {
        let text = format!(
            "{HDR}AAA,2020-01-02,36000000,10.01,10.00,0\n\
             AAA,2020-01-02,36000001,10.01,10.00,5\n"
        );
        let ing = read_trades(src(&text), p(), &IngestOptions::default()).unwrap();
        assert_eq!(ing.records.len(), 1);
        assert_eq!(ing.errors.len(), 1);
        assert_eq!(ing.errors[0].line, 2);
    }

    #[test]
    fn trades_empty_file() {
        let ing = read_trades(src(""), p(), &IngestOptions::default()).unwrap();
        assert!(ing.records.is_empty());
        assert!(ing.errors.is_empty());
        let ing = read_trades(src(HDR), p(), &IngestOptions::default()).unwrap();
        assert!(ing.records.is_empty());
    }

    #[test]
    fn trades_missing_column_is_fatal() {
        let err = read_trades(src("stock,date,price\n"), p(), &IngestOptions::default()).unwrap_err();
        match err {
            CrowdingError::MissingColumns { missing, .. } => {
                assert_eq!(missing, vec!["time_ms", "mid", "volume"]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn trades_every_bad_row_reported() {
        let text = format!(
            "{HDR}AAA,2020-01-02,36000000,abc,10.00,1\n\
             AAA,2020-13-02,36000000,10,10.00,1\n\
             AAA,2020-01-02,1000,10,10.00,1\n\
             AAA,2020-01-02,36000000,10,-1,1\n"
        );
        let ing = read_trades(src(&text), p(), &IngestOptions::default()).unwrap();
        assert!(ing.records.is_empty());
        let lines: Vec<u64> = ing.errors.iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![2, 3, 4, 5]);
    }

    const BOOK: &str = "stock,date,time_ms,bid_volume,ask_volume\n";

    #[test]
    fn book_three_snapshots() {
        let text = format!(
            "{BOOK}X,2020-01-02,34200000,100,200\nX,2020-01-02,34205000,100,200\nX,2020-01-02,34210000,1,2\n"
        );
        let ing = read_book_snapshots(src(&text), p(), &IngestOptions::default()).unwrap();
        assert_eq!(ing.records.len(), 3);
        assert!(ing.is_clean());
    }

    #[test]
    fn book_negative_volume_is_row_error() {
        let text = format!("{BOOK}X,2020-01-02,34200000,-5,200\n");
        let ing = read_book_snapshots(src(&text), p(), &IngestOptions::default()).unwrap();
        assert!(ing.records.is_empty());
        assert_eq!(ing.errors.len(), 1);
    }

    #[test]
    fn book_duplicate_keeps_last() {
        let text = format!("{BOOK}X,2020-01-02,34200000,1,2\nX,2020-01-02,34200000,3,4\n");
        let ing = read_book_snapshots(src(&text), p(), &IngestOptions::default()).unwrap();
        assert_eq!(ing.records.len(), 1);
        assert_eq!(ing.records[0].bid_volume, 3.0);
        assert_eq!(ing.warnings.len(), 1);
    }

    const META: &str = "client,stock,start_date,end_date,sign,volume\n";

    #[test]
    fn metaorders_merge_on_key() {
        let text = format!(
            "{META}c1,AAA,2020-01-02,2020-01-03,B,100\nc1,AAA,2020-01-02,2020-01-03,B,50\n"
        );
        let ing = read_metaorders(src(&text), p()).unwrap();
        assert_eq!(ing.records.len(), 1);
        assert_eq!(ing.records[0].volume, 150);
    }

    #[test]
    fn metaorders_opposite_signs_stay_distinct() {
        let text = format!(
            "{META}c1,AAA,2020-01-02,2020-01-03,B,100\nc1,AAA,2020-01-02,2020-01-03,S,50\n"
        );
        let ing = read_metaorders(src(&text), p()).unwrap();
        assert_eq!(ing.records.len(), 2);
    }

    #[test]
    fn metaorders_empty_and_invalid() {
        assert!(read_metaorders(src(""), p()).unwrap().records.is_empty());
        let text = format!(
            "{META}c1,AAA,2020-01-05,2020-01-03,B,100\nc1,AAA,2020-01-02,2020-01-03,X,50\n"
        );
        let ing = read_metaorders(src(&text), p()).unwrap();
        assert!(ing.records.is_empty());
        assert_eq!(ing.errors.len(), 2);
    }

    #[test]
    fn prices_rules() {
        let text = "stock,date,close\nA,2020-01-02,100\nA,2020-01-03,110\n";
        let ing = read_price_panel(src(text), p()).unwrap();
        let panel = &ing.records[0];
        assert!((panel.returns.get(0, 1).unwrap() - 0.1).abs() < 1e-12);

        let one = read_price_panel(src("stock,date,close\nA,2020-01-02,100\n"), p()).unwrap();
        assert_eq!(one.records[0].returns.present_count(), 0);
        assert!(one.errors.is_empty());

        let bad = read_price_panel(src("stock,date,close\nA,2020-01-02,0\n"), p()).unwrap();
        assert_eq!(bad.errors.len(), 1);
    }

    #[test]
    fn prices_optional_fundamentals() {
        let text = "stock,date,close,book_value,market_cap\nA,2020-01-02,100,50,1e9\nB,2020-01-02,10,,2e8\n";
        let ing = read_price_panel(src(text), p()).unwrap();
        let panel = &ing.records[0];
        let bv = panel.book_value.as_ref().unwrap();
        assert_eq!(bv.get(0, 0), Some(50.0));
        assert_eq!(bv.get(1, 0), None);
        assert_eq!(panel.market_cap.as_ref().unwrap().get(1, 0), Some(2e8));
    }
}
