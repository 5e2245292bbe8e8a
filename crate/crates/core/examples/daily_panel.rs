//! Generate a small synthetic market, write it as CSV, ingest it back and
//! build the daily imbalance panel.

use crowding::imbalance::{build_daily_panel, Metric, PanelOptions};
use crowding::market_data::{ingest_book_snapshots, ingest_metaorders, ingest_trades, IngestOptions};
use crowding::synth::{generate_market, SynthConfig, BOOK_FILE, METAORDERS_FILE, TRADES_FILE};

fn main() -> crowding::error::Result<()> {
    let cfg = SynthConfig {
        n_stocks: 5,
        n_days: 20,
        warmup_days: 0,
        momentum_lookback: 10,
        momentum_skip: 2,
        planted_d: 5.0,
        ..SynthConfig::default()
    };
    let dir = std::env::temp_dir().join("crowding-daily-panel");
    generate_market(&cfg)?.write(&dir)?;

    let opts = IngestOptions::default();
    let trades = ingest_trades(dir.join(TRADES_FILE), &opts)?;
    let book = ingest_book_snapshots(dir.join(BOOK_FILE), &opts)?;
    let metas = ingest_metaorders(dir.join(METAORDERS_FILE))?;
    println!(
        "ingested {} trades, {} snapshots, {} metaorders ({} rejected rows)",
        trades.records.len(),
        book.records.len(),
        metas.records.len(),
        trades.errors.len() + book.errors.len() + metas.errors.len()
    );

    let panel = build_daily_panel(&trades.records, &book.records, &metas.records, &PanelOptions::default())?;
    println!("{:<6} {:<10} {:>8} {:>8} {:>8} {:>8}", "stock", "date", "trade", "volume", "book", "meta");
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:+.3}"));
    for row in panel.rows().iter().take(8) {
        println!(
            "{:<6} {:<10} {:>8} {:>8} {:>8} {:>8}",
            row.stock.as_str(),
            row.date,
            fmt(row.get(Metric::Trade)),
            fmt(row.get(Metric::Volume)),
            fmt(row.get(Metric::Book)),
            fmt(row.get(Metric::Meta)),
        );
    }
    let path = dir.join("panel.csv");
    panel.write_csv(&path)?;
    println!("{} rows written to {}", panel.len(), path.display());
    Ok(())
}
