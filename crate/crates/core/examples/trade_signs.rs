//! Aggressor signs from trade prices, then the three intraday imbalances of
//! a single stock-day.

use chrono::NaiveDate;
use crowding::imbalance::{book_imbalance, trade_imbalance, volume_imbalance};
use crowding::market_data::{classify_trade_sign, BookSnapshot, Timestamp};

fn main() -> crowding::error::Result<()> {
    let day = NaiveDate::from_ymd_opt(2013, 5, 2).unwrap();
    // (price, mid, volume)
    let tape = [
        (100.02, 100.00, 300),
        (99.98, 100.00, 100),
        (100.00, 100.00, 900),
        (100.03, 100.01, 200),
        (100.05, 100.02, 50),
    ];
    let mut sides = Vec::new();
    let mut volumes = Vec::new();
    for (price, mid, volume) in tape {
        let sign = classify_trade_sign(price, mid, 0.0)?;
        println!("price {price:>7.2} mid {mid:>7.2} -> {sign:?}");
        if let Some(side) = sign.side() {
            sides.push(side);
            volumes.push(volume);
        }
    }
    println!("I_trade  = {:+.3}", trade_imbalance(&sides).unwrap());
    println!("I_volume = {:+.3}", volume_imbalance(&sides, &volumes)?.unwrap());

    let snaps: Vec<BookSnapshot> = [(5200.0, 4100.0), (4800.0, 4900.0), (6100.0, 3900.0)]
        .into_iter()
        .enumerate()
        .map(|(k, (bid, ask))| BookSnapshot {
            stock: "ACME".into(),
            timestamp: Timestamp::new(day, 36_000_000 + 5_000 * k as u32),
            bid_volume: bid,
            ask_volume: ask,
        })
        .collect();
    println!("I_book   = {:+.3}", book_imbalance(&snaps).unwrap());
    Ok(())
}
