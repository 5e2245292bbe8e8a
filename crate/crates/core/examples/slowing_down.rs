//! Exponential slowing of a factor signal: a one-month pulse turned into a
//! position and the flow needed to track it.

use std::sync::Arc;

use chrono::NaiveDate;
use crowding::factors::{expected_flow, slow_signal, Scale};
use crowding::panel::{weekday_calendar, Panel, StockId};

fn main() -> crowding::error::Result<()> {
    let n = 120;
    let d = 21.0;
    let s: Vec<f64> = (0..n).map(|t| if (10..31).contains(&t) { 1.0 } else { 0.0 }).collect();
    let stocks: Arc<[StockId]> = vec![StockId::new("ACME")].into();
    let dates = weekday_calendar(NaiveDate::from_ymd_opt(2014, 1, 1).unwrap(), n);
    let signal = Panel::new(stocks, dates.into(), s.clone())?;

    let pi = slow_signal(&signal, d, Scale::Fixed(1.0))?.pi;
    let flow = expected_flow(&pi);

    // The recursion against the direct exponential sum.
    let direct = |t: usize| (0..=t).map(|k| s[k] * (-((t - k) as f64) / d).exp()).sum::<f64>();
    let worst = (0..n).map(|t| (pi.row(0)[t] - direct(t)).abs()).fold(0.0, f64::max);
    println!("max |recursion - direct sum| = {worst:.2e}");

    println!("{:>4} {:>5} {:>8} {:>8}", "day", "s", "pi", "dpi");
    for t in (0..n).step_by(6) {
        println!("{t:>4} {:>5.1} {:>8.3} {:>+8.3}", s[t], pi.row(0)[t], flow.row(0)[t]);
    }
    Ok(())
}
