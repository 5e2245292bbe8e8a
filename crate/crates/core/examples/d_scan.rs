//! Recover the planted slowing timescale: scan the imbalance/flow
//! correlation over D on the default synthetic market.

use crowding::correlation::{d_scan, default_d_grid, BandOptions, CorrelationOptions};
use crowding::factors::{momentum_signal, Scale};
use crowding::imbalance::{Metric, PanelOptions};
use crowding::synth::{simulate_panels, SynthConfig};

fn main() -> crowding::error::Result<()> {
    let cfg = SynthConfig::default();
    let sim = simulate_panels(&cfg, &PanelOptions::default())?;
    let s = momentum_signal(&sim.prices, cfg.momentum_lookback, cfg.momentum_skip)?;
    let (stocks, dates) = sim.imbalances.grid();

    println!("planted D = {}", cfg.planted_d);
    for metric in [Metric::Trade, Metric::Book, Metric::Meta] {
        let x = sim.imbalances.metric_on(metric, &stocks, &dates);
        let scan = d_scan(
            &x,
            &s,
            &default_d_grid(),
            Scale::Auto,
            &CorrelationOptions::default(),
            Some(&BandOptions::default()),
        )?;
        println!("\n{metric}: argmax D = {:?}", scan.argmax_d);
        for (p, z) in scan.curve.points.iter().zip(scan.z_scores()) {
            println!(
                "  D {:>5} corr {:>+7.4} band {:.4} z {:>5.1}",
                p.index,
                p.value.unwrap_or(f64::NAN),
                p.band.unwrap_or(f64::NAN),
                z.unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
