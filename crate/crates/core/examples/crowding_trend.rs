//! A crowd that grows year after year, and the yearly correlation that
//! tracks it.

use chrono::NaiveDate;
use crowding::correlation::{default_d_grid, spearman, yearly_evolution, BandOptions, CorrelationOptions};
use crowding::factors::{momentum_signal, Scale};
use crowding::imbalance::{Metric, PanelOptions};
use crowding::synth::{simulate_panels, Ramp, SynthConfig};

fn main() -> crowding::error::Result<()> {
    let cfg = SynthConfig {
        // Six full calendar years of weekdays.
        n_days: 1565,
        start_date: NaiveDate::from_ymd_opt(2011, 1, 3).unwrap(),
        ramp: Some(Ramp { from: 0.01, to: 0.05 }),
        ..SynthConfig::default()
    };
    let sim = simulate_panels(&cfg, &PanelOptions::default())?;
    let s = momentum_signal(&sim.prices, cfg.momentum_lookback, cfg.momentum_skip)?;
    let (stocks, dates) = sim.imbalances.grid();
    let x = sim.imbalances.metric_on(Metric::Trade, &stocks, &dates);
    let evo = yearly_evolution(
        &x,
        &s,
        &default_d_grid(),
        [42.0, 84.0],
        Scale::Auto,
        &CorrelationOptions::default(),
        Some(&BandOptions::default()),
    )?;
    for p in &evo.points {
        println!(
            "{}  corr {:+.3}  band {:.3}  D {:?}",
            p.year,
            p.value.unwrap_or(f64::NAN),
            p.band.unwrap_or(f64::NAN),
            p.d_at_max
        );
    }
    let years: Vec<f64> = evo.years().iter().map(|y| *y as f64).collect();
    let values: Vec<f64> = evo.values().iter().map(|v| v.unwrap_or(f64::NAN)).collect();
    println!("rank correlation with time: {:.2}", spearman(&years, &values).unwrap_or(f64::NAN));
    Ok(())
}
