//! Does the slowed signal still pay once its own flow moves prices?

use crowding::correlation::{profitability_estimate, CorrelationOptions, ProfitabilityReport};
use crowding::factors::{expected_flow, momentum_signal, slow_signal, Scale};
use crowding::imbalance::PanelOptions;
use crowding::synth::{simulate_panels, SynthConfig};

fn main() -> crowding::error::Result<()> {
    let r = ProfitabilityReport::new(0.001, 0.002);
    println!("gross 0.001, impact 0.002 -> net {:+.4}, crowded {}", r.net_indicator, r.crowded_flag);

    for impact in [0.0, 0.01, 0.03] {
        let cfg = SynthConfig {
            impact_coefficient: impact,
            ..SynthConfig::default()
        };
        let sim = simulate_panels(&cfg, &PanelOptions::default())?;
        let s = momentum_signal(&sim.prices, cfg.momentum_lookback, cfg.momentum_skip)?;
        let pi = slow_signal(&s, cfg.planted_d, Scale::Auto)?.pi;
        let (stocks, dates) = sim.imbalances.grid();
        let flow = expected_flow(&pi).reindex(&stocks, &dates);
        let returns = sim.prices.returns.reindex(&stocks, &dates);
        let r = profitability_estimate(&returns, &pi.reindex(&stocks, &dates), &flow, &CorrelationOptions::default())?;
        println!(
            "impact coefficient {impact:.2}: gross {:+.4} impact {:+.4} net {:+.4} crowded {}",
            r.gross, r.impact, r.net_indicator, r.crowded_flag
        );
    }
    Ok(())
}
