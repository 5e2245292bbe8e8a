//! A crowd that executes with limit orders: trade imbalance turns negative
//! while book and metaorder imbalances stay positive.

use crowding::correlation::{panel_correlation, reshuffled_correlations, BandOptions, CorrelationOptions};
use crowding::factors::{expected_flow, momentum_signal, slow_signal, Scale};
use crowding::imbalance::{Metric, PanelOptions};
use crowding::synth::{simulate_panels, ExecutionStyle, SynthConfig};

fn main() -> crowding::error::Result<()> {
    let opts = CorrelationOptions::default();
    let band = BandOptions::default();
    for style in [ExecutionStyle::Aggressive, ExecutionStyle::Passive] {
        let cfg = SynthConfig {
            execution_style: style,
            ..SynthConfig::default()
        };
        let sim = simulate_panels(&cfg, &PanelOptions::default())?;
        let s = momentum_signal(&sim.prices, cfg.momentum_lookback, cfg.momentum_skip)?;
        let pi = slow_signal(&s, cfg.planted_d, Scale::Auto)?.pi;
        let (stocks, dates) = sim.imbalances.grid();
        let flow = expected_flow(&pi).reindex(&stocks, &dates);
        println!("{style:?}");
        for m in [Metric::Trade, Metric::Book, Metric::Meta] {
            let x = sim.imbalances.metric_on(m, &stocks, &dates);
            let c = panel_correlation(&x, &flow, &opts)?.unwrap_or(f64::NAN);
            let null = reshuffled_correlations(&x, &flow, 0, 0..dates.len(), &opts, &band)?;
            let v: Vec<f64> = null.into_iter().flatten().collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt();
            println!("  {m:<8} corr {c:+.3}  band {sd:.3}");
        }
    }
    Ok(())
}
