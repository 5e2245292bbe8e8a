//! Monte Carlo expectation of the correlations the planted crowd produces.
//! Pass the number of replicates as the first argument (default 100).

use crowding::synth::{oracle_expected_correlation, SynthConfig};

fn main() -> crowding::error::Result<()> {
    let n_mc = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(100);
    let cfg = SynthConfig {
        n_stocks: 50,
        n_days: 500,
        ..SynthConfig::default()
    };
    let r = oracle_expected_correlation(&cfg, n_mc)?;
    println!("{n_mc} replicates at D = {}", r.d);
    println!("  trade   {:+.4} ± {:.4}", r.expected_corr_trade, r.std_errors.trade);
    println!("  volume  {:+.4} ± {:.4}", r.expected_corr_volume, r.std_errors.volume);
    println!("  book    {:+.4} ± {:.4}", r.expected_corr_book, r.std_errors.book);
    println!("  meta    {:+.4} ± {:.4}", r.expected_corr_meta, r.std_errors.meta);
    println!("  return  {:+.4} ± {:.4}", r.expected_corr_return, r.std_errors.ret);
    Ok(())
}
