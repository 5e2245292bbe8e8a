//! Long-memory sign series and a power-law fit of their autocorrelation.

use crowding::correlation::{autocorrelation, fit_power_law, CorrelationOptions};
use crowding::synth::sign_series_panel;

fn main() -> crowding::error::Result<()> {
    for gamma in [0.3, 0.5, 0.8] {
        let signs = sign_series_panel(4, 1 << 18, gamma, 7)?;
        let acf = autocorrelation(&signs, 100, &CorrelationOptions::default())?;
        let fit = fit_power_law(&acf, [2.0, 100.0])?;
        println!(
            "planted gamma {gamma:.2}: fitted {:.3} (amplitude {:.3}, R^2 {:.3})",
            fit.gamma, fit.amplitude, fit.goodness.r_squared
        );
        for lag in [1.0, 10.0, 100.0] {
            println!("    C({lag:>3}) = {:.4}", acf.at(lag).and_then(|p| p.value).unwrap_or(f64::NAN));
        }
    }
    Ok(())
}
