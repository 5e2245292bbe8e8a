use serde::{Deserialize, Serialize};

use super::{panel_correlation, CorrelationOptions};
use crate::error::{CrowdingError, Result};
use crate::panel::Panel;

/// Whether following the factor still pays once half the impact it causes is
/// charged as trading cost.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfitabilityReport {
    /// `corr(returns, pi)`: how well the position anticipates returns.
    pub gross: f64,
    /// `corr(returns, delta_pi)`: the price move that comes with the trades.
    pub impact: f64,
    pub net_indicator: f64,
    pub crowded_flag: bool,
}

impl ProfitabilityReport {
    pub fn new(gross: f64, impact: f64) -> Self {
        let net_indicator = gross - impact / 2.0;
        ProfitabilityReport {
            gross,
            impact,
            net_indicator,
            crowded_flag: net_indicator <= 0.0,
        }
    }
}

pub fn profitability_estimate(
    returns: &Panel,
    pi: &Panel,
    delta_pi: &Panel,
    opts: &CorrelationOptions,
) -> Result<ProfitabilityReport> {
    let undefined = |what: &str| CrowdingError::MissingInput(format!("correlation of returns with {what} is undefined"));
    let gross = panel_correlation(returns, pi, opts)?.ok_or_else(|| undefined("pi"))?;
    let impact = panel_correlation(returns, delta_pi, opts)?.ok_or_else(|| undefined("delta_pi"))?;
    Ok(ProfitabilityReport::new(gross, impact))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::tests::noise_panel;

    #[test]
    fn half_impact_cancels_gross() {
        let r = ProfitabilityReport::new(0.001, 0.002);
        assert_eq!(r.net_indicator, 0.0);
        assert!(r.crowded_flag);
    }

    #[test]
    fn no_impact_keeps_gross() {
        let r = ProfitabilityReport::new(0.003, 0.0);
        assert_eq!(r.net_indicator, 0.003);
        assert!(!r.crowded_flag);
    }

    #[test]
    fn estimate_from_panels() {
        let ret = noise_panel(5, 100, 1);
        let pi = ret.clone();
        let dp = ret.map(|v| -v);
        let r = profitability_estimate(&ret, &pi, &dp, &CorrelationOptions::default()).unwrap();
        assert!((r.gross - 1.0).abs() < 1e-12);
        assert!((r.net_indicator - 1.5).abs() < 1e-12);
        let short = noise_panel(5, 10, 1);
        assert!(profitability_estimate(&short, &short, &short, &CorrelationOptions::default()).is_err());
    }
}
