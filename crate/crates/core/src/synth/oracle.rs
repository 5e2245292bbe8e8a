use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mix64, simulate_panels, SynthConfig};
use crate::correlation::{panel_correlation, Averaging, CorrelationOptions};
use crate::error::{CrowdingError, Result};
use crate::factors::{expected_flow, momentum_signal, slow_signal, Scale};
use crate::imbalance::{Metric, PanelOptions};

/// Monte Carlo expectation of the imbalance/flow correlations at the planted
/// timescale. Undefined correlations come out as `NaN`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub n_mc: usize,
    pub d: f64,
    pub expected_corr_trade: f64,
    pub expected_corr_volume: f64,
    pub expected_corr_book: f64,
    pub expected_corr_meta: f64,
    /// Returns against expected flow: the price impact of the crowd.
    pub expected_corr_return: f64,
    /// Largest of the standard errors below.
    pub mc_std_error: f64,
    pub std_errors: OracleErrors,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleErrors {
    pub trade: f64,
    pub volume: f64,
    pub book: f64,
    pub meta: f64,
    pub ret: f64,
}

/// Seed of Monte Carlo replicate `k`, distinct from the base seed.
pub fn replicate_seed(seed: u64, k: usize) -> u64 {
    mix64(seed ^ mix64(0x5EED_0000 + k as u64))
}

fn mean_se(xs: &[Option<f64>]) -> (f64, f64) {
    let v: Vec<f64> = xs.iter().flatten().copied().collect();
    if v.len() < 2 {
        return (v.first().copied().unwrap_or(f64::NAN), f64::NAN);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// One replicate through the same steps as the command-line pipeline: daily
/// panel, momentum signal from prices, slowing at the planted `D`, then the
/// averaged correlations.
fn replicate(cfg: &SynthConfig, opts: &CorrelationOptions) -> Result<[Option<f64>; 5]> {
    let sim = simulate_panels(cfg, &PanelOptions::default())?;
    let weighted;
    let opts = if opts.averaging == Averaging::Liquidity && opts.weights.is_none() {
        weighted = opts.clone().with_weights(Arc::new(sim.imbalances.mean_daily_trades()));
        &weighted
    } else {
        opts
    };
    let s = momentum_signal(&sim.prices, cfg.momentum_lookback, cfg.momentum_skip)?;
    let pi = slow_signal(&s, cfg.planted_d, Scale::Auto)?.pi;
    let (stocks, dates) = sim.imbalances.grid();
    let flow = expected_flow(&pi).reindex(&stocks, &dates);
    let corr = |m: Metric| panel_correlation(&sim.imbalances.metric_on(m, &stocks, &dates), &flow, opts);
    let returns = sim.prices.returns.reindex(&stocks, &dates);
    Ok([
        corr(Metric::Trade)?,
        corr(Metric::Volume)?,
        corr(Metric::Book)?,
        corr(Metric::Meta)?,
        panel_correlation(&returns, &flow, opts)?,
    ])
}

pub fn oracle_expected_correlation(cfg: &SynthConfig, n_mc: usize) -> Result<OracleReport> {
    oracle_with_options(cfg, n_mc, &CorrelationOptions::default())
}

/// Regenerates `n_mc` markets from seeds derived from `cfg.seed` and averages
/// their correlations.
pub fn oracle_with_options(cfg: &SynthConfig, n_mc: usize, opts: &CorrelationOptions) -> Result<OracleReport> {
    if n_mc < 100 {
        return Err(CrowdingError::InvalidParameter(format!(
            "oracle needs at least 100 replicates, got {n_mc}"
        )));
    }
    cfg.validate()?;
    let reps = (0..n_mc)
        .into_par_iter()
        .map(|k| {
            let c = SynthConfig {
                seed: replicate_seed(cfg.seed, k),
                ..*cfg
            };
            replicate(&c, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let column = |j: usize| mean_se(&reps.iter().map(|r| r[j]).collect::<Vec<_>>());
    let (trade, se_trade) = column(0);
    let (volume, se_volume) = column(1);
    let (book, se_book) = column(2);
    let (meta, se_meta) = column(3);
    let (ret, se_ret) = column(4);
    let std_errors = OracleErrors {
        trade: se_trade,
        volume: se_volume,
        book: se_book,
        meta: se_meta,
        ret: se_ret,
    };
    let mc_std_error = [se_trade, se_volume, se_book, se_meta, se_ret]
        .into_iter()
        .filter(|x| x.is_finite())
        .fold(0.0, f64::max);
    Ok(OracleReport {
        n_mc,
        d: cfg.planted_d,
        expected_corr_trade: trade,
        expected_corr_volume: volume,
        expected_corr_book: book,
        expected_corr_meta: meta,
        expected_corr_return: ret,
        mc_std_error,
        std_errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::ExecutionStyle;

    fn small(f: f64, style: ExecutionStyle) -> SynthConfig {
        SynthConfig {
            n_stocks: 10,
            n_days: 120,
            warmup_days: 60,
            trades_per_day: 20,
            snapshots_per_day: 4,
            momentum_lookback: 40,
            momentum_skip: 5,
            planted_d: 10.0,
            crowding_fraction: f,
            execution_style: style,
            seed: 11,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn needs_enough_replicates() {
        assert!(oracle_expected_correlation(&small(0.1, ExecutionStyle::Aggressive), 10).is_err());
    }

    #[test]
    fn replicate_seeds_differ() {
        let seeds: std::collections::BTreeSet<u64> = (0..1000).map(|k| replicate_seed(7, k)).collect();
        assert_eq!(seeds.len(), 1000);
        assert!(!seeds.contains(&7));
    }

    #[test]
    fn zero_crowding_centres_on_zero() {
        let r = oracle_expected_correlation(&small(0.0, ExecutionStyle::Aggressive), 100).unwrap();
        assert!(r.mc_std_error > 0.0);
        // Three standard errors keeps the false-alarm rate near 0.3% per metric.
        for (v, se) in [(r.expected_corr_trade, r.std_errors.trade), (r.expected_corr_book, r.std_errors.book)] {
            assert!(v.abs() < 3.0 * se, "{v} vs {se}");
        }
    }

    #[test]
    fn style_flips_trade_sign() {
        let a = oracle_expected_correlation(&small(0.1, ExecutionStyle::Aggressive), 100).unwrap();
        let p = oracle_expected_correlation(&small(0.1, ExecutionStyle::Passive), 100).unwrap();
        assert!(a.expected_corr_trade > 0.0);
        assert!(p.expected_corr_trade < 0.0);
        assert!(p.expected_corr_book > 0.0);
        assert!(a.expected_corr_meta > 0.0 && p.expected_corr_meta > 0.0);
    }

    #[test]
    fn small_fraction_is_linear() {
        let one = oracle_expected_correlation(&small(0.02, ExecutionStyle::Aggressive), 100).unwrap();
        let two = oracle_expected_correlation(&small(0.04, ExecutionStyle::Aggressive), 100).unwrap();
        let se = (4.0 * one.std_errors.trade.powi(2) + two.std_errors.trade.powi(2)).sqrt();
        assert!(
            (two.expected_corr_trade - 2.0 * one.expected_corr_trade).abs() < 2.0 * se,
            "{} vs 2 x {} (se {se})",
            two.expected_corr_trade,
            one.expected_corr_trade
        );
    }
}
