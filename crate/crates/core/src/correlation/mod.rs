//! Statistics over (stock, day) panels: averaged Pearson correlations, lagged
//! and auto-correlation curves, power-law fits, block-reshuffle significance
//! bands, the slowing-timescale scan and its yearly evolution.

mod power_law;
mod profit;
mod reshuffle;
mod scan;

use std::collections::BTreeMap;
use std::ops::{Range, RangeInclusive};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{CrowdingError, Result};
use crate::factors::average_ranks;
use crate::panel::{Panel, StockId};

pub use power_law::{fit_power_law, FitGoodness, PowerLawFit};
pub use profit::{profitability_estimate, ProfitabilityReport};
pub use reshuffle::{block_permutation, block_reshuffle_band, reshuffled_correlations, BandOptions};
pub use scan::{d_scan, default_d_grid, yearly_evolution, DScan, YearPoint, YearlyEvolution};

/// How per-stock correlations are combined into one number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    /// Unweighted mean of per-stock correlations.
    #[default]
    Equal,
    /// Mean of per-stock correlations weighted by
    /// [`CorrelationOptions::weights`], typically a liquidity measure.
    Liquidity,
    /// One correlation over all qualifying (stock, day) pairs, each stock
    /// centred on its own means.
    Pooled,
}

impl FromStr for Averaging {
    type Err = CrowdingError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "equal" => Ok(Averaging::Equal),
            "liquidity" => Ok(Averaging::Liquidity),
            "pooled" => Ok(Averaging::Pooled),
            _ => Err(CrowdingError::InvalidParameter(format!(
                "averaging must be equal, liquidity or pooled, got {s:?}"
            ))),
        }
    }
}

/// Per-stock weights; stocks absent from the map get weight 0.
pub type StockWeights = Arc<BTreeMap<StockId, f64>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrelationOptions {
    /// Minimum paired days for a stock to contribute.
    pub min_obs: usize,
    pub averaging: Averaging,
    /// Required by [`Averaging::Liquidity`], ignored otherwise.
    #[serde(skip)]
    pub weights: Option<StockWeights>,
}

impl Default for CorrelationOptions {
    fn default() -> Self {
        CorrelationOptions {
            min_obs: 60,
            averaging: Averaging::Equal,
            weights: None,
        }
    }
}

impl CorrelationOptions {
    pub fn with_weights(self, weights: StockWeights) -> Self {
        CorrelationOptions {
            weights: Some(weights),
            ..self
        }
    }
}

/// Weights lined up with `stocks`, or `None` when the averaging ignores them.
pub(crate) fn resolve_weights(opts: &CorrelationOptions, stocks: &[StockId]) -> Result<Option<Vec<f64>>> {
    if opts.averaging != Averaging::Liquidity {
        return Ok(None);
    }
    let w = opts.weights.as_ref().ok_or_else(|| {
        CrowdingError::InvalidParameter("liquidity averaging needs per-stock weights".into())
    })?;
    stocks
        .iter()
        .map(|s| {
            let v = w.get(s).copied().unwrap_or(0.0);
            if v >= 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(CrowdingError::InvalidParameter(format!("weight of {s} must be non-negative, got {v}")))
            }
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// An averaged correlation and how much data went into it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrStat {
    pub value: f64,
    /// Paired observations summed over qualifying stocks.
    pub n_obs: usize,
    pub n_stocks: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Lag in days, or slowing timescale in trading days.
    pub index: f64,
    pub value: Option<f64>,
    /// One standard deviation of the reshuffled null.
    pub band: Option<f64>,
    pub n_obs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct CorrelationCurve {
    pub points: Vec<CurvePoint>,
}

impl CorrelationCurve {
    pub fn at(&self, index: f64) -> Option<&CurvePoint> {
        self.points.iter().find(|p| p.index == index)
    }

    pub fn values(&self) -> Vec<Option<f64>> {
        self.points.iter().map(|p| p.value).collect()
    }
}

/// Centred moments of one stock's paired sample.
#[derive(Clone, Copy, Debug)]
struct Moments {
    n: usize,
    mx: f64,
    my: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
}

impl Moments {
    fn corr(&self) -> f64 {
        (self.sxy / (self.sxx * self.syy).sqrt()).clamp(-1.0, 1.0)
    }

    fn merge(a: Moments, b: Moments) -> Moments {
        let n = a.n + b.n;
        let (na, nb, nn) = (a.n as f64, b.n as f64, n as f64);
        let (dx, dy) = (b.mx - a.mx, b.my - a.my);
        Moments {
            n,
            mx: a.mx + dx * nb / nn,
            my: a.my + dy * nb / nn,
            sxx: a.sxx + b.sxx + dx * dx * na * nb / nn,
            syy: a.syy + b.syy + dy * dy * na * nb / nn,
            sxy: a.sxy + b.sxy + dx * dy * na * nb / nn,
        }
    }
}

/// Pairs `(x[t], y[t + lag])` for `t` in `days` with `t + lag` on the grid.
fn moments(x: &[f64], y: &[f64], days: &Range<usize>, lag: i64) -> Option<Moments> {
    let n_days = x.len() as i64;
    let lo = (days.start as i64).max(-lag).max(0);
    let hi = (days.end as i64).min(n_days - lag).min(n_days);
    if lo >= hi {
        return None;
    }
    let pairs = || {
        (lo..hi).filter_map(move |t| {
            let (a, b) = (x[t as usize], y[(t + lag) as usize]);
            (!a.is_nan() && !b.is_nan()).then_some((a, b))
        })
    };
    let (mut n, mut sx, mut sy) = (0usize, 0.0, 0.0);
    for (a, b) in pairs() {
        n += 1;
        sx += a;
        sy += b;
    }
    if n == 0 {
        return None;
    }
    let (mx, my) = (sx / n as f64, sy / n as f64);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in pairs() {
        let (da, db) = (a - mx, b - my);
        sxx += da * da;
        syy += db * db;
        sxy += da * db;
    }
    Some(Moments { n, mx, my, sxx, syy, sxy })
}

/// The kernel behind every correlation in this module. `x` and `y` are
/// stock-major value slices sharing `n_days` columns; `weights` comes from
/// [`resolve_weights`].
pub(crate) fn correlate_values(
    x: &[f64],
    y: &[f64],
    n_days: usize,
    days: Range<usize>,
    lag: i64,
    opts: &CorrelationOptions,
    weights: Option<&[f64]>,
) -> Option<CorrStat> {
    if n_days == 0 {
        return None;
    }
    let mut stocks = 0usize;
    let mut n_obs = 0usize;
    let (mut sum, mut weight) = (0.0, 0.0);
    let mut pooled: Option<Moments> = None;
    for (i, (xr, yr)) in x.chunks_exact(n_days).zip(y.chunks_exact(n_days)).enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        if w == 0.0 {
            continue;
        }
        let Some(m) = moments(xr, yr, &days, lag) else {
            continue;
        };
        if m.n < opts.min_obs.max(2) || !(m.sxx > 0.0) || !(m.syy > 0.0) {
            continue;
        }
        stocks += 1;
        n_obs += m.n;
        match opts.averaging {
            Averaging::Equal => {
                sum += m.corr();
                weight += 1.0;
            }
            Averaging::Liquidity => {
                sum += w * m.corr();
                weight += w;
            }
            Averaging::Pooled => {
                // Each stock keeps its own centring; only the centred sums pool.
                let m = Moments { mx: 0.0, my: 0.0, ..m };
                pooled = Some(match pooled {
                    None => m,
                    Some(p) => Moments::merge(p, m),
                });
            }
        }
    }
    if stocks == 0 {
        return None;
    }
    let value = match opts.averaging {
        Averaging::Pooled => pooled.expect("at least one stock").corr(),
        _ => (sum / weight).clamp(-1.0, 1.0),
    };
    Some(CorrStat {
        value,
        n_obs,
        n_stocks: stocks,
    })
}

fn check_grid(x: &Panel, y: &Panel) -> Result<()> {
    if !x.same_grid(y) {
        return Err(CrowdingError::GridMismatch);
    }
    Ok(())
}

/// Averaged correlation with its observation counts; `None` when no stock
/// has `min_obs` paired days with non-zero variance on both sides.
pub fn panel_correlation_stats(x: &Panel, y: &Panel, opts: &CorrelationOptions) -> Result<Option<CorrStat>> {
    check_grid(x, y)?;
    let n = x.n_dates();
    let w = resolve_weights(opts, x.stocks())?;
    Ok(correlate_values(x.values(), y.values(), n, 0..n, 0, opts, w.as_deref()))
}

pub fn panel_correlation(x: &Panel, y: &Panel, opts: &CorrelationOptions) -> Result<Option<f64>> {
    Ok(panel_correlation_stats(x, y, opts)?.map(|s| s.value))
}

/// `x` at day `t` against `y` at day `t + lag`, for every lag in `lags`.
pub fn lagged_correlation(
    x: &Panel,
    y: &Panel,
    lags: RangeInclusive<i64>,
    opts: &CorrelationOptions,
) -> Result<CorrelationCurve> {
    check_grid(x, y)?;
    let n = x.n_dates();
    let w = resolve_weights(opts, x.stocks())?;
    let points = lags
        .map(|lag| {
            let stat = correlate_values(x.values(), y.values(), n, 0..n, lag, opts, w.as_deref());
            CurvePoint {
                index: lag as f64,
                value: stat.map(|s| s.value),
                band: None,
                n_obs: stat.map_or(0, |s| s.n_obs),
            }
        })
        .collect();
    Ok(CorrelationCurve { points })
}

/// [`lagged_correlation`] with a reshuffle band at every lag.
pub fn lagged_correlation_with_band(
    x: &Panel,
    y: &Panel,
    lags: RangeInclusive<i64>,
    opts: &CorrelationOptions,
    band: &BandOptions,
) -> Result<CorrelationCurve> {
    let mut curve = lagged_correlation(x, y, lags, opts)?;
    let n = x.n_dates();
    for p in curve.points.iter_mut() {
        let samples = reshuffled_correlations(x, y, p.index as i64, 0..n, opts, band)?;
        p.band = reshuffle::sample_std(&samples);
    }
    Ok(curve)
}

/// Autocorrelation for lags `0..=max_lag`; lag 0 is 1 wherever defined.
pub fn autocorrelation(x: &Panel, max_lag: usize, opts: &CorrelationOptions) -> Result<CorrelationCurve> {
    if max_lag < 1 {
        return Err(CrowdingError::InvalidParameter("max_lag must be at least 1".into()));
    }
    lagged_correlation(x, x, 0..=max_lag as i64, opts)
}

/// Plain Pearson correlation of two equally long series, ignoring pairs with
/// a missing side.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() {
        return None;
    }
    let m = moments(x, y, &(0..x.len()), 0)?;
    (m.n >= 2 && m.sxx > 0.0 && m.syy > 0.0).then(|| m.corr())
}

/// Spearman rank correlation over pairs where both sides are present.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() {
        return None;
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .map(|(a, b)| (*a, *b))
        .unzip();
    pearson(&average_ranks(&xs), &average_ranks(&ys))
}
