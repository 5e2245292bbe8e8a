use serde::{Deserialize, Serialize};

use super::CorrelationCurve;
use crate::error::{CrowdingError, Result};

/// Residual summary of the log-log line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitGoodness {
    pub r_squared: f64,
    /// Root-mean-square residual in natural-log units.
    pub rms_residual: f64,
    pub n_points: usize,
    /// The points are visibly not on a straight log-log line.
    pub poor: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub gamma: f64,
    pub amplitude: f64,
    pub fit_range: [f64; 2],
    pub goodness: FitGoodness,
}

const MIN_POINTS: usize = 5;
const MIN_R_SQUARED: f64 = 0.9;
const MAX_RMS_RESIDUAL: f64 = 0.5;

/// Least-squares line through `(ln lag, ln acf)` for lags in `fit_range`,
/// dropping points with a non-positive or missing value. `gamma` is minus the
/// slope.
pub fn fit_power_law(acf: &CorrelationCurve, fit_range: [f64; 2]) -> Result<PowerLawFit> {
    let [lo, hi] = fit_range;
    if !(lo > 0.0 && hi >= lo) {
        return Err(CrowdingError::InvalidParameter(format!(
            "fit range must satisfy 0 < lo <= hi, got [{lo}, {hi}]"
        )));
    }
    let pts: Vec<(f64, f64)> = acf
        .points
        .iter()
        .filter(|p| p.index >= lo && p.index <= hi)
        .filter_map(|p| p.value.filter(|v| *v > 0.0).map(|v| (p.index.ln(), v.ln())))
        .collect();
    if pts.len() < MIN_POINTS {
        return Err(CrowdingError::FitFailure {
            needed: MIN_POINTS,
            found: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let rms_residual = (ss_res / n).sqrt();
    Ok(PowerLawFit {
        gamma: -slope,
        amplitude: intercept.exp(),
        fit_range,
        goodness: FitGoodness {
            r_squared,
            rms_residual,
            n_points: pts.len(),
            poor: r_squared < MIN_R_SQUARED || rms_residual > MAX_RMS_RESIDUAL,
        },
    })
}
