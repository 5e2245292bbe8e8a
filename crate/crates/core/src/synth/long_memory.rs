//! Long-memory sign series: signs of fractional Gaussian noise.
//!
//! Fractional Gaussian noise with Hurst exponent `H` has autocorrelation
//! decaying like `ℓ^{2H-2}`; taking signs keeps the exponent, so a planted
//! `γ` uses `H = 1 - γ/2`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{CrowdingError, Result};
use crate::panel::{weekday_calendar, Panel, StockId};

fn fgn_autocovariance(k: usize, hurst: f64) -> f64 {
    let h2 = 2.0 * hurst;
    let k = k as f64;
    0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

/// Two independent unit-variance fGn paths of length `n` by circulant
/// embedding (Davies and Harte).
pub fn fractional_gaussian_noise<R: Rng + ?Sized>(n: usize, hurst: f64, rng: &mut R) -> Result<[Vec<f64>; 2]> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(CrowdingError::InvalidParameter(format!("Hurst exponent must lie in (0, 1), got {hurst}")));
    }
    if n < 2 {
        return Err(CrowdingError::InvalidParameter("series length must be at least 2".into()));
    }
    let m = 2 * n;
    let mut row: Vec<Complex<f64>> = (0..m)
        .map(|j| {
            let k = if j <= n { j } else { m - j };
            Complex::new(fgn_autocovariance(k, hurst), 0.0)
        })
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(m);
    fft.process(&mut row);
    let mut xi: Vec<Complex<f64>> = Vec::with_capacity(m);
    for lambda in row.iter().map(|c| c.re) {
        if lambda < -1e-8 * m as f64 {
            return Err(CrowdingError::InvalidParameter(format!(
                "circulant embedding failed for H = {hurst}"
            )));
        }
        let scale = (lambda.max(0.0) / m as f64).sqrt();
        let (a, b): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
        xi.push(Complex::new(scale * a, scale * b));
    }
    fft.process(&mut xi);
    Ok([
        xi[..n].iter().map(|c| c.re).collect(),
        xi[..n].iter().map(|c| c.im).collect(),
    ])
}

/// `±1` series whose autocorrelation decays like `ℓ^{-gamma}`, `0 < gamma < 1`.
pub fn long_memory_signs<R: Rng + ?Sized>(n: usize, gamma: f64, rng: &mut R) -> Result<[Vec<f64>; 2]> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(CrowdingError::InvalidParameter(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    let paths = fractional_gaussian_noise(n, 1.0 - gamma / 2.0, rng)?;
    Ok(paths.map(|p| p.into_iter().map(|x| if x > 0.0 { 1.0 } else { -1.0 }).collect()))
}

/// `n_series` independent sign series laid out as a panel, one per stock.
pub fn sign_series_panel(n_series: usize, n: usize, gamma: f64, seed: u64) -> Result<Panel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n_series * n);
    while values.len() < n_series * n {
        for path in long_memory_signs(n, gamma, &mut rng)? {
            if values.len() < n_series * n {
                values.extend(path);
            }
        }
    }
    let stocks: Arc<[StockId]> = (0..n_series).map(|i| StockId::new(&format!("L{i:03}"))).collect();
    let start = chrono::NaiveDate::from_ymd_opt(1900, 1, 1).expect("valid date");
    Panel::new(stocks, weekday_calendar(start, n).into(), values)
}
