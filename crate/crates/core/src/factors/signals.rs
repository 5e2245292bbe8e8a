//! Raw cross-sectional factor scores.
//!
//! Each factor scores stocks per day and maps the scores to a demeaned
//! normalised rank: average ranks (0-based) divided by `n - 1`, minus the
//! cross-sectional mean, so every valid day sums to zero and spans at most
//! `[-0.5, 0.5]`.

use crate::error::{CrowdingError, Result};
use crate::market_data::PricePanel;
use crate::panel::Panel;

/// Average ranks (0-based) of the finite entries; `NaN` entries stay `NaN`.
pub fn average_ranks(scores: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..scores.len()).filter(|&i| scores[i].is_finite()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![f64::NAN; scores.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && scores[idx[end]] == scores[idx[start]] {
            end += 1;
        }
        let avg = (start + end - 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Demeaned normalised rank of one cross-section.
///
/// Fewer than two finite scores leaves the whole day missing.
pub fn cross_sectional_rank(scores: &[f64]) -> Vec<f64> {
    let n = scores.iter().filter(|s| s.is_finite()).count();
    if n < 2 {
        return vec![f64::NAN; scores.len()];
    }
    let mut out = average_ranks(scores);
    let denom = (n - 1) as f64;
    for v in out.iter_mut() {
        *v /= denom;
    }
    let mean = out.iter().filter(|v| !v.is_nan()).sum::<f64>() / n as f64;
    for v in out.iter_mut() {
        *v -= mean;
    }
    out
}

/// Cumulative return over `(t - lookback, t - skip]` from one stock's closes.
pub fn momentum_score(closes: &[f64], t: usize, lookback: usize, skip: usize) -> f64 {
    if t < lookback {
        return f64::NAN;
    }
    closes[t - skip] / closes[t - lookback] - 1.0
}

fn check_window(lookback: usize, skip: usize) -> Result<()> {
    if lookback <= skip {
        return Err(CrowdingError::InvalidParameter(format!(
            "momentum lookback ({lookback}) must exceed skip ({skip})"
        )));
    }
    Ok(())
}

fn rank_by_day(template: &Panel, score: impl Fn(usize, usize) -> f64) -> Panel {
    let (n, days) = (template.n_stocks(), template.n_dates());
    let mut values = vec![f64::NAN; n * days];
    let mut column = vec![f64::NAN; n];
    for t in 0..days {
        for (i, c) in column.iter_mut().enumerate() {
            *c = score(i, t);
        }
        for (i, s) in cross_sectional_rank(&column).into_iter().enumerate() {
            values[i * days + t] = s;
        }
    }
    template.with_values(values)
}

/// Ranks stocks by past cumulative return over `(t - lookback, t - skip]`.
pub fn momentum_signal(prices: &PricePanel, lookback: usize, skip: usize) -> Result<Panel> {
    check_window(lookback, skip)?;
    let close = &prices.close;
    Ok(rank_by_day(close, |i, t| momentum_score(close.row(i), t, lookback, skip)))
}

/// High book-to-market ranks long.
pub fn hml_signal(prices: &PricePanel) -> Result<Panel> {
    let book = prices.book_value.as_ref().ok_or_else(|| {
        CrowdingError::MissingInput("HML needs a book_value column in the price file".into())
    })?;
    let close = &prices.close;
    Ok(rank_by_day(close, |i, t| book.row(i)[t] / close.row(i)[t]))
}

/// Small capitalisation ranks long.
pub fn smb_signal(prices: &PricePanel) -> Result<Panel> {
    let cap = prices.market_cap.as_ref().ok_or_else(|| {
        CrowdingError::MissingInput("SMB needs a market_cap column in the price file".into())
    })?;
    Ok(rank_by_day(&prices.close, |i, t| -cap.row(i)[t]))
}
