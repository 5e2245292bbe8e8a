use std::ops::Range;

use chrono::Datelike;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::reshuffle::sample_std;
use super::{correlate_values, resolve_weights, reshuffled_correlations, BandOptions, CorrelationCurve, CorrelationOptions, CurvePoint};
use crate::error::{CrowdingError, Result};
use crate::factors::{expected_flow, slow_signal, Scale};
use crate::panel::Panel;

/// One to twelve months of trading days.
pub fn default_d_grid() -> Vec<f64> {
    vec![5.0, 10.0, 21.0, 42.0, 63.0, 84.0, 126.0, 189.0, 252.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DScan {
    /// Correlation of the imbalance with the expected flow, indexed by D.
    pub curve: CorrelationCurve,
    pub argmax_d: Option<f64>,
    /// Signed correlation at `argmax_d`.
    pub max_corr: Option<f64>,
    pub max_abs_corr: Option<f64>,
}

impl DScan {
    /// `|corr| / band` at every grid point where both exist.
    pub fn z_scores(&self) -> Vec<Option<f64>> {
        self.curve
            .points
            .iter()
            .map(|p| match (p.value, p.band) {
                (Some(v), Some(b)) if b > 0.0 => Some(v.abs() / b),
                _ => None,
            })
            .collect()
    }
}

/// Expected flow for slowing timescale `d`, placed on `grid`'s stocks and dates.
fn flow_on(raw_signal: &Panel, grid: &Panel, d: f64, scale: Scale) -> Result<Panel> {
    let pi = slow_signal(raw_signal, d, scale)?.pi;
    Ok(expected_flow(&pi).reindex(grid.stocks(), grid.dates()))
}

fn check_d_grid(d_grid: &[f64]) -> Result<()> {
    if d_grid.is_empty() {
        return Err(CrowdingError::InvalidParameter("D grid is empty".into()));
    }
    if let Some(d) = d_grid.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
        return Err(CrowdingError::InvalidParameter(format!("D grid entry {d} is not positive")));
    }
    Ok(())
}

fn argmax_abs(points: &[CurvePoint]) -> Option<&CurvePoint> {
    points
        .iter()
        .filter(|p| p.value.is_some())
        .fold(None, |best: Option<&CurvePoint>, p| match best {
            Some(b) if b.value.unwrap().abs() >= p.value.unwrap().abs() => Some(b),
            _ => Some(p),
        })
}

/// Correlates the imbalance panel with the expected flow of the raw signal
/// slowed at each `D`. The slowing runs over the signal's full history, so a
/// signal panel reaching further back than the imbalances warms up the
/// positions. With `band` set, each point gets the reshuffle band obtained by
/// permuting imbalance blocks.
pub fn d_scan(
    imbalance: &Panel,
    raw_signal: &Panel,
    d_grid: &[f64],
    scale: Scale,
    opts: &CorrelationOptions,
    band: Option<&BandOptions>,
) -> Result<DScan> {
    check_d_grid(d_grid)?;
    let n = imbalance.n_dates();
    let w = resolve_weights(opts, imbalance.stocks())?;
    let points = d_grid
        .par_iter()
        .map(|&d| -> Result<CurvePoint> {
            let flow = flow_on(raw_signal, imbalance, d, scale)?;
            let stat = correlate_values(imbalance.values(), flow.values(), n, 0..n, 0, opts, w.as_deref());
            let band = match band {
                Some(b) => sample_std(&reshuffled_correlations(imbalance, &flow, 0, 0..n, opts, b)?),
                None => None,
            };
            Ok(CurvePoint {
                index: d,
                value: stat.map(|s| s.value),
                band,
                n_obs: stat.map_or(0, |s| s.n_obs),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = argmax_abs(&points).copied();
    Ok(DScan {
        curve: CorrelationCurve { points },
        argmax_d: best.map(|p| p.index),
        max_corr: best.and_then(|p| p.value),
        max_abs_corr: best.and_then(|p| p.value).map(f64::abs),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct YearPoint {
    pub year: i32,
    /// Correlation of largest magnitude over the D window, sign kept.
    pub value: Option<f64>,
    pub d_at_max: Option<f64>,
    pub band: Option<f64>,
    pub n_obs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YearlyEvolution {
    pub d_window: [f64; 2],
    pub d_used: Vec<f64>,
    pub points: Vec<YearPoint>,
}

impl YearlyEvolution {
    pub fn years(&self) -> Vec<i32> {
        self.points.iter().map(|p| p.year).collect()
    }

    pub fn values(&self) -> Vec<Option<f64>> {
        self.points.iter().map(|p| p.value).collect()
    }
}

/// Contiguous day ranges of each calendar year on a sorted date axis.
fn year_ranges(panel: &Panel) -> Vec<(i32, Range<usize>)> {
    let mut out: Vec<(i32, Range<usize>)> = Vec::new();
    for (t, d) in panel.dates().iter().enumerate() {
        match out.last_mut() {
            Some((y, r)) if *y == d.year() => r.end = t + 1,
            _ => out.push((d.year(), t..t + 1)),
        }
    }
    out
}

/// Per calendar year, the strongest imbalance/flow correlation over the part
/// of `d_grid` inside `d_window`. Positions use the full signal history; only
/// the correlation days are restricted to the year. A year's band comes from
/// full-sample block reshuffles evaluated on that year's days.
pub fn yearly_evolution(
    imbalance: &Panel,
    raw_signal: &Panel,
    d_grid: &[f64],
    d_window: [f64; 2],
    scale: Scale,
    opts: &CorrelationOptions,
    band: Option<&BandOptions>,
) -> Result<YearlyEvolution> {
    check_d_grid(d_grid)?;
    let d_used: Vec<f64> = d_grid
        .iter()
        .copied()
        .filter(|d| *d >= d_window[0] && *d <= d_window[1])
        .collect();
    if d_used.is_empty() {
        return Err(CrowdingError::InvalidParameter(format!(
            "no grid point inside D window [{}, {}]",
            d_window[0], d_window[1]
        )));
    }
    let flows = d_used
        .par_iter()
        .map(|&d| flow_on(raw_signal, imbalance, d, scale))
        .collect::<Result<Vec<_>>>()?;
    let n = imbalance.n_dates();
    let w = resolve_weights(opts, imbalance.stocks())?;
    let points = year_ranges(imbalance)
        .into_par_iter()
        .map(|(year, days)| -> Result<YearPoint> {
            let per_d: Vec<CurvePoint> = d_used
                .iter()
                .zip(&flows)
                .map(|(&d, flow)| {
                    let stat = correlate_values(imbalance.values(), flow.values(), n, days.clone(), 0, opts, w.as_deref());
                    CurvePoint {
                        index: d,
                        value: stat.map(|s| s.value),
                        band: None,
                        n_obs: stat.map_or(0, |s| s.n_obs),
                    }
                })
                .collect();
            let Some(best) = argmax_abs(&per_d).copied() else {
                return Ok(YearPoint {
                    year,
                    value: None,
                    d_at_max: None,
                    band: None,
                    n_obs: 0,
                });
            };
            let band = match band {
                Some(b) => {
                    let k = d_used.iter().position(|d| *d == best.index).expect("grid point");
                    sample_std(&reshuffled_correlations(imbalance, &flows[k], 0, days.clone(), opts, b)?)
                }
                None => None,
            };
            Ok(YearPoint {
                year,
                value: best.value,
                d_at_max: Some(best.index),
                band,
                n_obs: best.n_obs,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(YearlyEvolution {
        d_window,
        d_used,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::tests::{grid_panel, noise_panel};

    fn random_walk_signal(stocks: usize, days: usize, seed: u64) -> Panel {
        let noise = noise_panel(stocks, days, seed);
        let mut v = noise.values().to_vec();
        for row in v.chunks_mut(days) {
            for t in 1..days {
                row[t] = 0.95 * row[t - 1] + 0.1 * row[t];
            }
        }
        noise.with_values(v)
    }

    #[test]
    fn flow_itself_peaks_at_generating_d() {
        let s = random_walk_signal(20, 400, 1);
        let imb = flow_on(&s, &s, 42.0, Scale::Fixed(1.0)).unwrap();
        let scan = d_scan(&imb, &s, &default_d_grid(), Scale::Auto, &CorrelationOptions::default(), None).unwrap();
        assert_eq!(scan.argmax_d, Some(42.0));
        assert!((scan.max_corr.unwrap() - 1.0).abs() < 1e-12);
        for p in &scan.curve.points {
            if p.index != 42.0 {
                assert!(p.value.unwrap() < 1.0 - 1e-9);
            }
        }
    }

    #[test]
    fn empty_grid_is_an_error() {
        let s = noise_panel(2, 100, 2);
        let o = CorrelationOptions::default();
        assert!(d_scan(&s, &s, &[], Scale::Auto, &o, None).is_err());
        assert!(d_scan(&s, &s, &[0.0], Scale::Auto, &o, None).is_err());
    }

    #[test]
    fn scan_bands_present_and_positive() {
        let s = random_walk_signal(10, 300, 3);
        let imb = noise_panel(10, 300, 4);
        let band = BandOptions {
            block_len: 30,
            n_samples: 20,
            seed: 1,
        };
        let scan = d_scan(&imb, &s, &[10.0, 21.0], Scale::Auto, &CorrelationOptions::default(), Some(&band)).unwrap();
        assert!(scan.curve.points.iter().all(|p| p.band.unwrap() > 0.0));
        assert_eq!(scan.z_scores().len(), 2);
    }

    #[test]
    fn single_year_gives_one_point() {
        let s = random_walk_signal(10, 200, 5);
        let imb = flow_on(&s, &s, 63.0, Scale::Fixed(1.0)).unwrap();
        // 200 weekdays from 2010-01-04 stay inside 2010.
        let evo = yearly_evolution(
            &imb,
            &s,
            &default_d_grid(),
            [42.0, 84.0],
            Scale::Auto,
            &CorrelationOptions::default(),
            None,
        )
        .unwrap();
        assert_eq!(evo.years(), vec![2010]);
        assert_eq!(evo.d_used, vec![42.0, 63.0, 84.0]);
        assert_eq!(evo.points[0].d_at_max, Some(63.0));
        assert!((evo.points[0].value.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn short_year_is_missing() {
        // 270 weekdays from 2010-01-04: the rest of 2010 plus ten days of 2011.
        let s = random_walk_signal(5, 270, 6);
        let imb = grid_panel(5, 270, noise_panel(5, 270, 7).values().to_vec());
        let evo = yearly_evolution(&imb, &s, &[21.0], [0.0, 300.0], Scale::Auto, &CorrelationOptions::default(), None)
            .unwrap();
        assert_eq!(evo.years(), vec![2010, 2011]);
        assert!(evo.points[0].value.is_some());
        assert!(evo.points[1].value.is_none());
    }
}
