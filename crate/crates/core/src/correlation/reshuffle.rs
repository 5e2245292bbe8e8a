use std::ops::Range;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_grid, correlate_values, resolve_weights, CorrelationOptions};
use crate::error::{CrowdingError, Result};
use crate::panel::Panel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BandOptions {
    /// Contiguous days moved together, about six months by default.
    pub block_len: usize,
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for BandOptions {
    fn default() -> Self {
        BandOptions {
            block_len: 126,
            n_samples: 200,
            seed: 0,
        }
    }
}

impl BandOptions {
    fn validate(&self, n_days: usize) -> Result<()> {
        if self.block_len == 0 {
            return Err(CrowdingError::InvalidParameter("block_len must be at least 1".into()));
        }
        if self.n_samples < 2 {
            return Err(CrowdingError::InvalidParameter("n_samples must be at least 2".into()));
        }
        let blocks = n_days.div_ceil(self.block_len);
        if blocks < 2 {
            return Err(CrowdingError::TooFewBlocks {
                blocks,
                len: n_days,
                block_len: self.block_len,
            });
        }
        Ok(())
    }

    /// Generator for one sample; independent of how samples are scheduled.
    fn rng(&self, sample: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(sample as u64);
        rng
    }
}

/// Day order after shuffling contiguous blocks: `order[t]` is the source day
/// placed at position `t`. The last block may be shorter.
pub fn block_permutation<R: Rng + ?Sized>(n_days: usize, block_len: usize, rng: &mut R) -> Vec<usize> {
    let starts: Vec<usize> = (0..n_days).step_by(block_len.max(1)).collect();
    let mut blocks = starts.clone();
    blocks.shuffle(rng);
    blocks
        .into_iter()
        .flat_map(|s| s..(s + block_len).min(n_days))
        .collect()
}

fn permute_days(values: &[f64], n_days: usize, order: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    for row in values.chunks_exact(n_days) {
        out.extend(order.iter().map(|&t| row[t]));
    }
    out
}

/// Correlations of block-shuffled `x` against `y` at `lag`, evaluated on
/// `days`; one entry per sample, `None` where the correlation is undefined.
/// The same permutation applies to every stock.
pub fn reshuffled_correlations(
    x: &Panel,
    y: &Panel,
    lag: i64,
    days: Range<usize>,
    opts: &CorrelationOptions,
    band: &BandOptions,
) -> Result<Vec<Option<f64>>> {
    check_grid(x, y)?;
    let n = x.n_dates();
    band.validate(n)?;
    let w = resolve_weights(opts, x.stocks())?;
    Ok((0..band.n_samples)
        .into_par_iter()
        .map(|k| {
            let order = block_permutation(n, band.block_len, &mut band.rng(k));
            let xs = permute_days(x.values(), n, &order);
            correlate_values(&xs, y.values(), n, days.clone(), lag, opts, w.as_deref()).map(|s| s.value)
        })
        .collect())
}

/// Sample standard deviation of the defined entries.
pub(crate) fn sample_std(samples: &[Option<f64>]) -> Option<f64> {
    let v: Vec<f64> = samples.iter().flatten().copied().collect();
    if v.len() < 2 {
        return None;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    Some((v.iter().map(|c| (c - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt())
}

/// Standard deviation of the lag-0 correlation under block reshuffling of `x`.
pub fn block_reshuffle_band(
    x: &Panel,
    y: &Panel,
    opts: &CorrelationOptions,
    band: &BandOptions,
) -> Result<Option<f64>> {
    let samples = reshuffled_correlations(x, y, 0, 0..x.n_dates(), opts, band)?;
    Ok(sample_std(&samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::tests::noise_panel;

    #[test]
    fn permutation_keeps_blocks_contiguous() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let order = block_permutation(10, 4, &mut rng);
        let mut sorted = order.clone();
        sorted.sort();
        assert_eq!(sorted, (0..10).collect::<Vec<_>>());
        for w in order.windows(2) {
            if w[1] != w[0] + 1 {
                assert!(w[1] % 4 == 0, "{order:?}");
            }
        }
    }

    #[test]
    fn single_block_is_rejected() {
        let x = noise_panel(2, 100, 1);
        let band = BandOptions {
            block_len: 100,
            ..Default::default()
        };
        assert!(matches!(
            block_reshuffle_band(&x, &x, &CorrelationOptions::default(), &band),
            Err(CrowdingError::TooFewBlocks { blocks: 1, .. })
        ));
    }

    #[test]
    fn same_seed_same_band() {
        let x = noise_panel(10, 300, 2);
        let y = noise_panel(10, 300, 3);
        let band = BandOptions {
            block_len: 30,
            n_samples: 50,
            seed: 9,
        };
        let o = CorrelationOptions::default();
        let a = block_reshuffle_band(&x, &y, &o, &band).unwrap().unwrap();
        let b = block_reshuffle_band(&x, &y, &o, &band).unwrap().unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        let c = block_reshuffle_band(&x, &y, &o, &BandOptions { seed: 10, ..band }).unwrap().unwrap();
        assert_ne!(a.to_bits(), c.to_bits());
    }

    #[test]
    fn rejects_bad_options() {
        let x = noise_panel(2, 100, 1);
        let o = CorrelationOptions::default();
        for band in [
            BandOptions { block_len: 0, ..Default::default() },
            BandOptions { block_len: 10, n_samples: 1, seed: 0 },
        ] {
            assert!(block_reshuffle_band(&x, &x, &o, &band).is_err());
        }
    }
}
