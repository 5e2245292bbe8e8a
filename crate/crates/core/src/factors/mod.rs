//! Factor signals: raw scores, their slowed-down positions and the expected
//! rebalancing flow of an investor tracking them.

mod signals;
mod slowing;

use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{CrowdingError, Result};
use crate::market_data::PricePanel;
use crate::panel::{Panel, StockId};

pub use signals::{
    average_ranks, cross_sectional_rank, hml_signal, momentum_score, momentum_signal, smb_signal,
};
pub use slowing::{expected_flow, pooled_std, slow_signal, Scale, Slowed};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FactorKind {
    #[default]
    Momentum,
    Hml,
    Smb,
}

impl fmt::Display for FactorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FactorKind::Momentum => "momentum",
            FactorKind::Hml => "hml",
            FactorKind::Smb => "smb",
        })
    }
}

impl FromStr for FactorKind {
    type Err = CrowdingError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "momentum" => Ok(FactorKind::Momentum),
            "hml" | "value" => Ok(FactorKind::Hml),
            "smb" | "size" => Ok(FactorKind::Smb),
            _ => Err(CrowdingError::InvalidParameter(format!("unknown factor {s:?}"))),
        }
    }
}

/// Everything needed to rebuild a signal panel from prices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SignalSpec {
    pub factor: FactorKind,
    /// Momentum lookback in trading days.
    pub lookback: usize,
    /// Most recent trading days left out of the momentum window.
    pub skip: usize,
    /// Slowing timescale in trading days.
    pub d: f64,
    pub scale: Scale,
}

impl Default for SignalSpec {
    /// 12-minus-1-month momentum slowed over three months.
    fn default() -> Self {
        SignalSpec {
            factor: FactorKind::Momentum,
            lookback: 252,
            skip: 21,
            d: 63.0,
            scale: Scale::Auto,
        }
    }
}

impl SignalSpec {
    pub fn raw_signal(&self, prices: &PricePanel) -> Result<Panel> {
        match self.factor {
            FactorKind::Momentum => momentum_signal(prices, self.lookback, self.skip),
            FactorKind::Hml => hml_signal(prices),
            FactorKind::Smb => smb_signal(prices),
        }
    }
}

/// Raw signal `s`, slowed position `pi` and expected flow `delta_pi`.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorSignalPanel {
    pub spec: SignalSpec,
    /// The `A` actually applied (resolved when `scale` is `auto`).
    pub scale: f64,
    pub s: Panel,
    pub pi: Panel,
    pub delta_pi: Panel,
}

/// Sidecar metadata written next to the signal table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalMetadata {
    pub schema: String,
    pub spec: SignalSpec,
    pub applied_scale: f64,
    pub n_stocks: usize,
    pub n_dates: usize,
}

pub const SIGNAL_SCHEMA: &str = "crowding.signal/1";

impl FactorSignalPanel {
    pub fn build(prices: &PricePanel, spec: SignalSpec) -> Result<Self> {
        let s = spec.raw_signal(prices)?;
        Self::from_raw(s, spec)
    }

    pub fn from_raw(s: Panel, spec: SignalSpec) -> Result<Self> {
        let slowed = slow_signal(&s, spec.d, spec.scale)?;
        let delta_pi = expected_flow(&slowed.pi);
        Ok(FactorSignalPanel {
            spec,
            scale: slowed.scale,
            s,
            pi: slowed.pi,
            delta_pi,
        })
    }

    pub fn metadata(&self) -> SignalMetadata {
        SignalMetadata {
            schema: SIGNAL_SCHEMA.into(),
            spec: self.spec,
            applied_scale: self.scale,
            n_stocks: self.s.n_stocks(),
            n_dates: self.s.n_dates(),
        }
    }

    /// Writes `stock,date,s,pi,delta_pi`; cells where all three are missing are skipped.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| CrowdingError::io(path, e))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(f));
        let csv_err = |e| CrowdingError::csv(path, e);
        w.write_record(["stock", "date", "s", "pi", "delta_pi"]).map_err(csv_err)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for (i, stock) in self.s.stocks().iter().enumerate() {
            for (t, date) in self.s.dates().iter().enumerate() {
                let (s, pi, dp) = (self.s.get(i, t), self.pi.get(i, t), self.delta_pi.get(i, t));
                if s.is_none() && pi.is_none() && dp.is_none() {
                    continue;
                }
                w.write_record([stock.to_string(), date.to_string(), opt(s), opt(pi), opt(dp)])
                    .map_err(csv_err)?;
            }
        }
        let mut inner = w.into_inner().map_err(|e| CrowdingError::io(path, e.into_error()))?;
        inner.flush().map_err(|e| CrowdingError::io(path, e))
    }

    /// Reads the three columns of a signal table back as panels on the grid
    /// of the stocks and dates it mentions.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<(Panel, Panel, Panel)> {
        let path = path.as_ref();
        let mut rdr = csv::Reader::from_path(path).map_err(|e| CrowdingError::csv(path, e))?;
        let headers = rdr.headers().map_err(|e| CrowdingError::csv(path, e))?.clone();
        let need = ["stock", "date", "s", "pi", "delta_pi"];
        let missing: Vec<String> = need
            .iter()
            .filter(|h| !headers.iter().any(|x| x == **h))
            .map(|h| h.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(CrowdingError::MissingColumns {
                path: path.to_path_buf(),
                missing,
            });
        }
        let idx: Vec<usize> = need
            .iter()
            .map(|h| headers.iter().position(|x| x == *h).expect("checked"))
            .collect();
        let mut cells: Vec<(StockId, NaiveDate, [f64; 3])> = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| CrowdingError::csv(path, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            let bad = || CrowdingError::RejectedRecord(format!("{}:{line}: malformed signal row", path.display()));
            let date = NaiveDate::parse_from_str(&rec[idx[1]], "%Y-%m-%d").map_err(|_| bad())?;
            let mut vals = [f64::NAN; 3];
            for (k, v) in vals.iter_mut().enumerate() {
                let s = &rec[idx[2 + k]];
                if !s.is_empty() {
                    *v = s.parse().map_err(|_| bad())?;
                }
            }
            cells.push((StockId::new(&rec[idx[0]]), date, vals));
        }
        let project = |k: usize| Panel::from_cells(cells.iter().map(|(s, d, v)| (s.clone(), *d, v[k])));
        Ok((project(0), project(1), project(2)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::PriceRow;

    #[test]
    fn factor_names() {
        assert_eq!("Momentum".parse::<FactorKind>().unwrap(), FactorKind::Momentum);
        assert_eq!("hml".parse::<FactorKind>().unwrap(), FactorKind::Hml);
        assert_eq!("smb".parse::<FactorKind>().unwrap(), FactorKind::Smb);
        assert!("quality".parse::<FactorKind>().is_err());
    }

    #[test]
    fn signal_csv_round_trip() {
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let mut rows = Vec::new();
        for (k, stock) in ["A", "B", "C"].iter().enumerate() {
            for t in 0..8u64 {
                rows.push(PriceRow {
                    stock: (*stock).into(),
                    date: start + chrono::Days::new(t),
                    close: 10.0 + (t as f64) * (k as f64 - 1.0) + 0.1 * ((t * 7 + k as u64) % 3) as f64,
                    book_value: None,
                    market_cap: None,
                });
            }
        }
        let spec = SignalSpec {
            lookback: 3,
            skip: 1,
            d: 2.0,
            ..SignalSpec::default()
        };
        let sig = FactorSignalPanel::build(&PricePanel::from_rows(&rows), spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("signal.csv");
        sig.write_csv(&path).unwrap();
        let (s, pi, dp) = FactorSignalPanel::read_csv(&path).unwrap();
        let grid = (s.stocks().clone(), s.dates().clone());
        assert_eq!(s, sig.s.reindex(&grid.0, &grid.1));
        assert_eq!(pi, sig.pi.reindex(&grid.0, &grid.1));
        assert_eq!(dp, sig.delta_pi.reindex(&grid.0, &grid.1));
    }
}
