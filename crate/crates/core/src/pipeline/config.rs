use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::correlation::{default_d_grid, Averaging, BandOptions, CorrelationOptions};
use crate::error::{CrowdingError, Result};
use crate::factors::{FactorKind, Scale, SignalSpec};
use crate::imbalance::{Metric, PanelOptions};
use crate::synth::SynthConfig;

/// Input files. Unset paths fall back to the `crowding synth` output under
/// `<out>/data`.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub trades: Option<PathBuf>,
    pub book: Option<PathBuf>,
    pub metaorders: Option<PathBuf>,
    pub prices: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Monte Carlo replicates run by `crowding synth`; 0 skips the oracle.
    pub n_mc: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub min_obs: usize,
    pub averaging: Averaging,
    pub block_len: usize,
    pub n_samples: usize,
}

impl Default for StatsConfig {
    fn default() -> Self {
        let c = CorrelationOptions::default();
        let b = BandOptions::default();
        StatsConfig {
            min_obs: c.min_obs,
            averaging: c.averaging,
            block_len: b.block_len,
            n_samples: b.n_samples,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub metrics: Vec<Metric>,
    pub d_grid: Vec<f64>,
    pub bands: bool,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            metrics: Metric::ALL.to_vec(),
            d_grid: default_d_grid(),
            bands: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LagsConfig {
    pub metrics: Vec<Metric>,
    /// Imbalance/return correlations for lags `-max_lag..=max_lag`.
    pub max_lag: i64,
    pub acf_max_lag: usize,
    pub fit_range: [f64; 2],
    pub bands: bool,
}

impl Default for LagsConfig {
    fn default() -> Self {
        LagsConfig {
            metrics: Metric::ALL.to_vec(),
            max_lag: 10,
            acf_max_lag: 100,
            fit_range: [2.0, 100.0],
            bands: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveConfig {
    pub metrics: Vec<Metric>,
    /// Two to four months.
    pub d_window: [f64; 2],
    pub bands: bool,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig {
            metrics: vec![Metric::Trade, Metric::Book, Metric::Meta],
            d_window: [42.0, 84.0],
            bands: true,
        }
    }
}

/// Everything a run needs, read from a TOML file with one section per stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out: PathBuf,
    /// Drives the generator and every reshuffle; overrides `synth.seed`.
    pub seed: u64,
    /// Worker threads; unset uses all cores.
    pub threads: Option<usize>,
    pub data: DataConfig,
    pub synth: SynthConfig,
    pub oracle: OracleConfig,
    pub panel: PanelOptions,
    pub signal: SignalSpec,
    pub stats: StatsConfig,
    pub scan: ScanConfig,
    pub lags: LagsConfig,
    pub evolve: EvolveConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            out: PathBuf::from("out"),
            seed: 0,
            threads: None,
            data: DataConfig::default(),
            synth: SynthConfig::default(),
            oracle: OracleConfig::default(),
            panel: PanelOptions::default(),
            signal: SignalSpec::default(),
            stats: StatsConfig::default(),
            scan: ScanConfig::default(),
            lags: LagsConfig::default(),
            evolve: EvolveConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CrowdingError::Config(vec![e.to_string()]))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CrowdingError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Every problem at once, or `Ok`.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if let Err(CrowdingError::Config(e)) = self.synth_config().validate() {
            errs.extend(e);
        }
        if !(self.panel.price_tolerance >= 0.0) {
            errs.push("panel.price_tolerance must be non-negative".into());
        }
        let sig = &self.signal;
        if sig.factor == FactorKind::Momentum && sig.lookback <= sig.skip {
            errs.push(format!("signal.lookback ({}) must exceed signal.skip ({})", sig.lookback, sig.skip));
        }
        if !(sig.d > 0.0 && sig.d.is_finite()) {
            errs.push(format!("signal.d must be positive, got {}", sig.d));
        }
        if let Scale::Fixed(a) = sig.scale {
            if !(a > 0.0) {
                errs.push(format!("signal.scale must be positive or \"auto\", got {a}"));
            }
        }
        if self.stats.min_obs < 2 {
            errs.push("stats.min_obs must be at least 2".into());
        }
        if self.stats.block_len < 1 {
            errs.push("stats.block_len must be at least 1".into());
        }
        if self.stats.n_samples < 2 {
            errs.push("stats.n_samples must be at least 2".into());
        }
        if self.scan.d_grid.is_empty() {
            errs.push("scan.d_grid must not be empty".into());
        }
        if self.scan.d_grid.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            errs.push("scan.d_grid entries must be positive".into());
        }
        for (name, m) in [
            ("scan", &self.scan.metrics),
            ("lags", &self.lags.metrics),
            ("evolve", &self.evolve.metrics),
        ] {
            if m.is_empty() {
                errs.push(format!("{name}.metrics must not be empty"));
            }
        }
        if self.lags.max_lag < 0 {
            errs.push("lags.max_lag must be non-negative".into());
        }
        if self.lags.acf_max_lag < 1 {
            errs.push("lags.acf_max_lag must be at least 1".into());
        }
        let [lo, hi] = self.lags.fit_range;
        if !(lo > 0.0 && hi >= lo) {
            errs.push(format!("lags.fit_range must satisfy 0 < lo <= hi, got [{lo}, {hi}]"));
        }
        let [lo, hi] = self.evolve.d_window;
        if !(lo <= hi) {
            errs.push(format!("evolve.d_window must satisfy lo <= hi, got [{lo}, {hi}]"));
        } else if !self.scan.d_grid.iter().any(|d| *d >= lo && *d <= hi) {
            errs.push(format!("no scan.d_grid point lies inside evolve.d_window [{lo}, {hi}]"));
        }
        if self.oracle.n_mc > 0 && self.oracle.n_mc < 100 {
            errs.push("oracle.n_mc must be 0 or at least 100".into());
        }
        if self.threads == Some(0) {
            errs.push("threads must be at least 1".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(CrowdingError::Config(errs))
        }
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            seed: self.seed,
            ..self.synth
        }
    }

    pub fn correlation(&self) -> CorrelationOptions {
        CorrelationOptions {
            min_obs: self.stats.min_obs,
            averaging: self.stats.averaging,
            weights: None,
        }
    }

    pub fn band(&self) -> BandOptions {
        BandOptions {
            block_len: self.stats.block_len,
            n_samples: self.stats.n_samples,
            seed: self.seed,
        }
    }

    pub fn data_dir(&self) -> PathBuf {
        self.out.join("data")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        cfg.validate().unwrap();
    }

    #[test]
    fn sections_parse() {
        let cfg = RunConfig::from_toml(
            r#"
            out = "results"
            seed = 7
            [synth]
            n_stocks = 20
            execution_style = "passive"
            ramp = { from = 0.01, to = 0.05 }
            [signal]
            factor = "hml"
            d = 42
            scale = 1.5
            [stats]
            averaging = "pooled"
            [scan]
            metrics = ["i_trade", "i_book"]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.out, PathBuf::from("results"));
        assert_eq!(cfg.synth_config().seed, 7);
        assert_eq!(cfg.signal.factor, FactorKind::Hml);
        assert_eq!(cfg.signal.scale, Scale::Fixed(1.5));
        assert_eq!(cfg.scan.metrics, vec![Metric::Trade, Metric::Book]);
        assert_eq!(cfg.stats.averaging, Averaging::Pooled);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("[scan]\nd_gird = [5]\n").is_err());
    }

    #[test]
    fn all_errors_reported_together() {
        let cfg = RunConfig::from_toml(
            r#"
            [synth]
            crowding_fraction = 2.0
            [stats]
            n_samples = 1
            [scan]
            d_grid = []
            "#,
        )
        .unwrap();
        let Err(CrowdingError::Config(errs)) = cfg.validate() else {
            panic!("expected config errors");
        };
        assert!(errs.len() >= 3, "{errs:?}");
    }
}
