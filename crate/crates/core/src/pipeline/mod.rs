//! The seven pipeline commands behind the `crowding` binary.
//!
//! Every command reads its inputs from the output directory (or the paths in
//! `[data]`), writes schema-tagged JSON and flat CSV tables, and finishes with
//! a `<command>.manifest.json` listing input and output digests. A fatal
//! problem is returned as `Err`; recoverable ones (rejected input rows) land
//! in [`CommandOutcome::errors`] and still make the run count as failed.

mod config;
mod manifest;

use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

pub use config::{DataConfig, EvolveConfig, LagsConfig, OracleConfig, RunConfig, ScanConfig, StatsConfig};
pub use manifest::{digest, manifest_path, sha256_file, write_json, FileDigest, RunManifest, MANIFEST_SCHEMA};

use crate::correlation::{
    autocorrelation, d_scan, fit_power_law, lagged_correlation, lagged_correlation_with_band,
    profitability_estimate, yearly_evolution, Averaging, BandOptions, CorrelationCurve, CorrelationOptions, CurvePoint,
    PowerLawFit, ProfitabilityReport, YearlyEvolution,
};
use crate::error::{CrowdingError, Result};
use crate::factors::{FactorSignalPanel, SignalSpec};
use crate::imbalance::{build_daily_panel, DailyImbalancePanel, Metric, PanelOptions};
use crate::market_data::{
    ingest_book_snapshots, ingest_metaorders, ingest_price_panel, ingest_trades, IngestOptions, Ingested,
    PricePanel,
};
use crate::panel::Panel;
use crate::synth::{
    generate_market, oracle_with_options, BOOK_FILE, METAORDERS_FILE, PRICES_FILE, TRADES_FILE,
};

pub const PANEL_FILE: &str = "panel.csv";
pub const PANEL_META_FILE: &str = "panel.json";
pub const SIGNAL_FILE: &str = "signal.csv";
pub const SIGNAL_META_FILE: &str = "signal.json";
pub const SKETCH_FILE: &str = "sketch.json";
pub const ORACLE_FILE: &str = "oracle.json";
pub const SCAN_FILE: &str = "scan.json";
pub const SCAN_TABLE_FILE: &str = "scan.csv";
pub const LAGS_FILE: &str = "lags.json";
pub const LAGS_TABLE_FILE: &str = "lags.csv";
pub const EVOLUTION_FILE: &str = "evolution.json";
pub const EVOLUTION_TABLE_FILE: &str = "evolution.csv";
pub const PROFIT_FILE: &str = "profit.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Synth,
    Panel,
    Signal,
    Scan,
    Lags,
    Evolve,
    Profit,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Synth,
        Command::Panel,
        Command::Signal,
        Command::Scan,
        Command::Lags,
        Command::Evolve,
        Command::Profit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Panel => "panel",
            Command::Signal => "signal",
            Command::Scan => "scan",
            Command::Lags => "lags",
            Command::Evolve => "evolve",
            Command::Profit => "profit",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Command {
    type Err = CrowdingError;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| CrowdingError::InvalidParameter(format!("unknown command {s:?}")))
    }
}

/// What a finished command reports back.
#[derive(Clone, Debug, PartialEq)]
pub struct CommandOutcome {
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
}

impl CommandOutcome {
    pub fn warnings(&self) -> &[String] {
        &self.manifest.warnings
    }

    pub fn errors(&self) -> &[String] {
        &self.manifest.errors
    }

    pub fn succeeded(&self) -> bool {
        self.manifest.errors.is_empty()
    }
}

/// Validates the config and runs one command.
pub fn run(command: Command, cfg: &RunConfig) -> Result<CommandOutcome> {
    cfg.validate()?;
    match command {
        Command::Synth => cmd_synth(cfg),
        Command::Panel => cmd_panel(cfg),
        Command::Signal => cmd_signal(cfg),
        Command::Scan => cmd_scan(cfg),
        Command::Lags => cmd_lags(cfg),
        Command::Evolve => cmd_evolve(cfg),
        Command::Profit => cmd_profit(cfg),
    }
}

/// Bookkeeping shared by the commands.
struct Run<'a> {
    cfg: &'a RunConfig,
    command: Command,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    warnings: Vec<String>,
    errors: Vec<String>,
}

impl<'a> Run<'a> {
    fn new(cfg: &'a RunConfig, command: Command) -> Result<Self> {
        fs::create_dir_all(&cfg.out).map_err(|e| CrowdingError::io(&cfg.out, e))?;
        Ok(Run {
            cfg,
            command,
            inputs: Vec::new(),
            outputs: Vec::new(),
            warnings: Vec::new(),
            errors: Vec::new(),
        })
    }

    fn out(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    /// An artifact produced by an earlier command.
    fn upstream(&mut self, name: &str, producer: Command) -> Result<PathBuf> {
        let path = self.out(name);
        if !path.is_file() {
            return Err(CrowdingError::MissingArtifact {
                path,
                producer: producer.name().into(),
            });
        }
        self.inputs.push(path.clone());
        Ok(path)
    }

    /// A market data file: the configured path, or the synthetic default.
    fn data(&mut self, configured: &Option<PathBuf>, default_name: &str) -> Result<PathBuf> {
        let path = match configured {
            Some(p) if !p.is_file() => {
                return Err(CrowdingError::MissingInput(format!("{} does not exist", p.display())))
            }
            Some(p) => p.clone(),
            None => {
                let p = self.cfg.data_dir().join(default_name);
                if !p.is_file() {
                    return Err(CrowdingError::MissingArtifact {
                        path: p,
                        producer: Command::Synth.name().into(),
                    });
                }
                p
            }
        };
        self.inputs.push(path.clone());
        Ok(path)
    }

    fn ingested<T>(&mut self, what: &str, ing: &Ingested<T>) {
        for e in &ing.errors {
            self.errors.push(format!("{what} line {}: {}", e.line, e.message));
        }
        self.warnings.extend(ing.warnings.iter().map(|w| format!("{what}: {w}")));
    }

    fn prices(&mut self) -> Result<PricePanel> {
        let cfg = self.cfg;
        let path = self.data(&cfg.data.prices, PRICES_FILE)?;
        let mut ing = ingest_price_panel(&path)?;
        self.ingested("prices", &ing);
        Ok(ing.records.pop().expect("one price panel"))
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.out(name);
        write_json(&path, value)?;
        self.outputs.push(path);
        Ok(())
    }

    fn table(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
        let path = self.out(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| CrowdingError::csv(&path, e))?;
        w.write_record(header).map_err(|e| CrowdingError::csv(&path, e))?;
        for r in rows {
            w.write_record(&r).map_err(|e| CrowdingError::csv(&path, e))?;
        }
        w.flush().map_err(|e| CrowdingError::io(&path, e))?;
        self.outputs.push(path);
        Ok(())
    }

    fn finish(self, parameters: impl Serialize) -> Result<CommandOutcome> {
        let base = self.cfg.out.as_path();
        let digests = |paths: &[PathBuf]| paths.iter().map(|p| digest(p, base)).collect::<Result<Vec<_>>>();
        let manifest = RunManifest {
            schema: MANIFEST_SCHEMA.into(),
            command: self.command.name().into(),
            seed: self.cfg.seed,
            parameters: serde_json::to_value(parameters)?,
            inputs: digests(&self.inputs)?,
            outputs: digests(&self.outputs)?,
            warnings: self.warnings,
            errors: self.errors,
        };
        let path = manifest_path(base, self.command.name());
        write_json(&path, &manifest)?;
        Ok(CommandOutcome {
            manifest,
            manifest_path: path,
        })
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn imbalance_panel(run: &mut Run<'_>) -> Result<DailyImbalancePanel> {
    let path = run.upstream(PANEL_FILE, Command::Panel)?;
    DailyImbalancePanel::read_csv(path)
}

/// Raw signal, position and flow panels from `signal.csv`.
fn signal_panels(run: &mut Run<'_>) -> Result<(Panel, Panel, Panel)> {
    let path = run.upstream(SIGNAL_FILE, Command::Signal)?;
    FactorSignalPanel::read_csv(path)
}

#[derive(Serialize)]
struct SynthParameters<'a> {
    config: &'a RunConfig,
}

/// Generates a synthetic market into `<out>/data`, plus the oracle
/// expectation when `oracle.n_mc > 0`.
pub fn cmd_synth(cfg: &RunConfig) -> Result<CommandOutcome> {
    let mut run = Run::new(cfg, Command::Synth)?;
    let synth = cfg.synth_config();
    let market = generate_market(&synth)?;
    run.warnings.extend(market.warnings.iter().cloned());
    run.outputs.extend(market.write(cfg.data_dir())?);
    if cfg.oracle.n_mc > 0 {
        let report = oracle_with_options(&synth, cfg.oracle.n_mc, &cfg.correlation())?;
        run.json(ORACLE_FILE, &OracleDocument {
            schema: "crowding.oracle/1",
            config: synth,
            report,
        })?;
    }
    run.finish(SynthParameters { config: cfg })
}

#[derive(Serialize)]
struct OracleDocument {
    schema: &'static str,
    config: crate::synth::SynthConfig,
    report: crate::synth::OracleReport,
}

#[derive(Serialize)]
struct IngestCounts {
    records: usize,
    rejected: usize,
    warnings: usize,
}

impl IngestCounts {
    fn of<T>(ing: &Ingested<T>) -> Self {
        IngestCounts {
            records: ing.records.len(),
            rejected: ing.errors.len(),
            warnings: ing.warnings.len(),
        }
    }
}

#[derive(Serialize)]
struct PanelDocument {
    schema: &'static str,
    parameters: PanelOptions,
    n_rows: usize,
    n_stocks: usize,
    n_dates: usize,
    trades: IngestCounts,
    book: IngestCounts,
    metaorders: IngestCounts,
}

/// Ingests trades, snapshots and metaorders and writes the daily imbalances.
pub fn cmd_panel(cfg: &RunConfig) -> Result<CommandOutcome> {
    let mut run = Run::new(cfg, Command::Panel)?;
    let ingest = IngestOptions::default();
    let trades = ingest_trades(run.data(&cfg.data.trades, TRADES_FILE)?, &ingest)?;
    let book = ingest_book_snapshots(run.data(&cfg.data.book, BOOK_FILE)?, &ingest)?;
    let metas = ingest_metaorders(run.data(&cfg.data.metaorders, METAORDERS_FILE)?)?;
    run.ingested("trades", &trades);
    run.ingested("book", &book);
    run.ingested("metaorders", &metas);

    let panel = build_daily_panel(&trades.records, &book.records, &metas.records, &cfg.panel)?;
    let path = run.out(PANEL_FILE);
    panel.write_csv(&path)?;
    run.outputs.push(path);
    let (stocks, dates) = panel.grid();
    run.json(PANEL_META_FILE, &PanelDocument {
        schema: "crowding.panel/1",
        parameters: cfg.panel,
        n_rows: panel.len(),
        n_stocks: stocks.len(),
        n_dates: dates.len(),
        trades: IngestCounts::of(&trades),
        book: IngestCounts::of(&book),
        metaorders: IngestCounts::of(&metas),
    })?;
    run.finish(cfg.panel)
}

/// Three aligned series of one stock for the signal sketch.
#[derive(Serialize)]
struct SketchDocument {
    schema: &'static str,
    spec: SignalSpec,
    applied_scale: f64,
    stock: String,
    dates: Vec<String>,
    s: Vec<Option<f64>>,
    pi: Vec<Option<f64>>,
    delta_pi: Vec<Option<f64>>,
}

fn sketch(sig: &FactorSignalPanel) -> Option<SketchDocument> {
    // The stock with the most defined positions; ties go to the first.
    let best = (0..sig.pi.n_stocks()).max_by_key(|&i| {
        let n = sig.pi.row(i).iter().filter(|v| !v.is_nan()).count();
        (n, std::cmp::Reverse(i))
    })?;
    let series = |p: &Panel| p.row(best).iter().map(|v| finite(*v)).collect();
    Some(SketchDocument {
        schema: "crowding.sketch/1",
        spec: sig.spec,
        applied_scale: sig.scale,
        stock: sig.s.stocks()[best].to_string(),
        dates: sig.s.dates().iter().map(|d| d.to_string()).collect(),
        s: series(&sig.s),
        pi: series(&sig.pi),
        delta_pi: series(&sig.delta_pi),
    })
}

/// Builds the factor signal from prices and slows it at `signal.d`.
pub fn cmd_signal(cfg: &RunConfig) -> Result<CommandOutcome> {
    let mut run = Run::new(cfg, Command::Signal)?;
    let prices = run.prices()?;
    let sig = FactorSignalPanel::build(&prices, cfg.signal)?;
    let path = run.out(SIGNAL_FILE);
    sig.write_csv(&path)?;
    run.outputs.push(path);
    run.json(SIGNAL_META_FILE, &sig.metadata())?;
    match sketch(&sig) {
        Some(doc) => run.json(SKETCH_FILE, &doc)?,
        None => run.warnings.push("signal panel has no stocks; no sketch written".into()),
    }
    run.finish(cfg.signal)
}

#[derive(Clone, Serialize)]
struct StatsParameters {
    correlation: CorrelationOptions,
    /// Where liquidity weights come from, when used.
    weights: Option<&'static str>,
    band: Option<BandOptions>,
}

const LIQUIDITY_SOURCE: &str = "mean daily trade count per stock";

/// Correlation options with liquidity weights taken from the panel when the
/// averaging asks for them.
fn correlation_for(cfg: &RunConfig, panel: &DailyImbalancePanel) -> CorrelationOptions {
    let opts = cfg.correlation();
    match opts.averaging {
        Averaging::Liquidity => opts.with_weights(Arc::new(panel.mean_daily_trades())),
        _ => opts,
    }
}

fn stats_parameters(cfg: &RunConfig, panel: &DailyImbalancePanel, bands: bool) -> StatsParameters {
    let correlation = correlation_for(cfg, panel);
    StatsParameters {
        weights: correlation.weights.is_some().then_some(LIQUIDITY_SOURCE),
        correlation,
        band: bands.then(|| cfg.band()),
    }
}

#[derive(Serialize)]
struct ScanMetric {
    metric: Metric,
    points: Vec<CurvePoint>,
    argmax_d: Option<f64>,
    max_corr: Option<f64>,
    max_abs_corr: Option<f64>,
    z_scores: Vec<Option<f64>>,
}

#[derive(Serialize)]
struct ScanParameters<'a> {
    signal: SignalSpec,
    scan: &'a ScanConfig,
    stats: StatsParameters,
}

#[derive(Serialize)]
struct ScanDocument<'a> {
    schema: &'static str,
    parameters: &'a ScanParameters<'a>,
    metrics: Vec<ScanMetric>,
}

/// Imbalance against expected flow for every `D` in the grid and metric.
pub fn cmd_scan(cfg: &RunConfig) -> Result<CommandOutcome> {
    let mut run = Run::new(cfg, Command::Scan)?;
    let panel = imbalance_panel(&mut run)?;
    let (s, _, _) = signal_panels(&mut run)?;
    let params = ScanParameters {
        signal: cfg.signal,
        scan: &cfg.scan,
        stats: stats_parameters(cfg, &panel, cfg.scan.bands),
    };
    let (stocks, dates) = panel.grid();
    let mut metrics = Vec::new();
    let mut rows = Vec::new();
    for &m in &cfg.scan.metrics {
        let x = panel.metric_on(m, &stocks, &dates);
        let scan = d_scan(
            &x,
            &s,
            &cfg.scan.d_grid,
            cfg.signal.scale,
            &params.stats.correlation,
            params.stats.band.as_ref(),
        )?;
        if scan.argmax_d.is_none() {
            run.warnings.push(format!("{m}: no defined correlation on the D grid"));
        }
        for p in &scan.curve.points {
            rows.push(vec![m.to_string(), p.index.to_string(), cell(p.value), cell(p.band), p.n_obs.to_string()]);
        }
        metrics.push(ScanMetric {
            metric: m,
            z_scores: scan.z_scores(),
            points: scan.curve.points,
            argmax_d: scan.argmax_d,
            max_corr: scan.max_corr,
            max_abs_corr: scan.max_abs_corr,
        });
    }
    run.json(SCAN_FILE, &ScanDocument {
        schema: "crowding.scan/1",
        parameters: &params,
        metrics,
    })?;
    run.table(SCAN_TABLE_FILE, &["metric", "d", "corr", "band", "n_obs"], rows)?;
    run.finish(&params)
}

#[derive(Serialize)]
struct LagsMetric {
    metric: Metric,
    /// Imbalance at `t` against return at `t + lag`.
    return_correlation: CorrelationCurve,
    autocorrelation: CorrelationCurve,
    fit: Option<PowerLawFit>,
    fit_error: Option<String>,
}

#[derive(Serialize)]
struct LagsParameters<'a> {
    lags: &'a LagsConfig,
    stats: StatsParameters,
}

#[derive(Serialize)]
struct LagsDocument<'a> {
    schema: &'static str,
    parameters: &'a LagsParameters<'a>,
    metrics: Vec<LagsMetric>,
}

/// Lagged imbalance/return correlations and imbalance autocorrelations with
/// power-law fits.
pub fn cmd_lags(cfg: &RunConfig) -> Result<CommandOutcome> {
    let mut run = Run::new(cfg, Command::Lags)?;
    let panel = imbalance_panel(&mut run)?;
    let prices = run.prices()?;
    let params = LagsParameters {
        lags: &cfg.lags,
        stats: stats_parameters(cfg, &panel, cfg.lags.bands),
    };
    let opts = &params.stats.correlation;
    let (stocks, dates) = panel.grid();
    let returns = prices.returns.reindex(&stocks, &dates);
    let lags = -cfg.lags.max_lag..=cfg.lags.max_lag;
    let mut metrics = Vec::new();
    let mut rows = Vec::new();
    for &m in &cfg.lags.metrics {
        let x = panel.metric_on(m, &stocks, &dates);
        let ret = match &params.stats.band {
            Some(b) => lagged_correlation_with_band(&x, &returns, lags.clone(), opts, b)?,
            None => lagged_correlation(&x, &returns, lags.clone(), opts)?,
        };
        let acf = autocorrelation(&x, cfg.lags.acf_max_lag, opts)?;
        let (fit, fit_error) = match fit_power_law(&acf, cfg.lags.fit_range) {
            Ok(f) => {
                if f.goodness.poor {
                    run.warnings.push(format!("{m}: poor power-law fit (R^2 {:.3})", f.goodness.r_squared));
                }
                (Some(f), None)
            }
            Err(e) => {
                run.warnings.push(format!("{m}: {e}"));
                (None, Some(e.to_string()))
            }
        };
        for (kind, curve) in [("return", &ret), ("acf", &acf)] {
            for p in &curve.points {
                rows.push(vec![
                    m.to_string(),
                    kind.into(),
                    p.index.to_string(),
                    cell(p.value),
                    cell(p.band),
                    p.n_obs.to_string(),
                ]);
            }
        }
        metrics.push(LagsMetric {
            metric: m,
            return_correlation: ret,
            autocorrelation: acf,
            fit,
            fit_error,
        });
    }
    run.json(LAGS_FILE, &LagsDocument {
        schema: "crowding.lags/1",
        parameters: &params,
        metrics,
    })?;
    run.table(LAGS_TABLE_FILE, &["metric", "kind", "lag", "corr", "band", "n_obs"], rows)?;
    run.finish(&params)
}

#[derive(Serialize)]
struct EvolveMetric {
    metric: Metric,
    evolution: YearlyEvolution,
}

#[derive(Serialize)]
struct EvolveParameters<'a> {
    signal: SignalSpec,
    d_grid: &'a [f64],
    evolve: &'a EvolveConfig,
    stats: StatsParameters,
}

#[derive(Serialize)]
struct EvolveDocument<'a> {
    schema: &'static str,
    parameters: &'a EvolveParameters<'a>,
    metrics: Vec<EvolveMetric>,
}

/// Yearly maximum correlation over the `D` window.
pub fn cmd_evolve(cfg: &RunConfig) -> Result<CommandOutcome> {
    let mut run = Run::new(cfg, Command::Evolve)?;
    let panel = imbalance_panel(&mut run)?;
    let (s, _, _) = signal_panels(&mut run)?;
    let params = EvolveParameters {
        signal: cfg.signal,
        d_grid: &cfg.scan.d_grid,
        evolve: &cfg.evolve,
        stats: stats_parameters(cfg, &panel, cfg.evolve.bands),
    };
    let (stocks, dates) = panel.grid();
    let mut metrics = Vec::new();
    let mut rows = Vec::new();
    for &m in &cfg.evolve.metrics {
        let x = panel.metric_on(m, &stocks, &dates);
        let evolution = yearly_evolution(
            &x,
            &s,
            &cfg.scan.d_grid,
            cfg.evolve.d_window,
            cfg.signal.scale,
            &params.stats.correlation,
            params.stats.band.as_ref(),
        )?;
        for p in &evolution.points {
            rows.push(vec![
                m.to_string(),
                p.year.to_string(),
                cell(p.value),
                cell(p.d_at_max),
                cell(p.band),
                p.n_obs.to_string(),
            ]);
        }
        metrics.push(EvolveMetric { metric: m, evolution });
    }
    run.json(EVOLUTION_FILE, &EvolveDocument {
        schema: "crowding.evolution/1",
        parameters: &params,
        metrics,
    })?;
    run.table(EVOLUTION_TABLE_FILE, &["metric", "year", "corr", "d_at_max", "band", "n_obs"], rows)?;
    run.finish(&params)
}

#[derive(Serialize)]
struct ProfitParameters {
    signal: SignalSpec,
    correlation: CorrelationOptions,
    weights: Option<&'static str>,
}

#[derive(Serialize)]
struct ProfitDocument<'a> {
    schema: &'static str,
    parameters: &'a ProfitParameters,
    n_stocks: usize,
    n_dates: usize,
    report: ProfitabilityReport,
}

/// Gross profitability against impact cost of the slowed signal, on the days
/// covered by the imbalance panel.
pub fn cmd_profit(cfg: &RunConfig) -> Result<CommandOutcome> {
    let mut run = Run::new(cfg, Command::Profit)?;
    let panel = imbalance_panel(&mut run)?;
    let (_, pi, dpi) = signal_panels(&mut run)?;
    let prices = run.prices()?;
    let correlation = correlation_for(cfg, &panel);
    let params = ProfitParameters {
        signal: cfg.signal,
        weights: correlation.weights.is_some().then_some(LIQUIDITY_SOURCE),
        correlation,
    };
    let (stocks, dates) = panel.grid();
    let returns = prices.returns.reindex(&stocks, &dates);
    let report = profitability_estimate(
        &returns,
        &pi.reindex(&stocks, &dates),
        &dpi.reindex(&stocks, &dates),
        &params.correlation,
    )?;
    run.json(PROFIT_FILE, &ProfitDocument {
        schema: "crowding.profit/1",
        parameters: &params,
        n_stocks: stocks.len(),
        n_dates: dates.len(),
        report,
    })?;
    run.finish(&params)
}

/// Every command in pipeline order; stops at the first fatal error.
pub fn run_all(cfg: &RunConfig) -> Result<Vec<CommandOutcome>> {
    Command::ALL.into_iter().map(|c| run(c, cfg)).collect()
}
