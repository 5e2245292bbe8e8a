//! Synthetic markets with a planted share of factor-driven order flow.
//!
//! Each observed day a fraction `f` of every stock's trades follows the sign of
//! the momentum factor's expected flow, slowed at `planted_d`. Aggressive
//! crowding shows up as same-signed market orders; passive crowding rests in
//! the book on the crowd side, so the market orders that hit it carry the
//! opposite sign. Prices move with noise plus linear impact of the day's
//! volume imbalance, and the momentum signal is computed from those prices.

mod long_memory;
mod oracle;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CrowdingError, Result};
use crate::factors::{cross_sectional_rank, momentum_score};
use crate::imbalance::{volume_imbalance, DailyImbalancePanel, DayAggregator, ImbalanceRow, PanelOptions};
use crate::market_data::{
    write_book_snapshots, write_metaorders, write_prices, write_trades, BookSnapshot, MetaorderRecord,
    PricePanel, PriceRow, Session, Side, Timestamp, TradeRecord,
};
use crate::panel::{weekday_calendar, weekdays_before, Panel, StockId};

pub use long_memory::{fractional_gaussian_noise, long_memory_signs, sign_series_panel};
pub use oracle::{oracle_expected_correlation, oracle_with_options, replicate_seed, OracleErrors, OracleReport};

/// How the crowd executes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecutionStyle {
    /// Market orders in the direction of the expected flow.
    #[default]
    Aggressive,
    /// Resting limit orders on the crowd side, consumed by opposite market orders.
    Passive,
}

/// Linear schedule of the crowding fraction from the first to the last observed day.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ramp {
    pub from: f64,
    pub to: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_stocks: usize,
    /// Observed days with trades, snapshots and metaorders.
    pub n_days: usize,
    /// Price-only days before `start_date` that let the signal warm up.
    pub warmup_days: usize,
    /// First observed day; must be a weekday.
    pub start_date: NaiveDate,
    pub trades_per_day: usize,
    pub snapshots_per_day: usize,
    pub crowding_fraction: f64,
    /// Overrides `crowding_fraction` when set.
    pub ramp: Option<Ramp>,
    pub planted_d: f64,
    pub execution_style: ExecutionStyle,
    /// Daily return per unit of volume imbalance.
    pub impact_coefficient: f64,
    pub noise_vol: f64,
    /// Probability that a stock-day's crowded volume is also reported as a metaorder.
    pub metaorder_share: f64,
    /// Mean number of unrelated metaorders starting per stock-day.
    pub noise_metaorders_per_day: f64,
    /// Extra resting depth on the crowd side, in units of `f` times the median depth.
    pub passive_depth_scale: f64,
    pub momentum_lookback: usize,
    pub momentum_skip: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_stocks: 100,
            n_days: 750,
            warmup_days: 504,
            start_date: NaiveDate::from_ymd_opt(2011, 1, 3).expect("valid date"),
            trades_per_day: 30,
            snapshots_per_day: 26,
            crowding_fraction: 0.05,
            ramp: None,
            planted_d: 63.0,
            execution_style: ExecutionStyle::Aggressive,
            impact_coefficient: 0.01,
            noise_vol: 0.02,
            metaorder_share: 0.5,
            noise_metaorders_per_day: 1.0,
            passive_depth_scale: 1.0,
            momentum_lookback: 252,
            momentum_skip: 21,
            seed: 0,
        }
    }
}

const HALF_SPREAD: f64 = 5e-4;
const TRADE_VOLUME_MEDIAN: f64 = 200.0;
const TRADE_VOLUME_SIGMA: f64 = 0.8;
const DEPTH_MEDIAN: f64 = 5_000.0;
const DEPTH_SIGMA: f64 = 0.5;
const NOISE_META_MEDIAN: f64 = 5_000.0;
const NOISE_META_MAX_SPAN: usize = 5;
pub const CROWD_CLIENT: &str = "CROWD";

impl SynthConfig {
    /// Every problem at once, or `Ok`.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        for (name, v) in [
            ("n_stocks", self.n_stocks),
            ("n_days", self.n_days),
            ("trades_per_day", self.trades_per_day),
            ("snapshots_per_day", self.snapshots_per_day),
        ] {
            if v < 1 {
                errs.push(format!("synth.{name} must be at least 1"));
            }
        }
        if self.n_stocks < 2 {
            errs.push("synth.n_stocks must be at least 2 for a cross-sectional signal".into());
        }
        if !unit(self.crowding_fraction) {
            errs.push(format!("synth.crowding_fraction must lie in [0, 1], got {}", self.crowding_fraction));
        }
        if let Some(r) = self.ramp {
            if !unit(r.from) || !unit(r.to) {
                errs.push(format!("synth.ramp endpoints must lie in [0, 1], got {} and {}", r.from, r.to));
            }
        }
        if !(self.planted_d > 0.0 && self.planted_d.is_finite()) {
            errs.push(format!("synth.planted_d must be positive, got {}", self.planted_d));
        }
        if !(self.noise_vol > 0.0 && self.noise_vol.is_finite()) {
            errs.push(format!("synth.noise_vol must be positive, got {}", self.noise_vol));
        }
        if !self.impact_coefficient.is_finite() {
            errs.push("synth.impact_coefficient must be finite".into());
        }
        if !unit(self.metaorder_share) {
            errs.push(format!("synth.metaorder_share must lie in [0, 1], got {}", self.metaorder_share));
        }
        if !(self.noise_metaorders_per_day >= 0.0 && self.noise_metaorders_per_day.is_finite()) {
            errs.push("synth.noise_metaorders_per_day must be non-negative".into());
        }
        if !(self.passive_depth_scale >= 0.0 && self.passive_depth_scale.is_finite()) {
            errs.push("synth.passive_depth_scale must be non-negative".into());
        }
        if self.momentum_skip < 1 {
            errs.push("synth.momentum_skip must be at least 1 so the signal only sees past closes".into());
        }
        if self.momentum_lookback <= self.momentum_skip {
            errs.push("synth.momentum_lookback must exceed synth.momentum_skip".into());
        }
        if !crate::panel::is_weekday(self.start_date) {
            errs.push(format!("synth.start_date {} is not a weekday", self.start_date));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(CrowdingError::Config(errs))
        }
    }

    /// Non-fatal remarks about degenerate but valid settings.
    pub fn warnings(&self) -> Vec<String> {
        let f = match self.ramp {
            Some(r) => r.from.max(r.to),
            None => self.crowding_fraction,
        };
        let expected = f * self.trades_per_day as f64;
        let mut out = Vec::new();
        if f > 0.0 && expected < 1.0 {
            out.push(format!(
                "crowding fraction {f} with {} trades per day gives {expected:.3} crowded trades per stock-day",
                self.trades_per_day
            ));
        }
        out
    }

    /// Crowding fraction on observed day `k`.
    pub fn fraction_on(&self, k: usize) -> f64 {
        match self.ramp {
            Some(r) if self.n_days > 1 => r.from + (r.to - r.from) * k as f64 / (self.n_days - 1) as f64,
            Some(r) => r.from,
            None => self.crowding_fraction,
        }
    }

    pub fn stock_ids(&self) -> Vec<StockId> {
        let width = (self.n_stocks.saturating_sub(1)).to_string().len().max(3);
        (0..self.n_stocks)
            .map(|i| StockId::new(&format!("S{i:0width$}")))
            .collect()
    }

    /// Warm-up days followed by the observed days.
    pub fn calendar(&self) -> Vec<NaiveDate> {
        let mut dates = weekdays_before(self.start_date, self.warmup_days);
        dates.extend(weekday_calendar(self.start_date, self.n_days));
        dates
    }
}

/// SplitMix64 finaliser, used to derive independent seeds.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy)]
enum Purpose {
    Events = 1,
    Timing = 2,
    Setup = 3,
}

fn task_rng(seed: u64, purpose: Purpose, stock: usize, day: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ mix64(purpose as u64)));
    rng.set_stream(((stock as u64) << 32) | day as u64);
    rng
}

/// The planted flow and crowding actually used by the generator.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthTruth {
    /// Momentum rank signal over warm-up and observed days.
    pub signal: Panel,
    /// Slowed position at `planted_d` with unit scale.
    pub pi: Panel,
    pub delta_pi: Panel,
    /// Crowding fraction per observed day.
    pub crowding: Vec<f64>,
}

/// Files-worth of synthetic market data.
#[derive(Clone, Debug)]
pub struct SynthMarket {
    pub config: SynthConfig,
    pub trades: Vec<TradeRecord>,
    pub snapshots: Vec<BookSnapshot>,
    pub metaorders: Vec<MetaorderRecord>,
    pub prices: Vec<PriceRow>,
    pub truth: SynthTruth,
    pub warnings: Vec<String>,
}

/// The same market reduced straight to daily imbalances, skipping the
/// per-event records.
#[derive(Clone, Debug)]
pub struct SimulatedPanels {
    pub imbalances: DailyImbalancePanel,
    pub prices: PricePanel,
    pub truth: SynthTruth,
}

/// Events of one stock-day before they are timestamped.
struct StockDay {
    signs: Vec<Side>,
    volumes: Vec<u64>,
    book: Vec<(f64, f64)>,
    crowd_meta: Option<(Side, u64)>,
    /// `(side, span in days, volume)`.
    noise_metas: Vec<(Side, usize, u64)>,
    close: f64,
}

struct StockSetup {
    initial_price: f64,
    book_value: f64,
    shares: f64,
}

trait Sink {
    fn consume(&mut self, cfg: &SynthConfig, stock: usize, t: usize, prev_close: f64, day: &StockDay);
}

struct Dists {
    volume: LogNormal<f64>,
    depth: LogNormal<f64>,
    meta_volume: LogNormal<f64>,
    noise_metas: Option<Poisson<f64>>,
}

impl Dists {
    fn new(cfg: &SynthConfig) -> Self {
        Dists {
            volume: LogNormal::new(TRADE_VOLUME_MEDIAN.ln(), TRADE_VOLUME_SIGMA).expect("valid"),
            depth: LogNormal::new(DEPTH_MEDIAN.ln(), DEPTH_SIGMA).expect("valid"),
            meta_volume: LogNormal::new(NOISE_META_MEDIAN.ln(), 1.0).expect("valid"),
            noise_metas: (cfg.noise_metaorders_per_day > 0.0)
                .then(|| Poisson::new(cfg.noise_metaorders_per_day).expect("positive rate")),
        }
    }
}

fn draw_stock_day(
    cfg: &SynthConfig,
    dists: &Dists,
    stock: usize,
    t: usize,
    f: f64,
    flow: f64,
    prev_close: f64,
) -> StockDay {
    let mut rng = task_rng(cfg.seed, Purpose::Events, stock, t);
    let crowd_side = Side::from_sign(flow);
    let n = cfg.trades_per_day;
    let mut signs = Vec::with_capacity(n);
    let mut volumes = Vec::with_capacity(n);
    let mut crowded_volume = 0u64;
    for _ in 0..n {
        let crowded = crowd_side.is_some() && rng.random_bool(f);
        let side = match (crowded, crowd_side) {
            (true, Some(s)) => match cfg.execution_style {
                ExecutionStyle::Aggressive => s,
                ExecutionStyle::Passive => s.flipped(),
            },
            _ => {
                if rng.random_bool(0.5) {
                    Side::Buy
                } else {
                    Side::Sell
                }
            }
        };
        let volume = (dists.volume.sample(&mut rng).round() as u64).max(1);
        if crowded {
            crowded_volume += volume;
        }
        signs.push(side);
        volumes.push(volume);
    }
    let i_volume = volume_imbalance(&signs, &volumes).expect("equal lengths").unwrap_or(0.0);
    let z: f64 = StandardNormal.sample(&mut rng);
    let r = (cfg.noise_vol * z + cfg.impact_coefficient * i_volume).max(-0.5);

    let extra = match (cfg.execution_style, crowd_side) {
        (ExecutionStyle::Passive, Some(s)) => Some((s, cfg.passive_depth_scale * f * DEPTH_MEDIAN)),
        _ => None,
    };
    let book = (0..cfg.snapshots_per_day)
        .map(|_| {
            let (mut bid, mut ask) = (dists.depth.sample(&mut rng), dists.depth.sample(&mut rng));
            match extra {
                Some((Side::Buy, x)) => bid += x,
                Some((Side::Sell, x)) => ask += x,
                None => {}
            }
            (bid, ask)
        })
        .collect();

    let crowd_meta = match crowd_side {
        Some(s) if crowded_volume > 0 && rng.random_bool(cfg.metaorder_share) => Some((s, crowded_volume)),
        _ => None,
    };
    let k = dists.noise_metas.as_ref().map_or(0, |p| p.sample(&mut rng) as usize);
    let noise_metas = (0..k)
        .map(|_| {
            let side = if rng.random_bool(0.5) { Side::Buy } else { Side::Sell };
            let span = rng.random_range(1..=NOISE_META_MAX_SPAN);
            let volume = (dists.meta_volume.sample(&mut rng).round() as u64).max(1);
            (side, span, volume)
        })
        .collect();
    StockDay {
        signs,
        volumes,
        book,
        crowd_meta,
        noise_metas,
        close: prev_close * (1.0 + r),
    }
}

fn setup_stock(cfg: &SynthConfig, stock: usize) -> StockSetup {
    let mut rng = task_rng(cfg.seed, Purpose::Setup, stock, 0);
    let initial_price = rng.random_range(20.0..200.0);
    let bm = LogNormal::new(0.5f64.ln(), 0.5).expect("valid").sample(&mut rng);
    let shares = LogNormal::new(1e8f64.ln(), 1.0).expect("valid").sample(&mut rng);
    StockSetup {
        initial_price,
        book_value: initial_price * bm,
        shares,
    }
}

struct Outcome {
    closes: Vec<f64>,
    truth: SynthTruth,
    setups: Vec<StockSetup>,
    dates: Vec<NaiveDate>,
}

fn simulate(cfg: &SynthConfig, sink: &mut impl Sink) -> Result<Outcome> {
    cfg.validate()?;
    let dates = cfg.calendar();
    let (n, big_t, warm) = (cfg.n_stocks, dates.len(), cfg.warmup_days);
    let setups: Vec<StockSetup> = (0..n).map(|i| setup_stock(cfg, i)).collect();
    let dists = Dists::new(cfg);
    let decay = (-1.0 / cfg.planted_d).exp();

    let mut closes = vec![f64::NAN; n * big_t];
    let mut s = vec![f64::NAN; n * big_t];
    let mut pi = vec![f64::NAN; n * big_t];
    let mut dpi = vec![f64::NAN; n * big_t];
    let mut scores = vec![f64::NAN; n];
    for t in 0..big_t {
        for (i, sc) in scores.iter_mut().enumerate() {
            *sc = momentum_score(&closes[i * big_t..(i + 1) * big_t], t, cfg.momentum_lookback, cfg.momentum_skip);
        }
        let ranks = cross_sectional_rank(&scores);
        for i in 0..n {
            let k = i * big_t + t;
            s[k] = ranks[i];
            let prev = if t > 0 { pi[k - 1] } else { f64::NAN };
            // Same recursion as `slow_signal` with unit scale.
            pi[k] = match (prev.is_nan(), ranks[i].is_nan()) {
                (true, true) => f64::NAN,
                (true, false) => 1.0 * ranks[i],
                (false, true) => decay * prev,
                (false, false) => decay * prev + 1.0 * ranks[i],
            };
            if t > 0 {
                dpi[k] = pi[k] - prev;
            }
        }

        if t < warm {
            for (i, setup) in setups.iter().enumerate() {
                let k = i * big_t + t;
                closes[k] = if t == 0 {
                    setup.initial_price
                } else {
                    let mut rng = task_rng(cfg.seed, Purpose::Events, i, t);
                    let z: f64 = StandardNormal.sample(&mut rng);
                    closes[k - 1] * (1.0 + (cfg.noise_vol * z).max(-0.5))
                };
            }
            continue;
        }

        let f = cfg.fraction_on(t - warm);
        let prev: Vec<f64> = (0..n)
            .map(|i| if t == 0 { setups[i].initial_price } else { closes[i * big_t + t - 1] })
            .collect();
        let days: Vec<StockDay> = (0..n)
            .into_par_iter()
            .map(|i| draw_stock_day(cfg, &dists, i, t, f, dpi[i * big_t + t], prev[i]))
            .collect();
        for (i, day) in days.iter().enumerate() {
            sink.consume(cfg, i, t, prev[i], day);
            closes[i * big_t + t] = day.close;
        }
    }

    let stocks: Arc<[StockId]> = cfg.stock_ids().into();
    let grid: Arc<[NaiveDate]> = dates.clone().into();
    let panel = |v: Vec<f64>| Panel::new(stocks.clone(), grid.clone(), v).expect("grid");
    let truth = SynthTruth {
        signal: panel(s),
        pi: panel(pi),
        delta_pi: panel(dpi),
        crowding: (0..cfg.n_days).map(|k| cfg.fraction_on(k)).collect(),
    };
    Ok(Outcome {
        closes,
        truth,
        setups,
        dates,
    })
}

fn price_rows(cfg: &SynthConfig, out: &Outcome) -> Vec<PriceRow> {
    let stocks = cfg.stock_ids();
    let big_t = out.dates.len();
    let mut rows = Vec::with_capacity(stocks.len() * big_t);
    for (i, stock) in stocks.iter().enumerate() {
        for (t, &date) in out.dates.iter().enumerate() {
            let close = out.closes[i * big_t + t];
            rows.push(PriceRow {
                stock: stock.clone(),
                date,
                close,
                book_value: Some(out.setups[i].book_value),
                market_cap: Some(close * out.setups[i].shares),
            });
        }
    }
    rows
}

fn metaorder_records(
    stock: &StockId,
    dates: &[NaiveDate],
    t: usize,
    day: &StockDay,
) -> Vec<MetaorderRecord> {
    let mut out = Vec::new();
    if let Some((side, volume)) = day.crowd_meta {
        out.push(MetaorderRecord {
            client_id: CROWD_CLIENT.into(),
            stock: stock.clone(),
            start_date: dates[t],
            end_date: dates[t],
            side,
            volume,
        });
    }
    let last = dates.len() - 1;
    for (j, &(side, span, volume)) in day.noise_metas.iter().enumerate() {
        out.push(MetaorderRecord {
            client_id: format!("N{j:03}"),
            stock: stock.clone(),
            start_date: dates[t],
            end_date: dates[(t + span - 1).min(last)],
            side,
            volume,
        });
    }
    out
}

struct RecordSink {
    stocks: Vec<StockId>,
    dates: Vec<NaiveDate>,
    session: Session,
    trades: Vec<Vec<TradeRecord>>,
    snapshots: Vec<Vec<BookSnapshot>>,
    metaorders: Vec<Vec<MetaorderRecord>>,
}

impl Sink for RecordSink {
    fn consume(&mut self, cfg: &SynthConfig, i: usize, t: usize, prev_close: f64, day: &StockDay) {
        let stock = &self.stocks[i];
        let date = self.dates[t];
        let (open, len) = (self.session.open_ms, self.session.length_ms());
        let mut rng = task_rng(cfg.seed, Purpose::Timing, i, t);
        let mut times: Vec<u32> = (0..day.signs.len()).map(|_| open + rng.random_range(0..len)).collect();
        times.sort_unstable();
        let trades = &mut self.trades[i];
        for ((&side, &volume), &time_ms) in day.signs.iter().zip(&day.volumes).zip(&times) {
            let frac = (time_ms - open) as f64 / len as f64;
            let mid = prev_close + (day.close - prev_close) * frac;
            trades.push(TradeRecord {
                stock: stock.clone(),
                timestamp: Timestamp::new(date, time_ms),
                price: mid * (1.0 + side.sign() as f64 * HALF_SPREAD),
                mid_price: mid,
                volume,
            });
        }
        let step = len / day.book.len().max(1) as u32;
        for (k, &(bid, ask)) in day.book.iter().enumerate() {
            self.snapshots[i].push(BookSnapshot {
                stock: stock.clone(),
                timestamp: Timestamp::new(date, open + k as u32 * step),
                bid_volume: bid,
                ask_volume: ask,
            });
        }
        self.metaorders[i].extend(metaorder_records(stock, &self.dates, t, day));
    }
}

struct ActiveMeta {
    end: usize,
    side: Side,
    daily_volume: f64,
}

struct AggregateSink {
    stocks: Vec<StockId>,
    dates: Vec<NaiveDate>,
    opts: PanelOptions,
    active: Vec<Vec<ActiveMeta>>,
    rows: Vec<Vec<ImbalanceRow>>,
}

impl Sink for AggregateSink {
    fn consume(&mut self, _cfg: &SynthConfig, i: usize, t: usize, _prev_close: f64, day: &StockDay) {
        let mut acc = DayAggregator::default();
        for (&side, &volume) in day.signs.iter().zip(&day.volumes) {
            acc.add_trade(side, volume);
        }
        for &(bid, ask) in &day.book {
            acc.add_snapshot(bid, ask);
        }
        let active = &mut self.active[i];
        // Records carry weekday spans, and the calendar is consecutive weekdays,
        // so the active-day count is the index span.
        for m in metaorder_records(&self.stocks[i], &self.dates, t, day) {
            let end = t + self.dates[t..].iter().position(|d| *d == m.end_date).expect("end on calendar");
            active.push(ActiveMeta {
                end,
                side: m.side,
                daily_volume: m.volume as f64 / (end - t + 1) as f64,
            });
        }
        active.retain(|m| m.end >= t);
        for m in active.iter() {
            acc.add_metaorder(m.side, m.daily_volume);
        }
        self.rows[i].push(acc.finish(self.stocks[i].clone(), self.dates[t], &self.opts));
    }
}

/// Generates trades, snapshots, metaorders and prices.
pub fn generate_market(cfg: &SynthConfig) -> Result<SynthMarket> {
    let n = cfg.n_stocks;
    let mut sink = RecordSink {
        stocks: cfg.stock_ids(),
        dates: cfg.calendar(),
        session: Session::default(),
        trades: (0..n).map(|_| Vec::new()).collect(),
        snapshots: (0..n).map(|_| Vec::new()).collect(),
        metaorders: (0..n).map(|_| Vec::new()).collect(),
    };
    let out = simulate(cfg, &mut sink)?;
    let prices = price_rows(cfg, &out);
    Ok(SynthMarket {
        config: *cfg,
        trades: sink.trades.into_iter().flatten().collect(),
        snapshots: sink.snapshots.into_iter().flatten().collect(),
        metaorders: sink.metaorders.into_iter().flatten().collect(),
        prices,
        truth: out.truth,
        warnings: cfg.warnings(),
    })
}

/// Daily imbalances and prices of the market [`generate_market`] would
/// produce for `cfg`, without materialising individual events.
pub fn simulate_panels(cfg: &SynthConfig, opts: &PanelOptions) -> Result<SimulatedPanels> {
    let n = cfg.n_stocks;
    let mut sink = AggregateSink {
        stocks: cfg.stock_ids(),
        dates: cfg.calendar(),
        opts: *opts,
        active: (0..n).map(|_| Vec::new()).collect(),
        rows: (0..n).map(|_| Vec::new()).collect(),
    };
    let out = simulate(cfg, &mut sink)?;
    let prices = PricePanel::from_rows(&price_rows(cfg, &out));
    Ok(SimulatedPanels {
        imbalances: DailyImbalancePanel::from_rows(sink.rows.into_iter().flatten().collect()),
        prices,
        truth: out.truth,
    })
}

/// Echo of the generating configuration written next to the data files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSummary {
    pub schema: String,
    pub config: SynthConfig,
    pub n_trades: usize,
    pub n_snapshots: usize,
    pub n_metaorders: usize,
    pub n_price_rows: usize,
    pub warnings: Vec<String>,
}

pub const SYNTH_SCHEMA: &str = "crowding.synth/1";

/// File names inside a synthetic data directory.
pub const TRADES_FILE: &str = "trades.csv";
pub const BOOK_FILE: &str = "book.csv";
pub const METAORDERS_FILE: &str = "metaorders.csv";
pub const PRICES_FILE: &str = "prices.csv";
pub const SUMMARY_FILE: &str = "synth.json";

impl SynthMarket {
    pub fn summary(&self) -> SynthSummary {
        SynthSummary {
            schema: SYNTH_SCHEMA.into(),
            config: self.config,
            n_trades: self.trades.len(),
            n_snapshots: self.snapshots.len(),
            n_metaorders: self.metaorders.len(),
            n_price_rows: self.prices.len(),
            warnings: self.warnings.clone(),
        }
    }

    /// Writes the four market files and the summary into `dir`; returns the paths.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| CrowdingError::io(dir, e))?;
        let path = |name: &str| dir.join(name);
        write_trades(path(TRADES_FILE), &self.trades)?;
        write_book_snapshots(path(BOOK_FILE), &self.snapshots)?;
        write_metaorders(path(METAORDERS_FILE), &self.metaorders)?;
        write_prices(path(PRICES_FILE), &self.prices)?;
        let json = serde_json::to_string_pretty(&self.summary())?;
        fs::write(path(SUMMARY_FILE), json + "\n").map_err(|e| CrowdingError::io(path(SUMMARY_FILE), e))?;
        Ok([TRADES_FILE, BOOK_FILE, METAORDERS_FILE, PRICES_FILE, SUMMARY_FILE]
            .iter()
            .map(|n| path(n))
            .collect())
    }
}
