//! Zero-intelligence order flow in event time, plus manual shock injection.
//!
//! Each step draws one of three actions: deposit a unit limit order at a
//! uniform price in a band of width `d` behind the mid, fire a unit market
//! order, or evaporate one resting order chosen uniformly. A shock clears
//! every order within `j` ticks of the best price on one side. The engine
//! is a pure function of its config, including the seed.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::book::{BookError, BookStats, OrderBook, OrderId, Price, Side};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FlowError {
    #[error("rates sum to {0}, expected 1 within 1e-12")]
    BadRates(f64),
    #[error("rate {name} is negative ({value})")]
    NegativeRate { name: &'static str, value: f64 },
    #[error("{name} must be at least 1")]
    BandTooNarrow { name: &'static str },
    #[error("shock frequency {0} outside [0, 1]")]
    BadFrequency(f64),
    #[error("shock period {period} cannot hold a {span}-step event window")]
    WindowsOverlap { period: u64, span: u64 },
    #[error("total_steps {total} must exceed warmup_steps {warmup}")]
    BadSpan { total: u64, warmup: u64 },
    #[error("initial price {0} leaves no room for the deposition band")]
    BadInitialPrice(i64),
    #[error("shock target side {0} is empty")]
    EmptyTargetSide(Side),
}

/// How `run_experiment` picks the direction of each scheduled shock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionMode {
    #[default]
    Alternate,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    /// Limit-order (deposition) rate per step.
    pub p_lo: f64,
    /// Market-order rate per step.
    pub p_mo: f64,
    /// Cancellation (evaporation) rate per step.
    pub p_c: f64,
    /// Deposition band width, ticks.
    pub d: i64,
    /// Shock clearing depth, ticks.
    pub j: i64,
    /// Shock frequency, shocks per step; 0 disables shocks.
    pub f: f64,
    pub warmup_steps: u64,
    /// Measured span after warmup. Shocks are scheduled inside it; the run
    /// extends past it only to finish the last event window.
    pub total_steps: u64,
    pub seed: u64,
    /// Price the book is seeded around. Must sit far enough from zero that
    /// the band never gets clamped during normal operation.
    pub initial_price: i64,
    /// Unit orders pre-seeded per side, uniform over the deposition band,
    /// before the warmup begins. Zero starts from a near-empty book.
    pub initial_depth: u64,
    /// Steps retained before each shock.
    pub w_pre: u64,
    /// Steps retained after each shock.
    pub w_post: u64,
    pub shock_directions: DirectionMode,
}

impl Default for FlowConfig {
    /// The reference experiment: rates (0.5, 0.16, 0.34), band and shock
    /// depth 1000 ticks, a shock every 5*10^4 steps across a 5*10^6-step
    /// measured span, so 100 events.
    fn default() -> Self {
        FlowConfig {
            p_lo: 0.5,
            p_mo: 0.16,
            p_c: 0.34,
            d: 1000,
            j: 1000,
            f: 2e-5,
            warmup_steps: 100_000,
            total_steps: 5_000_000,
            seed: 1,
            initial_price: 1_000_000,
            initial_depth: 10_000,
            w_pre: 50,
            w_post: 10_000,
            shock_directions: DirectionMode::Alternate,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<(), FlowError> {
        for (name, value) in [("p_lo", self.p_lo), ("p_mo", self.p_mo), ("p_c", self.p_c)] {
            if value < 0.0 {
                return Err(FlowError::NegativeRate { name, value });
            }
        }
        let sum = self.p_lo + self.p_mo + self.p_c;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(FlowError::BadRates(sum));
        }
        if self.d < 1 {
            return Err(FlowError::BandTooNarrow { name: "d" });
        }
        if self.j < 1 {
            return Err(FlowError::BandTooNarrow { name: "j" });
        }
        if !(0.0..=1.0).contains(&self.f) || !self.f.is_finite() {
            return Err(FlowError::BadFrequency(self.f));
        }
        if self.total_steps <= self.warmup_steps {
            return Err(FlowError::BadSpan {
                total: self.total_steps,
                warmup: self.warmup_steps,
            });
        }
        if let Some(period) = self.shock_period() {
            let span = self.w_pre + self.w_post;
            if period < span {
                return Err(FlowError::WindowsOverlap { period, span });
            }
        }
        if self.initial_price <= self.d {
            return Err(FlowError::BadInitialPrice(self.initial_price));
        }
        Ok(())
    }

    /// Steps between scheduled shocks; `None` when shocks are disabled.
    pub fn shock_period(&self) -> Option<u64> {
        (self.f > 0.0).then(|| (1.0 / self.f).round() as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    LoBuy,
    LoSell,
    MoBuy,
    MoSell,
    CBuy,
    CSell,
    Skip,
    Shock,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::LoBuy => "lo_buy",
            Action::LoSell => "lo_sell",
            Action::MoBuy => "mo_buy",
            Action::MoSell => "mo_sell",
            Action::CBuy => "c_buy",
            Action::CSell => "c_sell",
            Action::Skip => "skip",
            Action::Shock => "shock",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "lo_buy" => Action::LoBuy,
            "lo_sell" => Action::LoSell,
            "mo_buy" => Action::MoBuy,
            "mo_sell" => Action::MoSell,
            "c_buy" => Action::CBuy,
            "c_sell" => Action::CSell,
            "skip" => Action::Skip,
            "shock" => Action::Shock,
            other => return Err(format!("unknown action {other:?}")),
        })
    }
}

/// One event-time step. `stats` is absent whenever one side of the book is
/// empty; `price` is the tick the action touched (deposit price, trade
/// price, cancelled order's price), absent for skips and shocks.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: u64,
    pub action: Action,
    pub price: Option<Price>,
    pub stats: Option<BookStats>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShockDirection {
    /// Clear bids in `[b - j, b]`; the mid jumps down.
    Drop,
    /// Clear asks in `[a, a + j]`; the mid jumps up.
    Rise,
}

impl ShockDirection {
    pub fn cleared_side(self) -> Side {
        match self {
            ShockDirection::Drop => Side::Buy,
            ShockDirection::Rise => Side::Sell,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            ShockDirection::Drop => ShockDirection::Rise,
            ShockDirection::Rise => ShockDirection::Drop,
        }
    }
}

/// What a shock did. `emptied` means the cleared side has no orders left;
/// the engine keeps depositing around the last valid mid until it refills.
#[derive(Debug, Clone, PartialEq)]
pub struct ShockReport {
    pub direction: ShockDirection,
    pub orders_removed: usize,
    pub best_before: Price,
    pub best_after: Option<Price>,
    pub mid_before: Option<f64>,
    pub mid_after: Option<f64>,
    /// `mid_after - mid_before`; negative for drops.
    pub realized_move: Option<f64>,
    pub emptied: bool,
}

pub struct FlowEngine {
    config: FlowConfig,
    book: OrderBook,
    rng: ChaCha8Rng,
    t: u64,
    last_mid: f64,
    next_id: OrderId,
}

enum Kind {
    Lo,
    Mo,
    C,
}

impl FlowEngine {
    /// Seeds one bid at `initial_price - 1`, one ask at `initial_price + 1`
    /// (so the starting mid is `initial_price`), then `initial_depth` unit
    /// orders per side uniform over the deposition band.
    pub fn new(config: FlowConfig) -> Result<Self, FlowError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut book = OrderBook::new();
        let p0 = config.initial_price;
        let mut next_id: OrderId = 0;
        let mut seed_order = |book: &mut OrderBook, side, price| {
            book.insert_limit(side, price, 1, next_id)
                .expect("seed orders cannot cross an empty book");
            next_id += 1;
        };
        seed_order(&mut book, Side::Buy, p0 - 1);
        seed_order(&mut book, Side::Sell, p0 + 1);
        for _ in 0..config.initial_depth {
            let price = rng.random_range(p0 - config.d..=p0 - 1);
            seed_order(&mut book, Side::Buy, price);
        }
        for _ in 0..config.initial_depth {
            let price = rng.random_range(p0 + 1..=p0 + config.d);
            seed_order(&mut book, Side::Sell, price);
        }
        Ok(FlowEngine {
            last_mid: p0 as f64,
            config,
            book,
            rng,
            t: 0,
            next_id,
        })
    }

    /// Takes over an existing book; `next_id` must exceed every resident id.
    pub fn with_book(config: FlowConfig, book: OrderBook, next_id: OrderId) -> Result<Self, FlowError> {
        config.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        let last_mid = book
            .stats()
            .map(|s| s.mid)
            .unwrap_or(config.initial_price as f64);
        Ok(FlowEngine {
            config,
            book,
            rng,
            t: 0,
            last_mid,
            next_id,
        })
    }

    pub fn book(&self) -> &OrderBook {
        &self.book
    }

    pub fn config(&self) -> &FlowConfig {
        &self.config
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    /// Mid from the last step where both sides were occupied; deposition
    /// centers here while a side is empty.
    pub fn last_mid(&self) -> f64 {
        self.last_mid
    }

    pub fn step(&mut self) -> StepRecord {
        self.t += 1;
        let kind = {
            let u: f64 = self.rng.random();
            if u < self.config.p_lo {
                Kind::Lo
            } else if u < self.config.p_lo + self.config.p_mo {
                Kind::Mo
            } else {
                Kind::C
            }
        };
        let side = if self.rng.random::<bool>() {
            Side::Buy
        } else {
            Side::Sell
        };
        let (action, price) = self.apply(kind, side);
        self.finish_step(action, price)
    }

    fn apply(&mut self, kind: Kind, side: Side) -> (Action, Option<Price>) {
        match kind {
            Kind::Lo => {
                let Some((lo, hi)) = self.deposit_band(side) else {
                    return (Action::Skip, None);
                };
                let price = self.rng.random_range(lo..=hi);
                let id = self.next_id;
                self.next_id += 1;
                self.book
                    .insert_limit(side, price, 1, id)
                    .expect("deposition band crossed the book");
                let action = match side {
                    Side::Buy => Action::LoBuy,
                    Side::Sell => Action::LoSell,
                };
                (action, Some(price))
            }
            Kind::Mo => {
                if self.book.side_volume(side.opposite()) < 1 {
                    return (Action::Skip, None);
                }
                let fills = self
                    .book
                    .execute_market(side, 1)
                    .expect("liquidity vanished mid-step");
                let action = match side {
                    Side::Buy => Action::MoBuy,
                    Side::Sell => Action::MoSell,
                };
                (action, Some(fills[0].price))
            }
            Kind::C => match self.book.cancel_uniform(side, &mut self.rng) {
                Ok(order) => {
                    let action = match side {
                        Side::Buy => Action::CBuy,
                        Side::Sell => Action::CSell,
                    };
                    (action, Some(order.price))
                }
                Err(BookError::EmptySide(_)) => (Action::Skip, None),
                Err(e) => unreachable!("uniform cancel failed: {e}"),
            },
        }
    }

    /// Integer tick band for a deposit: `[ceil(m - d), floor(m)]` for buys,
    /// `[ceil(m), floor(m + d)]` for sells. While the opposite best exists
    /// the near edge is additionally capped one tick away from it, which
    /// only matters when `m` is stale after a side emptied. Prices are kept
    /// positive so log stats stay defined. `None` when the band is empty.
    fn deposit_band(&self, side: Side) -> Option<(Price, Price)> {
        let m = self.last_mid;
        let d = self.config.d as f64;
        match side {
            Side::Buy => {
                let mut hi = m.floor() as Price;
                if let Some(a) = self.book.best_ask() {
                    hi = hi.min(a - 1);
                }
                let lo = ((m - d).ceil() as Price).max(1);
                (lo <= hi).then_some((lo, hi))
            }
            Side::Sell => {
                let mut lo = m.ceil() as Price;
                if let Some(b) = self.book.best_bid() {
                    lo = lo.max(b + 1);
                }
                let hi = (m + d).floor() as Price;
                (lo <= hi).then_some((lo, hi))
            }
        }
    }

    fn finish_step(&mut self, action: Action, price: Option<Price>) -> StepRecord {
        let stats = self.book.stats().ok();
        if let Some(s) = &stats {
            self.last_mid = s.mid;
        }
        StepRecord {
            t: self.t,
            action,
            price,
            stats,
        }
    }

    /// Clears every resting order within `j` ticks of the best price on the
    /// shocked side (band closed on both ends). Does not advance time; see
    /// [`FlowEngine::shock_step`].
    pub fn inject_shock(&mut self, direction: ShockDirection) -> Result<ShockReport, FlowError> {
        let side = direction.cleared_side();
        let best = match side {
            Side::Buy => self.book.best_bid(),
            Side::Sell => self.book.best_ask(),
        }
        .ok_or(FlowError::EmptyTargetSide(side))?;
        let mid_before = self.book.stats().ok().map(|s| s.mid);
        let j = self.config.j;
        let (lo, hi) = match direction {
            ShockDirection::Drop => (best - j, best),
            ShockDirection::Rise => (best, best + j),
        };
        let removed = self.book.clear_price_band(side, lo, hi);
        let best_after = match side {
            Side::Buy => self.book.best_bid(),
            Side::Sell => self.book.best_ask(),
        };
        let stats_after = self.book.stats().ok();
        if let Some(s) = &stats_after {
            self.last_mid = s.mid;
        }
        let mid_after = stats_after.map(|s| s.mid);
        Ok(ShockReport {
            direction,
            orders_removed: removed.len(),
            best_before: best,
            best_after,
            mid_before,
            mid_after,
            realized_move: mid_before.zip(mid_after).map(|(before, after)| after - before),
            emptied: best_after.is_none(),
        })
    }

    /// A step consumed by a shock: no flow action, the record carries the
    /// post-shock book state.
    pub fn shock_step(
        &mut self,
        direction: ShockDirection,
    ) -> Result<(StepRecord, ShockReport), FlowError> {
        let report = self.inject_shock(direction)?;
        self.t += 1;
        let record = self.finish_step(Action::Shock, None);
        Ok((record, report))
    }

    fn coin_direction(&mut self) -> ShockDirection {
        if self.rng.random::<bool>() {
            ShockDirection::Drop
        } else {
            ShockDirection::Rise
        }
    }

    fn order_count(&self) -> u64 {
        (self.book.n_orders(Side::Buy) + self.book.n_orders(Side::Sell)) as u64
    }
}

/// All records around one shock, `w_pre` before through `w_post` after.
/// Relative time of a record is `record.t - shock_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventWindow {
    /// 1-based index in the shock schedule.
    pub event_id: u32,
    pub shock_t: u64,
    pub direction: ShockDirection,
    pub report: ShockReport,
    pub records: Vec<StepRecord>,
}

/// Means over the measured steps that sit outside every event window.
/// Gap means only average steps where the gap is defined. `half_mean_orders`
/// splits the whole measured span (windows included) in two and averages
/// the resident order count over each half.
#[derive(Debug, Clone, PartialEq)]
pub struct Baseline {
    /// Baseline steps carrying full book stats.
    pub steps: u64,
    pub mean_spread: f64,
    pub mean_log_spread: f64,
    /// Mean |mid_t - mid_{t-1}| over consecutive baseline steps.
    pub mean_volatility: f64,
    pub mean_gap1_bid: f64,
    pub mean_gap1_ask: f64,
    /// Both sides pooled.
    pub mean_gap1: f64,
    pub mean_imbalance_buy: f64,
    pub mean_n_bid: f64,
    pub mean_n_ask: f64,
    pub mean_v_buy: f64,
    pub mean_v_sell: f64,
    pub half_mean_orders: (f64, f64),
}

#[derive(Default)]
struct BaselineAccum {
    n: u64,
    spread: f64,
    log_spread: f64,
    imb: f64,
    n_bid: f64,
    n_ask: f64,
    v_buy: f64,
    v_sell: f64,
    g1b: f64,
    g1b_n: u64,
    g1a: f64,
    g1a_n: u64,
    vol: f64,
    vol_n: u64,
    prev_mid: Option<f64>,
    half: [(f64, u64); 2],
}

impl BaselineAccum {
    fn add(&mut self, record: &StepRecord) {
        let Some(s) = &record.stats else {
            self.prev_mid = None;
            return;
        };
        self.n += 1;
        self.spread += s.spread_ticks as f64;
        self.log_spread += s.log_spread;
        self.imb += s.imbalance_buy;
        self.n_bid += s.n_bid_orders as f64;
        self.n_ask += s.n_ask_orders as f64;
        self.v_buy += s.volume_buy as f64;
        self.v_sell += s.volume_sell as f64;
        if let Some(g) = s.gap1_bid {
            self.g1b += g as f64;
            self.g1b_n += 1;
        }
        if let Some(g) = s.gap1_ask {
            self.g1a += g as f64;
            self.g1a_n += 1;
        }
        if let Some(prev) = self.prev_mid {
            self.vol += (s.mid - prev).abs();
            self.vol_n += 1;
        }
        self.prev_mid = Some(s.mid);
    }

    fn break_chain(&mut self) {
        self.prev_mid = None;
    }

    fn add_half(&mut self, which: usize, orders: u64) {
        self.half[which].0 += orders as f64;
        self.half[which].1 += 1;
    }

    fn finish(self) -> Baseline {
        let mean = |sum: f64, n: u64| sum / n as f64;
        Baseline {
            steps: self.n,
            mean_spread: mean(self.spread, self.n),
            mean_log_spread: mean(self.log_spread, self.n),
            mean_volatility: mean(self.vol, self.vol_n),
            mean_gap1_bid: mean(self.g1b, self.g1b_n),
            mean_gap1_ask: mean(self.g1a, self.g1a_n),
            mean_gap1: mean(self.g1b + self.g1a, self.g1b_n + self.g1a_n),
            mean_imbalance_buy: mean(self.imb, self.n),
            mean_n_bid: mean(self.n_bid, self.n),
            mean_n_ask: mean(self.n_ask, self.n),
            mean_v_buy: mean(self.v_buy, self.n),
            mean_v_sell: mean(self.v_sell, self.n),
            half_mean_orders: (
                mean(self.half[0].0, self.half[0].1),
                mean(self.half[1].0, self.half[1].1),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub windows: Vec<EventWindow>,
    pub baseline: Baseline,
    pub steps_run: u64,
}

/// Warm up, then run the measured span with shocks every `1/f` steps,
/// retaining an event window per shock and streaming everything outside
/// the windows into baseline means. The run extends past `total_steps`
/// only to complete the final window. A shock whose target side happens
/// to be empty is replaced by an ordinary step and collects no window.
pub fn run_experiment(config: &FlowConfig) -> Result<ExperimentResult, FlowError> {
    let mut engine = FlowEngine::new(config.clone())?;
    let warmup = config.warmup_steps;
    let total = config.total_steps;
    let end_measured = warmup + total;
    let period = config.shock_period();
    let n_shocks = period.map_or(0, |p| total / p);
    let run_len = match period {
        Some(p) if n_shocks > 0 => end_measured.max(warmup + n_shocks * p + config.w_post),
        _ => end_measured,
    };
    let mut next_dir = ShockDirection::Drop;
    let mut pre: VecDeque<StepRecord> = VecDeque::with_capacity(config.w_pre as usize + 1);
    let mut open: Option<EventWindow> = None;
    let mut windows: Vec<EventWindow> = Vec::with_capacity(n_shocks as usize);
    let mut accum = BaselineAccum::default();

    for t in 1..=run_len {
        let shock_index = match period {
            Some(p) if t > warmup && (t - warmup) % p == 0 && (t - warmup) / p <= n_shocks => {
                Some((t - warmup) / p)
            }
            _ => None,
        };
        let (record, shock) = match shock_index {
            Some(_) => {
                let direction = match config.shock_directions {
                    DirectionMode::Alternate => {
                        let d = next_dir;
                        next_dir = next_dir.flip();
                        d
                    }
                    DirectionMode::Random => engine.coin_direction(),
                };
                match engine.shock_step(direction) {
                    Ok((record, report)) => (record, Some(report)),
                    Err(FlowError::EmptyTargetSide(_)) => (engine.step(), None),
                    Err(e) => return Err(e),
                }
            }
            None => (engine.step(), None),
        };

        if let Some(report) = shock {
            debug_assert!(open.is_none(), "windows cannot overlap");
            let mut window = EventWindow {
                event_id: shock_index.unwrap() as u32,
                shock_t: t,
                direction: report.direction,
                report,
                records: Vec::with_capacity((config.w_pre + 1 + config.w_post) as usize),
            };
            window.records.extend(pre.drain(..));
            window.records.push(record.clone());
            if config.w_post == 0 {
                windows.push(window);
            } else {
                open = Some(window);
            }
        } else if let Some(window) = open.as_mut() {
            window.records.push(record.clone());
            if record.t - window.shock_t >= config.w_post {
                windows.push(open.take().unwrap());
            }
        } else {
            pre.push_back(record.clone());
            if pre.len() > config.w_pre as usize {
                pre.pop_front();
            }
        }

        let measured = t > warmup && t <= end_measured;
        if !measured {
            accum.break_chain();
            continue;
        }
        let q = t - warmup;
        accum.add_half(if q <= total / 2 { 0 } else { 1 }, engine.order_count());
        let in_window = match period {
            None => false,
            Some(p) => {
                let k_prev = q / p;
                let r = q % p;
                let near_prev = k_prev >= 1 && k_prev <= n_shocks && r <= config.w_post && {
                    // r == 0 is the shock step itself
                    r == q - k_prev * p
                };
                let k_next = if r == 0 { k_prev } else { k_prev + 1 };
                let near_next = r != 0 && k_next <= n_shocks && (k_next * p - q) <= config.w_pre;
                near_prev || near_next
            }
        };
        if in_window {
            accum.break_chain();
        } else {
            accum.add(&record);
        }
    }
    debug_assert!(open.is_none(), "run must extend past the last window");
    Ok(ExperimentResult {
        windows,
        baseline: accum.finish(),
        steps_run: run_len,
    })
}

/// Absolute mid change per step, in ticks. Length is one less than the
/// input; model prices sit at an arbitrary level, so tick differences are
/// used instead of log returns.
pub fn model_volatility(mids: &[f64]) -> Vec<f64> {
    mids.windows(2).map(|w| (w[1] - w[0]).abs()).collect()
}
