//! Price-time-priority limit order book on an integer tick grid.
//!
//! Each side is a sorted map from price level to a FIFO queue of resting
//! orders. Volume totals are maintained incrementally and can be checked by
//! full rescan. A side registry of order ids supports O(1) uniform random
//! cancelation when all resting volumes are 1 (the simulation hot path).

use std::collections::{BTreeMap, HashMap, VecDeque};

use rand::Rng;
use thiserror::Error;

pub type Price = i64;
pub type Volume = u64;
pub type OrderId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Buy => Side::Sell,
            Side::Sell => Side::Buy,
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Buy => write!(f, "buy"),
            Side::Sell => write!(f, "sell"),
        }
    }
}

/// A resting limit order. `seq` is the book-assigned arrival counter that
/// breaks ties inside a price level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Order {
    pub id: OrderId,
    pub side: Side,
    pub price: Price,
    pub volume: Volume,
    pub seq: u64,
}

/// One execution against a resting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fill {
    pub price: Price,
    pub volume: Volume,
    pub maker_id: OrderId,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BookError {
    #[error("{side} limit at {price} crosses opposite best {opposite_best}")]
    CrossingPrice {
        side: Side,
        price: Price,
        opposite_best: Price,
    },
    #[error("order id {0} already resident")]
    DuplicateId(OrderId),
    #[error("market order for {requested} against resting volume {available}")]
    InsufficientLiquidity { requested: Volume, available: Volume },
    #[error("{0} side is empty")]
    EmptySide(Side),
    #[error("order id {0} not resident")]
    UnknownId(OrderId),
    #[error("book is one-sided (bid {bid:?}, ask {ask:?})")]
    PartialBook {
        bid: Option<Price>,
        ask: Option<Price>,
    },
}

/// Snapshot of the book observables. Gaps are distances in ticks between
/// consecutive occupied levels on one side (1 when adjacent) and are `None`
/// when the side has too few occupied levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BookStats {
    pub best_bid: Price,
    pub best_ask: Price,
    pub mid: f64,
    pub spread_ticks: i64,
    pub log_spread: f64,
    pub gap1_bid: Option<i64>,
    pub gap2_bid: Option<i64>,
    pub gap1_ask: Option<i64>,
    pub gap2_ask: Option<i64>,
    pub imbalance_buy: f64,
    pub imbalance_sell: f64,
    pub n_bid_orders: usize,
    pub n_ask_orders: usize,
    pub volume_buy: Volume,
    pub volume_sell: Volume,
}

/// Order-id registry with O(1) insert, remove and indexed access.
#[derive(Debug, Clone, Default)]
struct IdRegistry {
    ids: Vec<OrderId>,
    pos: HashMap<OrderId, usize>,
}

impl IdRegistry {
    fn insert(&mut self, id: OrderId) {
        self.pos.insert(id, self.ids.len());
        self.ids.push(id);
    }

    fn remove(&mut self, id: OrderId) {
        let at = self.pos.remove(&id).expect("registry out of sync");
        let last = self.ids.pop().expect("registry out of sync");
        if last != id {
            self.ids[at] = last;
            self.pos.insert(last, at);
        }
    }

    fn len(&self) -> usize {
        self.ids.len()
    }
}

#[derive(Debug, Clone, Default)]
pub struct OrderBook {
    bids: BTreeMap<Price, VecDeque<Order>>,
    asks: BTreeMap<Price, VecDeque<Order>>,
    volume_buy: Volume,
    volume_sell: Volume,
    locations: HashMap<OrderId, (Side, Price)>,
    bid_ids: IdRegistry,
    ask_ids: IdRegistry,
    // resident orders with volume != 1, per side; uniform cancelation takes
    // the O(1) path only when this is zero
    non_unit_bids: usize,
    non_unit_asks: usize,
    next_seq: u64,
}

impl OrderBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn best_bid(&self) -> Option<Price> {
        self.bids.last_key_value().map(|(p, _)| *p)
    }

    pub fn best_ask(&self) -> Option<Price> {
        self.asks.first_key_value().map(|(p, _)| *p)
    }

    pub fn side_volume(&self, side: Side) -> Volume {
        match side {
            Side::Buy => self.volume_buy,
            Side::Sell => self.volume_sell,
        }
    }

    pub fn n_orders(&self, side: Side) -> usize {
        match side {
            Side::Buy => self.bid_ids.len(),
            Side::Sell => self.ask_ids.len(),
        }
    }

    pub fn contains_id(&self, id: OrderId) -> bool {
        self.locations.contains_key(&id)
    }

    /// Occupied levels from best to worst: descending prices for bids,
    /// ascending for asks.
    pub fn levels(&self, side: Side) -> impl Iterator<Item = (Price, &VecDeque<Order>)> {
        let (fwd, rev): (
            Option<std::collections::btree_map::Iter<'_, Price, VecDeque<Order>>>,
            Option<std::iter::Rev<std::collections::btree_map::Iter<'_, Price, VecDeque<Order>>>>,
        ) = match side {
            Side::Buy => (None, Some(self.bids.iter().rev())),
            Side::Sell => (Some(self.asks.iter()), None),
        };
        fwd.into_iter()
            .flatten()
            .chain(rev.into_iter().flatten())
            .map(|(p, q)| (*p, q))
    }

    fn levels_mut(&mut self, side: Side) -> &mut BTreeMap<Price, VecDeque<Order>> {
        match side {
            Side::Buy => &mut self.bids,
            Side::Sell => &mut self.asks,
        }
    }

    fn registry_mut(&mut self, side: Side) -> &mut IdRegistry {
        match side {
            Side::Buy => &mut self.bid_ids,
            Side::Sell => &mut self.ask_ids,
        }
    }

    fn add_volume(&mut self, side: Side, v: Volume) {
        match side {
            Side::Buy => self.volume_buy += v,
            Side::Sell => self.volume_sell += v,
        }
    }

    fn sub_volume(&mut self, side: Side, v: Volume) {
        match side {
            Side::Buy => self.volume_buy -= v,
            Side::Sell => self.volume_sell -= v,
        }
    }

    fn bump_non_unit(&mut self, side: Side, volume: Volume, delta: isize) {
        if volume != 1 {
            let slot = match side {
                Side::Buy => &mut self.non_unit_bids,
                Side::Sell => &mut self.non_unit_asks,
            };
            *slot = slot.checked_add_signed(delta).expect("non-unit count out of sync");
        }
    }

    /// Appends an order at the tail of its price level. The price must not
    /// cross the opposite best; callers feeding the book from stochastic
    /// flow or replayed logs guarantee that.
    pub fn insert_limit(
        &mut self,
        side: Side,
        price: Price,
        volume: Volume,
        id: OrderId,
    ) -> Result<Order, BookError> {
        assert!(volume >= 1, "order volume must be at least 1");
        let crossed = match side {
            Side::Buy => self.best_ask().filter(|a| price >= *a),
            Side::Sell => self.best_bid().filter(|b| price <= *b),
        };
        if let Some(opposite_best) = crossed {
            return Err(BookError::CrossingPrice {
                side,
                price,
                opposite_best,
            });
        }
        if self.locations.contains_key(&id) {
            return Err(BookError::DuplicateId(id));
        }
        let order = Order {
            id,
            side,
            price,
            volume,
            seq: self.next_seq,
        };
        self.next_seq += 1;
        self.levels_mut(side).entry(price).or_default().push_back(order);
        self.locations.insert(id, (side, price));
        self.registry_mut(side).insert(id);
        self.add_volume(side, volume);
        self.bump_non_unit(side, volume, 1);
        Ok(order)
    }

    /// Executes a market order of `side` against the opposite side, best
    /// price first, FIFO within a level. Partial consumption of a resting
    /// order leaves the remainder at the head of its queue.
    pub fn execute_market(
        &mut self,
        side: Side,
        volume: Volume,
    ) -> Result<Vec<Fill>, BookError> {
        assert!(volume >= 1, "market volume must be at least 1");
        let against = side.opposite();
        let available = self.side_volume(against);
        if available < volume {
            return Err(BookError::InsufficientLiquidity {
                requested: volume,
                available,
            });
        }
        let mut fills = Vec::new();
        let mut remaining = volume;
        while remaining > 0 {
            let best = match against {
                Side::Sell => self.best_ask(),
                Side::Buy => self.best_bid(),
            }
            .expect("volume accounting out of sync");
            let queue = self.levels_mut(against).get_mut(&best).expect("level vanished");
            let maker = queue.front_mut().expect("empty level queue");
            let take = remaining.min(maker.volume);
            let maker_id = maker.id;
            maker.volume -= take;
            let consumed = maker.volume == 0;
            if consumed {
                queue.pop_front();
                if queue.is_empty() {
                    self.levels_mut(against).remove(&best);
                }
                self.locations.remove(&maker_id);
                self.registry_mut(against).remove(maker_id);
                self.bump_non_unit(against, take, -1);
            } else {
                // still resident with shrunken volume; non-unit bookkeeping
                // only changes if it shrank down to exactly 1
                if maker.volume == 1 {
                    self.bump_non_unit(against, 2, -1);
                }
            }
            self.sub_volume(against, take);
            fills.push(Fill {
                price: best,
                volume: take,
                maker_id,
            });
            remaining -= take;
        }
        Ok(fills)
    }

    /// Removes one resting order on `side`, each unit of resting volume
    /// equally likely. With unit volumes every order has probability 1/N.
    pub fn cancel_uniform<R: Rng + ?Sized>(
        &mut self,
        side: Side,
        rng: &mut R,
    ) -> Result<Order, BookError> {
        let n = self.n_orders(side);
        if n == 0 {
            return Err(BookError::EmptySide(side));
        }
        let non_unit = match side {
            Side::Buy => self.non_unit_bids,
            Side::Sell => self.non_unit_asks,
        };
        let id = if non_unit == 0 {
            let at = rng.random_range(0..n);
            match side {
                Side::Buy => self.bid_ids.ids[at],
                Side::Sell => self.ask_ids.ids[at],
            }
        } else {
            // volume-weighted walk; only replayed books with mixed volumes
            // take this path
            let registry = match side {
                Side::Buy => &self.bid_ids,
                Side::Sell => &self.ask_ids,
            };
            let target = rng.random_range(0..self.side_volume(side));
            let mut acc = 0u64;
            let mut picked = registry.ids[0];
            for &cand in &registry.ids {
                let (_, price) = self.locations[&cand];
                let level = match side {
                    Side::Buy => &self.bids[&price],
                    Side::Sell => &self.asks[&price],
                };
                let vol = level
                    .iter()
                    .find(|o| o.id == cand)
                    .expect("location out of sync")
                    .volume;
                acc += vol;
                if target < acc {
                    picked = cand;
                    break;
                }
            }
            picked
        };
        self.remove_resident(id)
    }

    /// Removes a specific resting order.
    pub fn cancel_by_id(&mut self, id: OrderId) -> Result<Order, BookError> {
        if !self.locations.contains_key(&id) {
            return Err(BookError::UnknownId(id));
        }
        self.remove_resident(id)
    }

    fn remove_resident(&mut self, id: OrderId) -> Result<Order, BookError> {
        let (side, price) = *self.locations.get(&id).expect("checked above");
        let queue = self.levels_mut(side).get_mut(&price).expect("location out of sync");
        let at = queue
            .iter()
            .position(|o| o.id == id)
            .expect("location out of sync");
        let order = queue.remove(at).expect("index in range");
        if queue.is_empty() {
            self.levels_mut(side).remove(&price);
        }
        self.locations.remove(&id);
        self.registry_mut(side).remove(id);
        self.sub_volume(side, order.volume);
        self.bump_non_unit(side, order.volume, -1);
        Ok(order)
    }

    /// Removes every resting order on `side` with price in `[lo, hi]` and
    /// returns them. Used for shock injection.
    pub fn clear_price_band(&mut self, side: Side, lo: Price, hi: Price) -> Vec<Order> {
        let prices: Vec<Price> = self
            .levels_mut(side)
            .range(lo..=hi)
            .map(|(p, _)| *p)
            .collect();
        let mut removed = Vec::new();
        for price in prices {
            let queue = self.levels_mut(side).remove(&price).expect("key just listed");
            for order in queue {
                self.locations.remove(&order.id);
                self.registry_mut(side).remove(order.id);
                self.sub_volume(side, order.volume);
                self.bump_non_unit(side, order.volume, -1);
                removed.push(order);
            }
        }
        removed
    }

    /// Observables snapshot. Requires both sides nonempty.
    pub fn stats(&self) -> Result<BookStats, BookError> {
        let (bid, ask) = match (self.best_bid(), self.best_ask()) {
            (Some(b), Some(a)) => (b, a),
            (bid, ask) => return Err(BookError::PartialBook { bid, ask }),
        };
        let total = (self.volume_buy + self.volume_sell) as f64;
        let imbalance_buy = self.volume_buy as f64 / total;
        let (gap1_bid, gap2_bid) = side_gaps(self.bids.range(..bid).rev().map(|(p, _)| *p), bid);
        let (gap1_ask, gap2_ask) = side_gaps(
            self.asks.range(ask + 1..).map(|(p, _)| *p),
            ask,
        );
        Ok(BookStats {
            best_bid: bid,
            best_ask: ask,
            mid: (ask + bid) as f64 / 2.0,
            spread_ticks: ask - bid,
            log_spread: (ask as f64).ln() - (bid as f64).ln(),
            gap1_bid,
            gap2_bid,
            gap1_ask,
            gap2_ask,
            imbalance_buy,
            imbalance_sell: self.volume_sell as f64 / total,
            n_bid_orders: self.bid_ids.len(),
            n_ask_orders: self.ask_ids.len(),
            volume_buy: self.volume_buy,
            volume_sell: self.volume_sell,
        })
    }

    /// Recomputes side volume totals from the level queues. Must always
    /// agree with the incrementally maintained totals.
    pub fn rescan_volumes(&self) -> (Volume, Volume) {
        let sum = |m: &BTreeMap<Price, VecDeque<Order>>| {
            m.values().flat_map(|q| q.iter()).map(|o| o.volume).sum()
        };
        (sum(&self.bids), sum(&self.asks))
    }
}

/// First and second gap behind a side's best level, walking away from the
/// top of the book.
fn side_gaps(mut away: impl Iterator<Item = Price>, best: Price) -> (Option<i64>, Option<i64>) {
    let second = away.next();
    let third = away.next();
    let gap1 = second.map(|p| (p - best).abs());
    let gap2 = second.and_then(|s| third.map(|t| (t - s).abs()));
    (gap1, gap2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn unit_book(bids: &[Price], asks: &[Price]) -> OrderBook {
        let mut book = OrderBook::new();
        let mut id = 0;
        for &p in bids {
            book.insert_limit(Side::Buy, p, 1, id).unwrap();
            id += 1;
        }
        for &p in asks {
            book.insert_limit(Side::Sell, p, 1, id).unwrap();
            id += 1;
        }
        book
    }

    #[test]
    fn insert_into_empty_book() {
        let mut book = OrderBook::new();
        book.insert_limit(Side::Buy, 98, 1, 1).unwrap();
        assert_eq!(book.best_bid(), Some(98));
        assert_eq!(book.side_volume(Side::Buy), 1);
    }

    #[test]
    fn insert_same_level_queues_fifo() {
        let mut book = OrderBook::new();
        let first = book.insert_limit(Side::Buy, 98, 1, 1).unwrap();
        let second = book.insert_limit(Side::Buy, 98, 1, 2).unwrap();
        assert!(second.seq > first.seq);
        let level: Vec<OrderId> = book
            .levels(Side::Buy)
            .next()
            .unwrap()
            .1
            .iter()
            .map(|o| o.id)
            .collect();
        assert_eq!(level, vec![1, 2]);
    }

    #[test]
    fn insert_at_opposite_best_crosses() {
        let mut book = OrderBook::new();
        book.insert_limit(Side::Sell, 100, 1, 1).unwrap();
        let err = book.insert_limit(Side::Buy, 100, 1, 2).unwrap_err();
        assert_eq!(
            err,
            BookError::CrossingPrice {
                side: Side::Buy,
                price: 100,
                opposite_best: 100
            }
        );
    }

    #[test]
    fn duplicate_id_rejected() {
        let mut book = OrderBook::new();
        book.insert_limit(Side::Buy, 98, 1, 7).unwrap();
        assert_eq!(
            book.insert_limit(Side::Buy, 97, 1, 7).unwrap_err(),
            BookError::DuplicateId(7)
        );
    }

    #[test]
    fn market_takes_best_price_first() {
        let mut book = OrderBook::new();
        book.insert_limit(Side::Sell, 100, 1, 1).unwrap();
        book.insert_limit(Side::Sell, 101, 2, 2).unwrap();
        let fills = book.execute_market(Side::Buy, 1).unwrap();
        assert_eq!(fills, vec![Fill { price: 100, volume: 1, maker_id: 1 }]);
        assert_eq!(book.best_ask(), Some(101));
    }

    #[test]
    fn market_respects_time_priority_within_level() {
        let mut book = OrderBook::new();
        book.insert_limit(Side::Sell, 100, 1, 5).unwrap();
        book.insert_limit(Side::Sell, 100, 1, 9).unwrap();
        let fills = book.execute_market(Side::Buy, 1).unwrap();
        assert_eq!(fills[0].maker_id, 5);
        assert!(book.contains_id(9));
    }

    #[test]
    fn market_beyond_resting_volume_fails() {
        let mut book = OrderBook::new();
        book.insert_limit(Side::Sell, 100, 2, 1).unwrap();
        let err = book.execute_market(Side::Buy, 3).unwrap_err();
        assert_eq!(
            err,
            BookError::InsufficientLiquidity {
                requested: 3,
                available: 2
            }
        );
    }

    #[test]
    fn market_fills_sum_to_request_across_levels() {
        let mut book = OrderBook::new();
        book.insert_limit(Side::Sell, 100, 2, 1).unwrap();
        book.insert_limit(Side::Sell, 102, 3, 2).unwrap();
        let fills = book.execute_market(Side::Buy, 4).unwrap();
        let filled: Volume = fills.iter().map(|f| f.volume).sum();
        assert_eq!(filled, 4);
        assert_eq!(book.side_volume(Side::Sell), 1);
        // remainder of order 2 still resting at 102
        assert_eq!(book.best_ask(), Some(102));
    }

    #[test]
    fn cancel_uniform_single_order() {
        let mut book = unit_book(&[98], &[]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let removed = book.cancel_uniform(Side::Buy, &mut rng).unwrap();
        assert_eq!(removed.price, 98);
        assert_eq!(book.n_orders(Side::Buy), 0);
    }

    #[test]
    fn cancel_uniform_empty_side() {
        let mut book = OrderBook::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            book.cancel_uniform(Side::Buy, &mut rng).unwrap_err(),
            BookError::EmptySide(Side::Buy)
        );
    }

    #[test]
    fn cancel_uniform_is_uniform_over_three_orders() {
        // 10^4 trials over a fixed 3-order side; chi-square against uniform
        // at significance 0.01 (df = 2)
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let trials = 10_000;
        let mut hits = [0u64; 3];
        for _ in 0..trials {
            let mut book = unit_book(&[97, 98, 99], &[105]);
            let removed = book.cancel_uniform(Side::Buy, &mut rng).unwrap();
            hits[(removed.price - 97) as usize] += 1;
        }
        let expected = trials as f64 / 3.0;
        let stat: f64 = hits
            .iter()
            .map(|&h| (h as f64 - expected).powi(2) / expected)
            .sum();
        let crit = ChiSquared::new(2.0).unwrap().inverse_cdf(0.99);
        assert!(stat < crit, "chi-square {stat:.3} >= {crit:.3}, hits {hits:?}");
    }

    #[test]
    fn cancel_uniform_weights_by_volume() {
        // one volume-3 order vs one volume-1 order: 3:1 selection odds
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let trials = 10_000;
        let mut heavy = 0u64;
        for _ in 0..trials {
            let mut book = OrderBook::new();
            book.insert_limit(Side::Buy, 98, 3, 1).unwrap();
            book.insert_limit(Side::Buy, 97, 1, 2).unwrap();
            if book.cancel_uniform(Side::Buy, &mut rng).unwrap().id == 1 {
                heavy += 1;
            }
        }
        let frac = heavy as f64 / trials as f64;
        assert!((frac - 0.75).abs() < 0.02, "heavy order picked {frac}");
    }

    #[test]
    fn cancel_by_id_inverts_insert() {
        let mut book = unit_book(&[98], &[101]);
        book.insert_limit(Side::Buy, 97, 1, 50).unwrap();
        let before_volume = book.side_volume(Side::Buy);
        book.cancel_by_id(50).unwrap();
        assert_eq!(book.side_volume(Side::Buy), before_volume - 1);
        assert!(!book.contains_id(50));
        assert_eq!(book.best_bid(), Some(98));
    }

    #[test]
    fn cancel_unknown_id() {
        let mut book = OrderBook::new();
        assert_eq!(book.cancel_by_id(9).unwrap_err(), BookError::UnknownId(9));
    }

    #[test]
    fn cancel_first_of_two_leaves_second() {
        let mut book = OrderBook::new();
        book.insert_limit(Side::Sell, 101, 1, 1).unwrap();
        book.insert_limit(Side::Sell, 101, 1, 2).unwrap();
        book.cancel_by_id(1).unwrap();
        let level: Vec<OrderId> = book
            .levels(Side::Sell)
            .next()
            .unwrap()
            .1
            .iter()
            .map(|o| o.id)
            .collect();
        assert_eq!(level, vec![2]);
    }

    #[test]
    fn stats_mid_and_spread() {
        let book = unit_book(&[98], &[100]);
        let stats = book.stats().unwrap();
        assert_eq!(stats.mid, 99.0);
        assert_eq!(stats.spread_ticks, 2);
        assert_eq!(stats.log_spread, (100f64).ln() - (98f64).ln());
    }

    #[test]
    fn stats_adjacent_levels_gap_one() {
        let book = unit_book(&[98, 97], &[100]);
        let stats = book.stats().unwrap();
        assert_eq!(stats.gap1_bid, Some(1));
        assert_eq!(stats.gap2_bid, None);
        assert_eq!(stats.gap1_ask, None);
    }

    #[test]
    fn stats_second_gap_spans_second_to_third_level() {
        let book = unit_book(&[90], &[100, 103, 110]);
        let stats = book.stats().unwrap();
        assert_eq!(stats.gap1_ask, Some(3));
        assert_eq!(stats.gap2_ask, Some(7));
    }

    #[test]
    fn stats_imbalance_ratio() {
        let mut book = OrderBook::new();
        book.insert_limit(Side::Buy, 98, 300, 1).unwrap();
        book.insert_limit(Side::Sell, 100, 100, 2).unwrap();
        let stats = book.stats().unwrap();
        assert_eq!(stats.imbalance_buy, 0.75);
        assert_eq!(stats.imbalance_sell, 0.25);
    }

    #[test]
    fn stats_requires_both_sides() {
        let book = unit_book(&[98], &[]);
        assert_eq!(
            book.stats().unwrap_err(),
            BookError::PartialBook {
                bid: Some(98),
                ask: None
            }
        );
    }

    #[test]
    fn stats_pure_function_of_contents() {
        // same contents reached by different operation orders
        let mut a = OrderBook::new();
        a.insert_limit(Side::Buy, 98, 1, 1).unwrap();
        a.insert_limit(Side::Sell, 101, 2, 2).unwrap();
        a.insert_limit(Side::Buy, 95, 1, 3).unwrap();
        let mut b = OrderBook::new();
        b.insert_limit(Side::Sell, 101, 2, 2).unwrap();
        b.insert_limit(Side::Buy, 95, 1, 3).unwrap();
        b.insert_limit(Side::Buy, 98, 1, 1).unwrap();
        b.insert_limit(Side::Buy, 90, 1, 9).unwrap();
        b.cancel_by_id(9).unwrap();
        assert_eq!(a.stats().unwrap(), b.stats().unwrap());
    }

    #[test]
    fn clear_price_band_removes_closed_interval() {
        let mut book = unit_book(&[100, 99, 98, 97], &[101]);
        let removed = book.clear_price_band(Side::Buy, 98, 100);
        let mut prices: Vec<Price> = removed.iter().map(|o| o.price).collect();
        prices.sort_unstable();
        assert_eq!(prices, vec![98, 99, 100]);
        assert_eq!(book.best_bid(), Some(97));
        let stats = book.stats().unwrap();
        assert_eq!(stats.mid, 99.0);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        /// Random valid operation sequences keep the book uncrossed and the
        /// incremental volume totals equal to a full rescan.
        #[test]
        fn random_ops_preserve_invariants(ops in proptest::collection::vec((0u8..4, 0u8..2, 0i64..40, 1u64..4), 1..300), seed in 0u64..1_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut book = OrderBook::new();
            let mut next_id = 0u64;
            for (kind, side, offset, volume) in ops {
                let side = if side == 0 { Side::Buy } else { Side::Sell };
                match kind {
                    0 | 1 => {
                        let price = match side {
                            Side::Buy => {
                                let cap = book.best_ask().unwrap_or(1_000);
                                cap - 1 - offset
                            }
                            Side::Sell => {
                                let floor = book.best_bid().unwrap_or(500);
                                floor + 1 + offset
                            }
                        };
                        book.insert_limit(side, price, volume, next_id).unwrap();
                        next_id += 1;
                    }
                    2 => {
                        if book.side_volume(side.opposite()) >= 1 {
                            let fills = book.execute_market(side, 1).unwrap();
                            let total: Volume = fills.iter().map(|f| f.volume).sum();
                            proptest::prop_assert_eq!(total, 1);
                        }
                    }
                    _ => {
                        if book.n_orders(side) > 0 {
                            book.cancel_uniform(side, &mut rng).unwrap();
                        }
                    }
                }
                if let (Some(b), Some(a)) = (book.best_bid(), book.best_ask()) {
                    proptest::prop_assert!(b < a, "crossed book: bid {} ask {}", b, a);
                }
                let (vb, vs) = book.rescan_volumes();
                proptest::prop_assert_eq!(vb, book.side_volume(Side::Buy));
                proptest::prop_assert_eq!(vs, book.side_volume(Side::Sell));
            }
        }
    }
}
