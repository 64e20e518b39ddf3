//! Limit-order-book market simulator and post-jump relaxation toolkit.
//!
//! The crate has three layers:
//!
//! * [`book`] — a price-time-priority limit order book on an integer tick
//!   grid, with the microstructure observables (mid, spread, gaps,
//!   imbalance, queue counts) used everywhere else.
//! * [`flow`] — a zero-intelligence order-flow engine driving the book with
//!   fixed limit/market/cancel rates, plus manual one-sided shock injection
//!   and ensemble collection of shock-aligned trajectories.
//! * analysis — [`events`] detects large intraday price moves in minute
//!   series, [`replay`] rebuilds per-minute observables from raw order logs,
//!   [`relax`] aggregates event-aligned curves and fits power-law decays,
//!   and [`meanfield`] evolves the analytic spread/gap recursions the
//!   simulation is checked against.
//!
//! [`io`] holds the CSV schemas shared by the CLI and the test fixtures.

pub mod book;
pub mod flow;
pub mod meanfield;

pub use book::{BookError, BookStats, Order, OrderBook, OrderId, Price, Side, Volume};
pub use flow::{
    Action, Baseline, EventWindow, ExperimentResult, FlowConfig, FlowEngine, FlowError,
    ShockDirection, ShockReport, StepRecord,
};
pub use meanfield::{MeanFieldError, MeanFieldParams, MeanFieldTrajectory};
