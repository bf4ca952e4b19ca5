//! Neuroevolution trading engine.
//!
//! Recurrent networks evolved with NEAT read eleven indicator-derived inputs
//! per daily bar and emit buy, sell and order-size signals. A backtester turns
//! those signals into fills, a fitness function scores the resulting report,
//! and the trainer runs the generational loop over a staged window schedule.
//! The evaluator picks a champion and compares it with Buy & Hold.
//!
//! Numeric kernels (indicators, activation, equity metrics) are generic over
//! [`Real`]; the aliases below fix the usual precisions.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backtest;
pub mod config;
pub mod evaluator;
pub mod fitness;
pub mod indicators;
pub mod market_data;
pub mod neat;
pub mod num;
pub mod persist;
pub mod store;
pub mod trainer;

pub use num::Real;

/// Network inputs at reference precision.
pub type Features = indicators::FeatureVector<f64>;
/// Network inputs in single precision.
pub type Features32 = indicators::FeatureVector<f32>;
/// Decoded network at reference precision.
pub type Network = neat::RecurrentNetwork<f64>;
/// Decoded network in single precision.
pub type Network32 = neat::RecurrentNetwork<f32>;
