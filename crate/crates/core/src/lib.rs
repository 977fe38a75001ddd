//! Q-learning agents in repeated symmetric games: simulation of collusive
//! outcomes and exhaustive stochastic-stability verification on small grids.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod agents;
pub mod engine;
pub mod games;
pub mod metrics;
pub mod stability;
