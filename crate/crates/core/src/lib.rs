//! Exploration of near-optimal solution sets for linear planning models.
//!
//! A set of near-optimal solutions (for example the iterates of a
//! modelling-to-generate-alternatives run) is reduced to capacity decisions and metrics and
//! treated as the vertex set of a convex hull. Every convex combination of those vertices is
//! itself feasible and within budget, so the hull can be sampled, searched with small linear
//! programs, rescaled to tighter budgets, and traced for trade-off frontiers.
//!
//! The crate is `no_std` (with `alloc`). The `std` feature adds wall-clock timing of solves and
//! `std::error::Error` integration.
//!
//! * [`lp`]: dense two-phase simplex used by everything else.
//! * [`model`]: vertex matrices, weight vectors and interpolation.
//! * [`expr`]: the `2*wind+solar<=500` constraint grammar.
//! * [`explore`]: the hull exploration engine.
//! * [`cem`]: a small capacity-expansion model used to generate iterates and to re-dispatch
//!   interpolated capacities.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod cem;
pub mod explore;
pub mod expr;
pub mod lp;
pub mod mga;
pub mod model;
pub mod rng;
pub mod stats;
