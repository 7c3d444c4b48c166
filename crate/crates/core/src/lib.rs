//! Numerical core for VIX replication and for joint index / VIX-futures models.
//!
//! The crate is `no_std` (with `alloc`). Monte Carlo routines accept a [`sde::PathMap`]
//! executor, so callers with threads can distribute paths without changing results.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod black;
pub mod chain;
pub mod consistency;
mod error;
pub mod math;
pub mod models;
pub mod scalar;
pub mod sde;
pub mod vixcore;

pub use error::{Error, Result};
