//! Core of a QoS-aware orchestrator that routes queries across a fleet of
//! domain-specialized model backends.
//!
//! The crate is `no_std` (it needs `alloc`) and contains no IO. It covers:
//!
//! * the model [`registry`],
//! * static semantic scoring in [`similarity`],
//! * the monitor/knowledge side of the adaptation loop in [`telemetry`],
//! * scoring and selection in [`router`],
//! * the request queue and its disciplines in [`scheduler`],
//! * the capacity-bounded model [`cache`],
//! * deterministic simulated backends in [`backend`],
//! * trace generation in [`workload`],
//! * the [`engine`] tying all of them together, with a discrete-event driver,
//! * run statistics in [`stats`].
//!
//! Clocks, files, sockets and the CLI live in the `calm` crate.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod backend;
pub mod cache;
pub mod engine;
pub mod error;
pub mod registry;
pub mod router;
pub mod rng;
pub mod scheduler;
pub mod similarity;
pub mod stats;
pub mod telemetry;
pub mod workload;

pub use error::{Error, Result};
