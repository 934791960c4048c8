//! Atomistic metrology for nitride superconducting trilayers.
//!
//! The crate ingests atom-probe event files and range tables, extracts
//! same-pulse ion pairs and their detector separations, bins them by depth,
//! builds concentration maps, measures lattice-fringe d-spacings in TEM
//! windows, and fits junction transport data. Every pipeline has a seeded
//! synthetic generator in [`synth`] that plants known ground truth.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod apt;
pub mod cli;
pub mod cluster;
pub mod composition;
pub mod depth_phase;
pub mod error;
pub mod fringe;
pub mod pairs;
pub mod stats;
pub mod synth;
pub mod transport;

pub use error::{Error, Result};
