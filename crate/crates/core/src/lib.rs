//! Network reconstruction from spatiotemporal event data with multivariate
//! Hawkes processes.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. Everything here is pure computation: simulation, EM-type fitting of
//! parametric, nonparametric and exclusively temporal models, and evaluation of
//! the reconstructed networks. File formats and the command-line front end live
//! in the companion `hawkesnet` crate.
//!
//! Index convention used throughout: in a [`ResponsibilityMatrix`], entry
//! `(i, j)` with `i < j` is the probability that event `i` triggered event
//! `j`, and entry `(j, j)` is the probability that event `j` is a background
//! event.

#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod decluster;
pub mod error;
pub mod eventnet;
pub mod fit;
pub mod intensity;
mod math;
pub mod metrics;
pub mod model;
mod rng;
pub mod simulate;
pub mod synth;

pub use error::{Error, Result};
pub use model::{
    BackgroundSource, BinnedKernel, Event, EventCatalog, NonparamModel, ParametricParams, Region,
    ResponsibilityMatrix, TriggeringMatrix,
};
