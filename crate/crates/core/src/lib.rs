//! Core handwriting-analysis primitives.
//!
//! A trace is ingested ([`trace`], [`manifest`]), turned into per-axis
//! velocities, and the zero-velocity indicator is cleaned with a 1-D
//! morphological closing ([`morphology`]). The cleaned zero runs give the
//! break instants of a piecewise-sinusoidal velocity model whose
//! reconstruction error is the main diagnostic feature ([`pomh`]). The
//! closing width of each trace is chosen so that its zero count matches an
//! age-indexed reference built from typically developing writers
//! ([`reference`]), and the results are assembled into per-symbol feature
//! rows ([`features`]). [`synthgen`] produces oscillator-exact cohorts with
//! planted perturbations for testing the whole chain.

pub mod error;
pub mod features;
pub mod manifest;
pub mod morphology;
pub mod pomh;
pub mod reference;
pub mod seed;
pub mod stats;
pub mod synthgen;
pub mod trace;

pub use error::{Error, Result};
pub use trace::{Sample, SymbolId, Trace, VelocitySeries};
