//! Imprecise structural reliability analysis (ISRA) with probability-boxes.
//!
//! Inputs of a limit-state function `G(x) <= 0  <=>  failure` are modelled as
//! probability-boxes: either *free* (two CDF envelopes) or *parametric* (a
//! distribution family whose parameters live in intervals). The library
//! computes lower and upper bounds on the failure probability while calling
//! the expensive limit-state function only a few dozen to a few hundred
//! times, by stacking adaptive Kriging surrogates:
//!
//! * free p-boxes: a first-level surrogate of `G` is trained on a condensed
//!   auxiliary input, converted into lower/upper limit-states by
//!   box-constrained optimization, and each bound is estimated by a
//!   second-level adaptive run ([`isra_free`]);
//! * parametric p-boxes: expected-improvement optimization over the
//!   distribution-parameter box drives conditional reliability analyses that
//!   recycle one shared experimental design ([`isra_param`]).
//!
//! The `isra` binary wraps the library behind a batch CLI (`isra run`,
//! `isra oracle`, `isra plot-data`); see the crate README.

pub mod akmcs;
pub mod benchmarks;
pub mod config;
pub mod dist;
pub mod ego;
pub mod isra_free;
pub mod isra_param;
pub mod kriging;
pub mod limit_state;
pub mod linalg;
pub mod pbox;
pub mod report;
pub mod runner;
pub mod sampling;

pub use dist::Distribution;
pub use kriging::{ExperimentalDesign, KrigingModel};
pub use pbox::{FreePBox, PBoxVariable, ParametricPBox};
pub use sampling::PfEstimate;
