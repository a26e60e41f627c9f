//! Pairwise Choice Markov Chain (PCMC) models of discrete choice.
//!
//! A PCMC model assigns to each choice set `S` the stationary distribution of
//! a continuous-time Markov chain on `S` whose rates come from a single rate
//! matrix `Q` over the universe. This crate holds the models, their
//! maximum-likelihood fits, the MNL/MMNL baselines, Blade-Chest
//! parameterizations, axiom audits, and the evaluation harness. It is
//! `no_std` and needs only `alloc`.

#![no_std]
// `!(x > 0.0)` style checks are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod axioms;
pub mod ctmc;
pub mod data;
pub mod error;
pub mod eval;
pub mod luce;
pub mod model;
pub mod optim;
pub mod param;
pub mod pcmc;

pub use ctmc::{Distribution, RateMatrix};
pub use data::{ChoiceDataset, CountTables, Observation};
pub use error::{Error, Result};
pub use luce::{MmnlModel, MnlModel};
pub use model::{ChoiceModel, FittedModel};
pub use param::{BladeChest, BladeChestVariant, PairwiseMatrix};
pub use pcmc::{FitConfig, FitReport, PcmcModel};
