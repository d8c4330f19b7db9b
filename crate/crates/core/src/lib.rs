//! Participation (ascertainment) bias in heritability and genetic
//! correlation under a liability-threshold selection model.
//!
//! * [`truncnorm`]: normal primitives and the truncation constants of `α`.
//! * [`model`]: forward formulas for what an unadjusted analysis of
//!   participants estimates.
//! * [`adjust`]: the inverse chain from participant estimates back to
//!   population parameters.
//! * [`simgen`]: component-level and SNP-level simulators.
//! * [`ldsc`]: a small LD score regression for heritability and genetic
//!   covariance.
//! * [`jackknife`]: block jackknife standard errors.
//! * [`io`]: preprocessing and file formats.
//! * [`analysis`]: sumstats → adjusted estimates with jackknife SEs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adjust;
pub mod analysis;
pub mod error;
pub mod io;
pub mod jackknife;
pub mod ldsc;
pub mod model;
pub mod simgen;
pub mod truncnorm;

pub use error::{Error, Result};
pub use model::{PairParams, ParticipationParams, PhenotypeParams, ReparamCoeffs};
pub use truncnorm::SelectionContext;
