//! Rate estimators, selection policies and sample-complexity bounds for
//! ordinal optimization: deciding which of several simulated populations has
//! the best mean, and how many samples that decision costs.
//!
//! The crate is organised bottom-up:
//!
//! * [`populations`]: analytic sampling models with exact log-MGFs and rates.
//! * [`empirical_rate`]: the plug-in estimator of the large-deviations rate.
//! * [`meta_rate`]: the rate function governing fluctuations of that estimator,
//!   and the failure exponents of the estimator-driven procedures.
//! * [`truncation`]: worst-case bias of truncated and capped means under a
//!   moment budget.
//! * [`selectors`]: the selection policies themselves.
//! * [`adversarial`]: lower-bound constructions and the Monte Carlo harness.

// `!(x > y)` is used on purpose so NaN inputs fail the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversarial;
pub mod empirical_rate;
pub mod error;
pub mod ext;
pub mod meta_rate;
pub mod numerics;
pub mod populations;
pub mod rng;
pub mod selectors;
pub mod truncation;

pub use error::{Error, Result};
pub use ext::ExtReal;
