//! Selection policies.
//!
//! The sign problem (d = 1: is EX positive?) is handled by
//! [`two_phase_select`] and [`sequential_select`]; the d-population problem by
//! the fixed-budget [`hoeffding_select`] and [`capped_select`] (smallest mean
//! wins) and by [`successive_elimination`] (largest mean wins).
//!
//! Policies draw from [`Sampler`](crate::populations::Sampler)s, so their
//! randomness lives entirely in the samplers handed to them.

mod elimination;
mod fixed;
mod sign;

use serde::{Deserialize, Serialize};

pub use elimination::{
    expected_pulls_bound, p_capped, p_truncated, solve_log_fixed_point, successive_elimination,
    successive_elimination_traced, ArmPullsBound, Estimator, LogFixedPoint, PullsBound, RadiusKind, RadiusSchedule,
    RoundTrace, C_NORM,
};
pub use fixed::{
    capped_sample_size, capped_select, capping_radius, hoeffding_sample_size, hoeffding_select, optimal_beta,
    MomentBound,
};
pub(crate) use sign::check_sequential;
pub use sign::{sequential_select, two_phase_select, DEFAULT_PHASE2_CAP, DEFAULT_ROUND_CAP};

use crate::error::{check_probability_open, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    BudgetExhausted,
    ConfidenceMet,
    RoundCap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sign {
    Positive,
    Negative,
}

/// What counts as the best population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    Minimize,
    Maximize,
    /// d = 1: decide the sign of the mean.
    Sign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub chosen: usize,
    pub per_arm_samples: Vec<u64>,
    pub rounds: u64,
    pub termination: Termination,
    pub decided_sign: Option<Sign>,
    /// Set by [`SelectionOutcome::judge`] when the true means are known and
    /// single out a best population.
    pub false_selection: Option<bool>,
}

impl SelectionOutcome {
    pub fn total_samples(&self) -> u64 {
        self.per_arm_samples.iter().sum()
    }

    /// Records whether this outcome is a false selection under `means`.
    /// Ties for the best mean (or a zero mean for the sign problem) leave the
    /// flag unset.
    pub fn judge(mut self, means: &[f64], objective: Objective) -> Self {
        self.false_selection = best_index(means, objective).ok().map(|best| match objective {
            Objective::Sign => {
                let truth = if means[0] > 0.0 { Sign::Positive } else { Sign::Negative };
                self.decided_sign != Some(truth)
            }
            _ => self.chosen != best,
        });
        self
    }
}

/// Index of the unique best mean; for [`Objective::Sign`] returns 0 unless the
/// mean is exactly zero.
pub fn best_index(means: &[f64], objective: Objective) -> Result<usize> {
    if means.is_empty() {
        return Err(Error::domain("truth", "no populations"));
    }
    if objective == Objective::Sign {
        return if means[0] == 0.0 {
            Err(Error::UndefinedTruth("the mean is exactly zero".into()))
        } else {
            Ok(0)
        };
    }
    let better = |a: f64, b: f64| if objective == Objective::Minimize { a < b } else { a > b };
    let mut best = 0;
    for (i, &m) in means.iter().enumerate().skip(1) {
        if better(m, means[best]) {
            best = i;
        }
    }
    if means.iter().enumerate().any(|(i, &m)| i != best && m == means[best]) {
        return Err(Error::UndefinedTruth(format!("best mean {} is shared", means[best])));
    }
    Ok(best)
}

/// Lowest index among the smallest values.
pub(crate) fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x < xs[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    check_probability_open("delta", delta)
}

/// Exact ceiling of a non-negative real sample-size formula.
pub(crate) fn ceil_count(x: f64) -> Result<u64> {
    if !(x.is_finite() && (0.0..9.0e18).contains(&x)) {
        return Err(Error::domain("sample size", format!("formula evaluates to {x}")));
    }
    Ok(x.ceil() as u64)
}
