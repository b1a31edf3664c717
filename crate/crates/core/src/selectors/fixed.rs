//! Non-adaptive (ε, δ) policies: equal per-population budgets fixed up front,
//! the smallest sample mean wins.

use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};
use crate::numerics::bisect;
use crate::populations::Sampler;
use crate::truncation::{FSpec, MomentFunction};

use super::{argmin, ceil_count, check_delta, SelectionOutcome, Termination};

/// Per-population moment bounds `E f(X_i) ≤ c_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentBound {
    pub f_spec: FSpec,
    pub c: Vec<f64>,
}

impl MomentBound {
    pub fn validate(&self) -> Result<()> {
        self.f_spec.validate().map_err(|e| e.within("f_spec"))?;
        if self.c.is_empty() {
            return Err(Error::domain("c", "needs at least one bound"));
        }
        let floor = self.f_spec.f0();
        for (i, &c) in self.c.iter().enumerate() {
            if !(c > floor && c.is_finite()) {
                return Err(Error::domain(format!("c.{i}"), format!("must exceed f(0) = {floor}, got {c}")));
            }
        }
        Ok(())
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    check_positive("epsilon", epsilon)
}

fn check_arms(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::domain("d", format!("need at least 2 populations, got {d}")));
    }
    Ok(())
}

/// `⌈(2b²/ε²)·log((d−1)/δ)⌉`.
pub fn hoeffding_sample_size(epsilon: f64, delta: f64, b: f64, d: usize) -> Result<u64> {
    check_epsilon(epsilon)?;
    check_delta(delta)?;
    check_positive("b", b)?;
    check_arms(d)?;
    ceil_count(2.0 * b * b / (epsilon * epsilon) * ((d - 1) as f64 / delta).ln())
}

fn run_fixed<S: Sampler>(samplers: &mut [S], n: u64, transform: impl Fn(f64) -> f64) -> SelectionOutcome {
    let means: Vec<f64> = samplers
        .iter_mut()
        .map(|s| (0..n).map(|_| transform(s.draw())).sum::<f64>() / n as f64)
        .collect();
    SelectionOutcome {
        chosen: argmin(&means),
        per_arm_samples: vec![n; samplers.len()],
        rounds: 1,
        termination: Termination::BudgetExhausted,
        decided_sign: None,
        false_selection: None,
    }
}

/// Draws `hoeffding_sample_size` samples from each population (outputs in
/// `[0, b]`) and picks the smallest mean, lowest index on ties.
pub fn hoeffding_select<S: Sampler>(samplers: &mut [S], epsilon: f64, delta: f64, b: f64) -> Result<SelectionOutcome> {
    let n = hoeffding_sample_size(epsilon, delta, b, samplers.len())?.max(1);
    Ok(run_fixed(samplers, n, |x| x))
}

/// `r(x) = inf{u : h(u) ≤ x}` for `h(u) = (x_u − u)(c − f(0))/(f(x_u) − f(0))`,
/// the worst capping bias at level u, by bisection on the decreasing h.
pub(crate) fn radius_by_inversion<M: MomentFunction + ?Sized>(f: &M, c: f64, x: f64) -> Result<f64> {
    let h = |u: f64| {
        let xu = f.x_u(u);
        (xu - u) * (c - f.f0()) / (f.f(xu) - f.f0())
    };
    let mut lo = 1.0;
    for _ in 0..2000 {
        if h(lo) >= x {
            break;
        }
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::domain(
                "x",
                format!("{x} is at least the worst capping bias at u → 0, so no positive cap is needed"),
            ));
        }
    }
    let mut hi = lo.max(1.0);
    while h(hi) > x {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::NumericalFailure {
                what: "capping radius bracket".into(),
                iterations: 2000,
                best: vec![hi],
            });
        }
    }
    bisect(|u| x - h(u), lo, hi, 1e-13 * hi)
}

/// `R(x) = max_i r_i(x)`: the smallest cap whose worst-case bias is at most x
/// for every population.
pub fn capping_radius(bounds: &MomentBound, x: f64) -> Result<f64> {
    bounds.validate()?;
    check_positive("x", x)?;
    let mut r = 0.0f64;
    for &c in &bounds.c {
        let ri = match bounds.f_spec {
            FSpec::Power { alpha } => {
                (c / x).powf(1.0 / (alpha - 1.0)) * (alpha - 1.0) / alpha.powf(alpha / (alpha - 1.0))
            }
            spec => radius_by_inversion(&spec, c, x)?,
        };
        r = r.max(ri);
    }
    Ok(r)
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::domain("beta", format!("must lie in (0, 1), got {beta}")));
    }
    Ok(())
}

/// `⌈2u²/(ε²(1−β)²)·log((d−1)/δ)⌉` with `u = R(βε)`.
pub fn capped_sample_size(epsilon: f64, delta: f64, bounds: &MomentBound, beta: f64, d: usize) -> Result<(u64, f64)> {
    check_epsilon(epsilon)?;
    check_delta(delta)?;
    check_beta(beta)?;
    check_arms(d)?;
    let u = capping_radius(bounds, beta * epsilon)?;
    let n = ceil_count(2.0 * u * u / (epsilon * epsilon * (1.0 - beta).powi(2)) * ((d - 1) as f64 / delta).ln())?;
    Ok((n, u))
}

/// Caps every (non-negative) sample at `u = R(βε)`, draws
/// `capped_sample_size` samples per population and picks the smallest capped
/// mean.
pub fn capped_select<S: Sampler>(
    samplers: &mut [S],
    epsilon: f64,
    delta: f64,
    bounds: &MomentBound,
    beta: f64,
) -> Result<SelectionOutcome> {
    let (n, u) = capped_sample_size(epsilon, delta, bounds, beta, samplers.len())?;
    Ok(run_fixed(samplers, n.max(1), |x| x.min(u)))
}

/// The β minimising the capped sample size: `1/α` for power moments.
pub fn optimal_beta(bounds: &MomentBound) -> Result<f64> {
    bounds.validate()?;
    match bounds.f_spec {
        FSpec::Power { alpha } => Ok(1.0 / alpha),
        FSpec::Exponential { .. } => Err(Error::UnsupportedSpec(
            "no closed-form optimal beta for exponential moments".into(),
        )),
    }
}
