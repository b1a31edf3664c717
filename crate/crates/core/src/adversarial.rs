//! Lower-bound gadgets and the Monte Carlo false-selection harness.
//!
//! [`tilt`] moves a small amount of probability into the far upper tail of a
//! distribution with unbounded support: the KL divergence stays below any
//! target while the mean exceeds any level. Fed into
//! [`lower_bound_samples`], this shows that no δ-correct policy can work with
//! a bounded number of samples without further assumptions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_positive, check_probability_open, Error, Result};
use crate::ext::ExtReal;
use crate::numerics::logaddexp;
use crate::populations::{kl_divergence, ModelSampler, PopulationModel};
use crate::rng::stream_id;
use crate::selectors::{
    best_index, capped_sample_size, capped_select, check_sequential, hoeffding_sample_size, hoeffding_select, optimal_beta, sequential_select, successive_elimination,
    two_phase_select, Estimator, MomentBound, Objective, RadiusKind, RadiusSchedule, SelectionOutcome,
    DEFAULT_PHASE2_CAP, DEFAULT_ROUND_CAP,
};

/// Doublings allowed in the split-point search.
pub const MAX_DOUBLINGS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TiltedDistribution {
    pub base: PopulationModel,
    pub b: f64,
    /// Mass below `b` is scaled by `1 − gamma`.
    pub gamma: f64,
    /// Mass above `b` is scaled by this factor; +∞ when `P(X ≥ b)` underflows.
    pub beta_factor: ExtReal,
    pub log_beta_factor: f64,
    /// The tilted law as a population model.
    pub model: PopulationModel,
    /// `KL(base ‖ tilted)`, by quadrature.
    pub kl: f64,
    pub mean: f64,
}

/// Tilts `base` so that `KL(base ‖ tilted) ≤ alpha_target` and the mean is at
/// least `k`: mass below b is scaled by `γ = 1 − e^{−α/2}` less, and moved
/// proportionally above b. The split b doubles from `2|μ| + 1` until the
/// tilted mean reaches k.
pub fn tilt(base: &PopulationModel, alpha_target: f64, k: f64) -> Result<TiltedDistribution> {
    base.validate().map_err(|e| e.within("base"))?;
    check_positive("alpha_target", alpha_target)?;
    if base.is_discrete() || base.support().1.is_finite() {
        return Err(Error::UnsupportedSupport(format!(
            "{} needs a density with unbounded upper support",
            base.variant_name()
        )));
    }
    let mu = base.mean();
    if !mu.is_finite() {
        return Err(Error::domain("base", "mean must be finite"));
    }
    if !(k > mu) {
        return Err(Error::TrivialRequest(format!("k = {k} does not exceed the base mean {mu}")));
    }
    let gamma = -(-alpha_target / 2.0).exp_m1();
    let mut b = 2.0 * mu.abs() + 1.0;
    for _ in 0..=MAX_DOUBLINGS {
        let upper = base.conditional_upper_mean(b, |x| x);
        let mean = (1.0 - gamma) * mu + gamma * upper;
        if mean >= k {
            let model = PopulationModel::Tilted { base: Box::new(base.clone()), b, gamma };
            let kl = kl_divergence(base, &model)?.to_f64();
            if !(kl <= alpha_target) {
                return Err(Error::NumericalFailure {
                    what: "tilt KL certificate".into(),
                    iterations: 1,
                    best: vec![b, kl],
                });
            }
            let log_beta_factor = logaddexp(0.0, gamma.ln() + base.log_cdf(b) - base.log_sf(b));
            return Ok(TiltedDistribution {
                base: base.clone(),
                b,
                gamma,
                beta_factor: ExtReal::from_f64(log_beta_factor.exp()),
                log_beta_factor,
                model,
                kl,
                mean,
            });
        }
        b *= 2.0;
    }
    Err(Error::NumericalFailure {
        what: "tilt split-point search".into(),
        iterations: MAX_DOUBLINGS,
        best: vec![b],
    })
}

/// `log(1/δ) / (3·kl)`.
pub fn lower_bound_from_kl(kl: ExtReal, delta: f64) -> Result<f64> {
    crate::error::check_probability_open("delta", delta)?;
    match kl {
        ExtReal::Finite(v) if v > 0.0 => Ok((1.0 / delta).ln() / (3.0 * v)),
        v => Err(Error::DegenerateBound(format!("KL divergence is {v}"))),
    }
}

/// Floor on the expected samples any δ-correct policy spends on a population
/// with law g, when an alternative g̃ would flip the answer.
pub fn lower_bound_samples(g: &PopulationModel, g_tilde: &PopulationModel, delta: f64) -> Result<f64> {
    lower_bound_from_kl(kl_divergence(g, g_tilde)?, delta)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileGadget {
    pub g: PopulationModel,
    pub g_eps: PopulationModel,
    pub kl: f64,
    /// `log(p/(p − ε))`.
    pub kl_bound: f64,
    pub quantile_g: f64,
    pub quantile_g_eps: f64,
    /// p-quantile of `g_eps` minus that of `g`.
    pub quantile_gap: f64,
}

/// Two Gaussian mixtures, `p·N(0,1) + (1−p)·N(μ,1)` and the same with weight
/// `p − ε` at 0, whose KL divergence is at most `log(p/(p−ε))` while their
/// p-quantiles differ by an amount growing with μ.
pub fn quantile_gadget(p: f64, epsilon: f64, mu: f64) -> Result<QuantileGadget> {
    if !(p > 0.0 && p <= 0.5) {
        return Err(Error::domain("p", format!("must lie in (0, 1/2], got {p}")));
    }
    if !(epsilon > 0.0 && epsilon < p) {
        return Err(Error::domain("epsilon", format!("must lie in (0, p), got {epsilon}")));
    }
    check_positive("mu", mu)?;
    let g = PopulationModel::GaussianMixture { p, mu };
    let g_eps = PopulationModel::GaussianMixture { p: p - epsilon, mu };
    let kl = kl_divergence(&g, &g_eps)?.to_f64();
    let kl_bound = (p / (p - epsilon)).ln();
    if !(kl <= kl_bound) {
        return Err(Error::NumericalFailure {
            what: "quantile gadget KL bound".into(),
            iterations: 1,
            best: vec![kl, kl_bound],
        });
    }
    let quantile_g = g.quantile(p)?;
    let quantile_g_eps = g_eps.quantile(p)?;
    Ok(QuantileGadget {
        g,
        g_eps,
        kl,
        kl_bound,
        quantile_g,
        quantile_g_eps,
        quantile_gap: quantile_g_eps - quantile_g,
    })
}

/// A policy runnable by [`monte_carlo_fs`].
pub trait Policy: Sync {
    fn objective(&self) -> Objective;
    fn run(&self, samplers: &mut [ModelSampler], delta: f64) -> Result<SelectionOutcome>;
}

/// The built-in policies with their parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum PolicySpec {
    TwoPhase {
        c1: f64,
        c2: f64,
        #[serde(default)]
        phase2_cap: Option<u64>,
    },
    Sequential {
        c_schedule: Vec<f64>,
        #[serde(default)]
        round_cap: Option<u64>,
    },
    Hoeffding {
        epsilon: f64,
        b: f64,
    },
    Capped {
        epsilon: f64,
        bounds: MomentBound,
        /// Defaults to the optimal β.
        #[serde(default)]
        beta: Option<f64>,
    },
    SuccessiveElimination {
        radius: RadiusKind,
        estimator: Estimator,
        pull_cap: u64,
    },
}

impl PolicySpec {
    /// Checks every parameter against `d` populations and `delta` without
    /// drawing a sample.
    pub fn validate(&self, d: usize, delta: f64) -> Result<()> {
        let sign_arms = || {
            if d == 1 {
                Ok(())
            } else {
                Err(Error::domain("truth", format!("the sign problem takes exactly one population, got {d}")))
            }
        };
        match self {
            PolicySpec::TwoPhase { c1, c2, phase2_cap } => {
                sign_arms()?;
                check_probability_open("delta", delta)?;
                check_positive("c1", *c1)?;
                check_positive("c2", *c2)?;
                if *phase2_cap == Some(0) {
                    return Err(Error::domain("phase2_cap", "must be at least 1"));
                }
                Ok(())
            }
            PolicySpec::Sequential { c_schedule, round_cap } => {
                sign_arms()?;
                check_sequential(delta, c_schedule, round_cap.unwrap_or(DEFAULT_ROUND_CAP))
            }
            PolicySpec::Hoeffding { epsilon, b } => hoeffding_sample_size(*epsilon, delta, *b, d).map(|_| ()),
            PolicySpec::Capped { epsilon, bounds, beta } => {
                bounds.validate().map_err(|e| e.within("bounds"))?;
                if bounds.c.len() != 1 && bounds.c.len() != d {
                    return Err(Error::domain("bounds.c", format!("needs 1 or {d} entries, got {}", bounds.c.len())));
                }
                let beta = match beta {
                    Some(b) => *b,
                    None => optimal_beta(bounds)?,
                };
                capped_sample_size(*epsilon, delta, bounds, beta, d).map(|_| ())
            }
            PolicySpec::SuccessiveElimination { radius, estimator, pull_cap } => {
                RadiusSchedule::new(*radius, d, delta).map_err(|e| e.within("radius"))?;
                if *pull_cap == 0 {
                    return Err(Error::domain("pull_cap", "must be at least 1"));
                }
                if *estimator != Estimator::Plain && !matches!(radius, RadiusKind::Heavy { .. } | RadiusKind::HeavyTruncated { .. }) {
                    return Err(Error::domain("estimator", "truncated and capped means need a heavy-tail radius"));
                }
                Ok(())
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PolicySpec::TwoPhase { .. } => "two-phase",
            PolicySpec::Sequential { .. } => "sequential",
            PolicySpec::Hoeffding { .. } => "hoeffding",
            PolicySpec::Capped { .. } => "capped",
            PolicySpec::SuccessiveElimination { .. } => "succ-elim",
        }
    }
}

impl Policy for PolicySpec {
    fn objective(&self) -> Objective {
        match self {
            PolicySpec::TwoPhase { .. } | PolicySpec::Sequential { .. } => Objective::Sign,
            PolicySpec::Hoeffding { .. } | PolicySpec::Capped { .. } => Objective::Minimize,
            PolicySpec::SuccessiveElimination { .. } => Objective::Maximize,
        }
    }

    fn run(&self, samplers: &mut [ModelSampler], delta: f64) -> Result<SelectionOutcome> {
        match self {
            PolicySpec::TwoPhase { c1, c2, phase2_cap } => {
                two_phase_select(&mut samplers[0], delta, *c1, *c2, phase2_cap.unwrap_or(DEFAULT_PHASE2_CAP))
            }
            PolicySpec::Sequential { c_schedule, round_cap } => {
                sequential_select(&mut samplers[0], delta, c_schedule, round_cap.unwrap_or(DEFAULT_ROUND_CAP))
            }
            PolicySpec::Hoeffding { epsilon, b } => hoeffding_select(samplers, *epsilon, delta, *b),
            PolicySpec::Capped { epsilon, bounds, beta } => {
                let beta = match beta {
                    Some(b) => *b,
                    None => optimal_beta(bounds)?,
                };
                capped_select(samplers, *epsilon, delta, bounds, beta)
            }
            PolicySpec::SuccessiveElimination { radius, estimator, pull_cap } => {
                let schedule = RadiusSchedule::new(*radius, samplers.len(), delta)?;
                successive_elimination(samplers, &schedule, *estimator, *pull_cap)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McReport {
    pub replications: u64,
    pub fs_count: u64,
    pub fs_rate: f64,
    /// 99% normal-approximation half-width, `2.576·√(f(1−f)/n)`.
    pub ci_halfwidth: f64,
    pub mean_samples: f64,
}

impl McReport {
    /// Aggregates judged outcomes. Integer accumulation makes the result
    /// independent of replication order.
    pub fn from_outcomes(outcomes: &[SelectionOutcome]) -> Self {
        let n = outcomes.len() as u64;
        let fs_count = outcomes.iter().filter(|o| o.false_selection == Some(true)).count() as u64;
        let samples: u128 = outcomes.iter().map(|o| o.total_samples() as u128).sum();
        let f = fs_count as f64 / n as f64;
        McReport {
            replications: n,
            fs_count,
            fs_rate: f,
            ci_halfwidth: 2.576 * (f * (1.0 - f) / n as f64).sqrt(),
            mean_samples: samples as f64 / n as f64,
        }
    }
}

fn check_truth(policy: &dyn Policy, truth: &[PopulationModel]) -> Result<Vec<f64>> {
    if truth.is_empty() {
        return Err(Error::domain("truth", "needs at least one population"));
    }
    for (i, m) in truth.iter().enumerate() {
        m.validate().map_err(|e| e.within(&format!("truth.{i}")))?;
    }
    if policy.objective() == Objective::Sign && truth.len() != 1 {
        return Err(Error::domain("truth", "the sign problem takes exactly one population"));
    }
    let means: Vec<f64> = truth.iter().map(|m| m.mean()).collect();
    best_index(&means, policy.objective())?;
    Ok(means)
}

/// Runs `replications` independent copies of the policy, judged against the
/// true means, in replication order. Replication r draws arm i from stream
/// `stream_id(r, i)` of `seed`.
pub fn monte_carlo_outcomes(
    policy: &dyn Policy,
    truth: &[PopulationModel],
    delta: f64,
    replications: u64,
    seed: u64,
) -> Result<Vec<SelectionOutcome>> {
    if replications == 0 {
        return Err(Error::domain("replications", "must be at least 1"));
    }
    let means = check_truth(policy, truth)?;
    (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut samplers = truth
                .iter()
                .enumerate()
                .map(|(i, m)| ModelSampler::new(m.clone(), seed, stream_id(r, i)))
                .collect::<Result<Vec<_>>>()?;
            Ok(policy.run(&mut samplers, delta)?.judge(&means, policy.objective()))
        })
        .collect()
}

/// Empirical false-selection rate of a policy.
pub fn monte_carlo_fs(
    policy: &dyn Policy,
    truth: &[PopulationModel],
    delta: f64,
    replications: u64,
    seed: u64,
) -> Result<McReport> {
    Ok(McReport::from_outcomes(&monte_carlo_outcomes(policy, truth, delta, replications, seed)?))
}
