//! Analytic population models: samplers, log-MGFs, rate functions, densities,
//! quantiles and KL divergences.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::empirical_rate::{RateEstimate, RateStatus};
use crate::error::{check_finite, check_positive, Error, Result};
use crate::ext::ExtReal;
use crate::numerics::{bisect, integrate, log1mexp, logaddexp, logsumexp, QuadOptions};
use crate::rng::{stream_rng, StreamRng};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// A sampling distribution with known law.
///
/// Serialized with a `variant` tag, e.g. `{ variant = "two-point", b = 1.0, p_minus = 0.55 }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum PopulationModel {
    /// −b with probability `p_minus`, +b otherwise.
    TwoPoint { b: f64, p_minus: f64 },
    /// `X = K − Y` with `Y ~ Exp(lambda)`; support `(−∞, K]`.
    ShiftedExponential {
        #[serde(alias = "K")]
        k: f64,
        lambda: f64,
    },
    /// `X = Y − K` with `Y ~ Exp(lambda)`; support `[−K, ∞)`.
    ReversedExponential {
        #[serde(alias = "K")]
        k: f64,
        lambda: f64,
    },
    Gaussian { mu: f64, sigma: f64 },
    /// `p·N(0, 1) + (1 − p)·N(mu, 1)`.
    GaussianMixture { p: f64, mu: f64 },
    Bernoulli { q: f64 },
    /// Lomax (Pareto type II): `P(X > x) = (1 + x/scale)^(−alpha_tail)` on `x ≥ 0`.
    /// `E X^r` is finite exactly for `r < alpha_tail`.
    Pareto { alpha_tail: f64, scale: f64 },
    /// Uniform over the listed points (repeats count with multiplicity).
    Empirical { values: Vec<f64> },
    /// `(1 − gamma)·base + gamma·(base | X ≥ b)`: the base law with mass below
    /// `b` scaled by `1 − gamma` and mass above `b` scaled up to compensate.
    Tilted {
        base: Box<PopulationModel>,
        b: f64,
        gamma: f64,
    },
}

/// An ordered batch of i.i.d. draws with its seed lineage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub values: Vec<f64>,
    pub model_id: Option<String>,
    pub seed: u64,
    pub stream_index: u64,
}

impl SampleBatch {
    pub fn from_values(values: Vec<f64>) -> Self {
        SampleBatch {
            values,
            model_id: None,
            seed: 0,
            stream_index: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

impl AsRef<[f64]> for SampleBatch {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// A source of i.i.d. draws consumed by the selection policies.
pub trait Sampler {
    fn draw(&mut self) -> f64;
}

impl<F: FnMut() -> f64> Sampler for F {
    fn draw(&mut self) -> f64 {
        self()
    }
}

/// Draws from a model on a dedicated `(seed, stream)` generator.
#[derive(Debug, Clone)]
pub struct ModelSampler {
    model: PopulationModel,
    rng: StreamRng,
}

impl ModelSampler {
    pub fn new(model: PopulationModel, seed: u64, stream: u64) -> Result<Self> {
        model.validate()?;
        Ok(ModelSampler {
            model,
            rng: stream_rng(seed, stream),
        })
    }

    pub fn model(&self) -> &PopulationModel {
        &self.model
    }
}

impl Sampler for ModelSampler {
    fn draw(&mut self) -> f64 {
        self.model.draw(&mut self.rng)
    }
}

/// Replays a fixed sequence; panics when exhausted.
#[derive(Debug, Clone)]
pub struct ReplaySampler {
    values: Vec<f64>,
    pos: usize,
}

impl ReplaySampler {
    pub fn new(values: Vec<f64>) -> Self {
        ReplaySampler { values, pos: 0 }
    }

    pub fn consumed(&self) -> usize {
        self.pos
    }
}

impl Sampler for ReplaySampler {
    fn draw(&mut self) -> f64 {
        let v = self.values[self.pos];
        self.pos += 1;
        v
    }
}

/// One row of the exact law of the empirical rate for a two-point population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateLawRow {
    /// Number of positive samples.
    pub k: usize,
    pub probability: f64,
    pub value: ExtReal,
}

/// Exact law of `Î_m(0)` for `TwoPoint { b, p_minus }` samples of size m.
///
/// `Î_m(0)` depends only on the count k of positive samples (and not on b):
/// it is `log(m / (2√(k(m−k))))` for `0 < k < m` and +∞ otherwise.
pub fn two_point_rate_law(m: usize, p_minus: f64) -> Result<Vec<RateLawRow>> {
    if m == 0 {
        return Err(Error::domain("m", "must be at least 1"));
    }
    if !(0.0..=1.0).contains(&p_minus) {
        return Err(Error::domain("p_minus", format!("must lie in [0, 1], got {p_minus}")));
    }
    let ln_plus = (1.0 - p_minus).ln();
    let ln_minus = p_minus.ln();
    let mf = m as f64;
    let mut log_choose = 0.0;
    let mut rows = Vec::with_capacity(m + 1);
    for k in 0..=m {
        if k > 0 {
            log_choose += ((m - k + 1) as f64).ln() - (k as f64).ln();
        }
        let kf = k as f64;
        let lp = log_choose
            + if k == 0 { 0.0 } else { kf * ln_plus }
            + if k == m { 0.0 } else { (mf - kf) * ln_minus };
        let value = if k == 0 || k == m {
            ExtReal::PosInfinity
        } else {
            ExtReal::Finite((mf / (2.0 * (kf * (mf - kf)).sqrt())).ln())
        };
        rows.push(RateLawRow {
            k,
            probability: lp.exp(),
            value,
        });
    }
    Ok(rows)
}

fn gauss_log_sf(z: f64) -> f64 {
    if z < 30.0 {
        (0.5 * erfc(z / std::f64::consts::SQRT_2)).ln()
    } else {
        // Asymptotic expansion of the Mills ratio.
        let z2 = z * z;
        -0.5 * z2 - LN_SQRT_2PI - z.ln() + (1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2)).ln()
    }
}

fn gauss_log_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

fn bernoulli_kl(a: f64, q: f64) -> f64 {
    let term = |x: f64, y: f64| if x == 0.0 { 0.0 } else { x * (x / y).ln() };
    term(a, q) + term(1.0 - a, 1.0 - q)
}

impl PopulationModel {
    pub fn validate(&self) -> Result<()> {
        use PopulationModel::*;
        let prob = |field: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::domain(field, format!("must lie in [0, 1], got {p}")))
            }
        };
        match self {
            TwoPoint { b, p_minus } => {
                check_positive("b", *b)?;
                prob("p_minus", *p_minus)
            }
            ShiftedExponential { k, lambda } | ReversedExponential { k, lambda } => {
                check_finite("k", *k)?;
                check_positive("lambda", *lambda)
            }
            Gaussian { mu, sigma } => {
                check_finite("mu", *mu)?;
                check_positive("sigma", *sigma)
            }
            GaussianMixture { p, mu } => {
                check_finite("mu", *mu)?;
                if *p > 0.0 && *p < 1.0 {
                    Ok(())
                } else {
                    Err(Error::domain("p", format!("must lie in (0, 1), got {p}")))
                }
            }
            Bernoulli { q } => prob("q", *q),
            Pareto { alpha_tail, scale } => {
                check_positive("scale", *scale)?;
                if *alpha_tail > 1.0 && alpha_tail.is_finite() {
                    Ok(())
                } else {
                    Err(Error::domain("alpha_tail", format!("must be > 1 for a finite mean, got {alpha_tail}")))
                }
            }
            Empirical { values } => {
                if values.is_empty() {
                    return Err(Error::domain("values", "must be nonempty"));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::domain("values", "must be finite"));
                }
                Ok(())
            }
            Tilted { base, b, gamma } => {
                base.validate().map_err(|e| e.within("base"))?;
                if base.is_discrete() {
                    return Err(Error::domain("base", "tilting needs a model with a density"));
                }
                check_finite("b", *b)?;
                if *gamma >= 0.0 && *gamma < 1.0 {
                    Ok(())
                } else {
                    Err(Error::domain("gamma", format!("must lie in [0, 1), got {gamma}")))
                }
            }
        }
    }

    pub fn variant_name(&self) -> &'static str {
        use PopulationModel::*;
        match self {
            TwoPoint { .. } => "two-point",
            ShiftedExponential { .. } => "shifted-exponential",
            ReversedExponential { .. } => "reversed-exponential",
            Gaussian { .. } => "gaussian",
            GaussianMixture { .. } => "gaussian-mixture",
            Bernoulli { .. } => "bernoulli",
            Pareto { .. } => "pareto",
            Empirical { .. } => "empirical",
            Tilted { .. } => "tilted",
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(
            self,
            PopulationModel::TwoPoint { .. } | PopulationModel::Bernoulli { .. } | PopulationModel::Empirical { .. }
        )
    }

    /// Sorted distinct atoms with positive probability, for discrete models.
    pub fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        use PopulationModel::*;
        let raw: Vec<(f64, f64)> = match self {
            TwoPoint { b, p_minus } => vec![(-b, *p_minus), (*b, 1.0 - p_minus)],
            Bernoulli { q } => vec![(0.0, 1.0 - q), (1.0, *q)],
            Empirical { values } => {
                let w = 1.0 / values.len() as f64;
                values.iter().map(|&v| (v, w)).collect()
            }
            _ => return None,
        };
        let mut raw: Vec<(f64, f64)> = raw.into_iter().filter(|(_, p)| *p > 0.0).collect();
        raw.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
        for (x, p) in raw {
            match out.last_mut() {
                Some(last) if last.0 == x => last.1 += p,
                _ => out.push((x, p)),
            }
        }
        Some(out)
    }

    pub fn mean(&self) -> f64 {
        use PopulationModel::*;
        match self {
            TwoPoint { b, p_minus } => b * (1.0 - 2.0 * p_minus),
            ShiftedExponential { k, lambda } => k - 1.0 / lambda,
            ReversedExponential { k, lambda } => 1.0 / lambda - k,
            Gaussian { mu, .. } => *mu,
            GaussianMixture { p, mu } => (1.0 - p) * mu,
            Bernoulli { q } => *q,
            Pareto { alpha_tail, scale } => scale / (alpha_tail - 1.0),
            Empirical { values } => values.iter().sum::<f64>() / values.len() as f64,
            Tilted { base, b, gamma } => {
                (1.0 - gamma) * base.mean() + gamma * base.conditional_upper_mean(*b, |x| x)
            }
        }
    }

    /// Variance; +∞ for a Pareto model with `alpha_tail ≤ 2`.
    pub fn variance(&self) -> f64 {
        use PopulationModel::*;
        match self {
            TwoPoint { b, p_minus } => 4.0 * b * b * p_minus * (1.0 - p_minus),
            ShiftedExponential { lambda, .. } | ReversedExponential { lambda, .. } => 1.0 / (lambda * lambda),
            Gaussian { sigma, .. } => sigma * sigma,
            GaussianMixture { p, mu } => 1.0 + p * (1.0 - p) * mu * mu,
            Bernoulli { q } => q * (1.0 - q),
            Pareto { alpha_tail: a, scale: s } => {
                if *a <= 2.0 {
                    f64::INFINITY
                } else {
                    s * s * a / ((a - 1.0) * (a - 1.0) * (a - 2.0))
                }
            }
            Empirical { values } => {
                let m = self.mean();
                values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
            }
            Tilted { base, b, gamma } => {
                let mean = self.mean();
                let base_second = base.variance() + base.mean() * base.mean();
                let second = (1.0 - gamma) * base_second + gamma * base.conditional_upper_mean(*b, |x| x * x);
                second - mean * mean
            }
        }
    }

    /// `E|X|^r`, the quantity bounded by the heavy-tail policies.
    pub fn abs_moment(&self, r: f64) -> f64 {
        use PopulationModel::*;
        match self {
            Pareto { alpha_tail: a, scale: s } => {
                if r >= *a {
                    return f64::INFINITY;
                }
                use statrs::function::gamma::ln_gamma;
                (r * s.ln() + ln_gamma(r + 1.0) + ln_gamma(a - r) - ln_gamma(*a)).exp()
            }
            _ => match self.atoms() {
                Some(atoms) => atoms.iter().map(|(x, p)| p * x.abs().powf(r)).sum(),
                None => self.expect(|x| x.abs().powf(r)),
            },
        }
    }

    /// Lower and upper end of the support (possibly infinite).
    pub fn support(&self) -> (f64, f64) {
        use PopulationModel::*;
        match self {
            ShiftedExponential { k, .. } => (f64::NEG_INFINITY, *k),
            ReversedExponential { k, .. } => (-k, f64::INFINITY),
            Gaussian { .. } | GaussianMixture { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Pareto { .. } => (0.0, f64::INFINITY),
            Tilted { base, .. } => base.support(),
            _ => {
                let atoms = self.atoms().expect("discrete model");
                (atoms[0].0, atoms[atoms.len() - 1].0)
            }
        }
    }

    /// Interval `[lo, hi]` outside of which Λ is +∞. Whether an end is attained
    /// is decided by evaluating [`Self::log_mgf`] there.
    pub fn mgf_domain(&self) -> (f64, f64) {
        use PopulationModel::*;
        match self {
            ShiftedExponential { lambda, .. } => (-lambda, f64::INFINITY),
            ReversedExponential { lambda, .. } => (f64::NEG_INFINITY, *lambda),
            Pareto { .. } => (f64::NEG_INFINITY, 0.0),
            Tilted { base, .. } => base.mgf_domain(),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Typical length scale, used to map infinite integration ranges.
    pub(crate) fn quad_scale(&self) -> f64 {
        use PopulationModel::*;
        match self {
            ShiftedExponential { lambda, .. } | ReversedExponential { lambda, .. } => 1.0 / lambda,
            Gaussian { sigma, .. } => *sigma,
            GaussianMixture { .. } => 1.0,
            Pareto { scale, .. } => *scale,
            Tilted { base, .. } => base.quad_scale(),
            _ => 1.0,
        }
    }

    pub(crate) fn breakpoints(&self) -> Vec<f64> {
        use PopulationModel::*;
        match self {
            Gaussian { mu, .. } => vec![*mu],
            GaussianMixture { mu, .. } => vec![0.0, *mu],
            ShiftedExponential { k, lambda } => vec![k - 1.0 / lambda],
            ReversedExponential { k, lambda } => vec![1.0 / lambda - k],
            Pareto { scale, .. } => vec![*scale],
            Tilted { base, b, .. } => {
                let mut v = base.breakpoints();
                v.push(*b);
                v
            }
            _ => vec![],
        }
    }

    /// Log-density; -∞ outside the support. Panics for discrete models.
    pub fn log_pdf(&self, x: f64) -> f64 {
        use PopulationModel::*;
        match self {
            ShiftedExponential { k, lambda } => {
                if x > *k {
                    f64::NEG_INFINITY
                } else {
                    lambda.ln() - lambda * (k - x)
                }
            }
            ReversedExponential { k, lambda } => {
                if x < -k {
                    f64::NEG_INFINITY
                } else {
                    lambda.ln() - lambda * (x + k)
                }
            }
            Gaussian { mu, sigma } => gauss_log_pdf((x - mu) / sigma) - sigma.ln(),
            GaussianMixture { p, mu } => logaddexp(p.ln() + gauss_log_pdf(x), (1.0 - p).ln() + gauss_log_pdf(x - mu)),
            Pareto { alpha_tail: a, scale: s } => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    a.ln() - s.ln() - (a + 1.0) * (x / s).ln_1p()
                }
            }
            Tilted { base, b, gamma } => {
                let lg = base.log_pdf(x);
                if x < *b {
                    (-gamma).ln_1p() + lg
                } else {
                    lg + logaddexp((-gamma).ln_1p(), gamma.ln() - base.log_sf(*b))
                }
            }
            _ => panic!("{} has no density", self.variant_name()),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.log_pdf(x).exp()
    }

    /// `log P(X ≤ x)`.
    pub fn log_cdf(&self, x: f64) -> f64 {
        use PopulationModel::*;
        match self {
            ShiftedExponential { k, lambda } => {
                if x >= *k {
                    0.0
                } else {
                    -lambda * (k - x)
                }
            }
            Gaussian { mu, sigma } => gauss_log_sf(-(x - mu) / sigma),
            GaussianMixture { p, mu } => logaddexp(p.ln() + gauss_log_sf(-x), (1.0 - p).ln() + gauss_log_sf(mu - x)),
            ReversedExponential { .. } | Pareto { .. } => log1mexp(self.log_sf(x)),
            Tilted { .. } => {
                let ls = self.log_sf(x);
                if ls == f64::NEG_INFINITY {
                    0.0
                } else {
                    log1mexp(ls)
                }
            }
            _ => {
                let atoms = self.atoms().unwrap();
                let c: f64 = atoms.iter().filter(|(a, _)| *a <= x).map(|(_, p)| p).sum();
                c.min(1.0).ln()
            }
        }
    }

    /// `log P(X > x)`.
    pub fn log_sf(&self, x: f64) -> f64 {
        use PopulationModel::*;
        match self {
            ReversedExponential { k, lambda } => {
                if x <= -k {
                    0.0
                } else {
                    -lambda * (x + k)
                }
            }
            Pareto { alpha_tail: a, scale: s } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -a * (x / s).ln_1p()
                }
            }
            Gaussian { mu, sigma } => gauss_log_sf((x - mu) / sigma),
            GaussianMixture { p, mu } => logaddexp(p.ln() + gauss_log_sf(x), (1.0 - p).ln() + gauss_log_sf(x - mu)),
            ShiftedExponential { .. } => {
                let lc = self.log_cdf(x);
                if lc == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    log1mexp(lc)
                }
            }
            Tilted { base, b, gamma } => {
                // (1-γ)·Ḡ(x) + γ·Ḡ(max(x,b))/Ḡ(b)
                let lower = (-gamma).ln_1p() + base.log_sf(x);
                let upper = if x < *b { gamma.ln() } else { gamma.ln() + base.log_sf(x) - base.log_sf(*b) };
                logaddexp(lower, upper)
            }
            _ => {
                let atoms = self.atoms().unwrap();
                let s: f64 = atoms.iter().filter(|(a, _)| *a > x).map(|(_, p)| p).sum();
                s.ln()
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.log_cdf(x).exp()
    }

    /// `∫ h(x) dF(x)` by quadrature (density models) or an atom sum.
    pub fn expect(&self, h: impl Fn(f64) -> f64) -> f64 {
        if let Some(atoms) = self.atoms() {
            return atoms.iter().map(|(x, p)| p * h(*x)).sum();
        }
        let (lo, hi) = self.support();
        integrate(
            |x| {
                let w = self.log_pdf(x).exp();
                if w == 0.0 {
                    [0.0]
                } else {
                    [h(x) * w]
                }
            },
            lo,
            hi,
            &self.breakpoints(),
            self.quad_scale(),
            QuadOptions::default(),
        )
        .value[0]
    }

    /// `E[h(X) | X ≥ b]` for a density model, computed in log space so it stays
    /// accurate when `P(X ≥ b)` underflows.
    pub fn conditional_upper_mean(&self, b: f64, h: impl Fn(f64) -> f64) -> f64 {
        self.conditional_upper_integral(b, 0.0, h)
    }

    /// Reciprocal hazard at b: the decay length of the law conditioned on X ≥ b.
    fn tail_length(&self, b: f64) -> f64 {
        let l = (self.log_sf(b) - self.log_pdf(b)).exp();
        if l.is_finite() && l > 0.0 {
            l.min(self.quad_scale())
        } else {
            self.quad_scale()
        }
    }

    /// `E[(X−b)^power · e^{θ(X−b)} | X ≥ b]`, evaluated in log space.
    pub(crate) fn conditional_upper_exp_moment(&self, b: f64, theta: f64, power: i32) -> f64 {
        let (lo, hi) = self.support();
        let b = b.max(lo);
        if b >= hi {
            return if power == 0 { 1.0 } else { 0.0 };
        }
        let lsf = self.log_sf(b);
        let len = self.tail_length(b);
        let scale = len / (1.0 - theta * len).max(1e-3);
        integrate(
            |x| {
                let d = x - b;
                let w = (theta * d + self.log_pdf(x) - lsf).exp();
                if w == 0.0 {
                    [0.0]
                } else {
                    [d.powi(power) * w]
                }
            },
            b,
            hi,
            &self.breakpoints(),
            scale,
            QuadOptions::default(),
        )
        .value[0]
    }

    /// `E[h(X) | X ≥ b]` for h of at most polynomial growth.
    fn conditional_upper_integral(&self, b: f64, rate: f64, h: impl Fn(f64) -> f64) -> f64 {
        let (lo, hi) = self.support();
        let b = b.max(lo);
        if b >= hi {
            return h(hi);
        }
        let lsf = self.log_sf(b);
        let len = self.tail_length(b);
        let scale = len / (1.0 - rate * len).max(1e-3);
        integrate(
            |x| {
                let w = (self.log_pdf(x) - lsf).exp();
                if w == 0.0 {
                    [0.0]
                } else {
                    [h(x) * w]
                }
            },
            b,
            hi,
            &self.breakpoints(),
            scale,
            QuadOptions::default(),
        )
        .value[0]
    }

    /// `log E e^{θX}`; +∞ outside the MGF domain.
    pub fn log_mgf(&self, theta: f64) -> ExtReal {
        use PopulationModel::*;
        if theta == 0.0 {
            return ExtReal::ZERO;
        }
        let (dlo, dhi) = self.mgf_domain();
        if theta < dlo || theta > dhi {
            return ExtReal::PosInfinity;
        }
        let v = match self {
            ShiftedExponential { k, lambda } => {
                if theta <= -lambda {
                    return ExtReal::PosInfinity;
                }
                theta * k - (theta / lambda).ln_1p()
            }
            ReversedExponential { k, lambda } => {
                if theta >= *lambda {
                    return ExtReal::PosInfinity;
                }
                -theta * k - (-theta / lambda).ln_1p()
            }
            Gaussian { mu, sigma } => theta * mu + 0.5 * theta * theta * sigma * sigma,
            GaussianMixture { p, mu } => 0.5 * theta * theta + logaddexp(p.ln(), (1.0 - p).ln() + theta * mu),
            Pareto { alpha_tail: a, scale: s } => {
                // θ < 0 here; E e^{θX} = ∫_0^∞ e^{θx} f(x) dx
                let width = s.min(1.0 / -theta);
                let v = integrate(
                    |x| [(theta * x + a.ln() - s.ln() - (a + 1.0) * (x / s).ln_1p()).exp()],
                    0.0,
                    f64::INFINITY,
                    &[],
                    width,
                    QuadOptions::default(),
                )
                .value[0];
                v.ln()
            }
            Tilted { base, b, gamma } => {
                let base_l = match base.log_mgf(theta) {
                    ExtReal::Finite(v) => v,
                    ExtReal::PosInfinity => return ExtReal::PosInfinity,
                };
                // log E[e^{θX} | X ≥ b] = θb + log E[e^{θ(X−b)} | X ≥ b]
                let upper = theta * b + base.conditional_upper_exp_moment(*b, theta, 0).ln();
                logaddexp((-gamma).ln_1p() + base_l, gamma.ln() + upper)
            }
            _ => {
                let atoms = self.atoms().unwrap();
                let terms: Vec<f64> = atoms.iter().map(|(x, p)| p.ln() + theta * x).collect();
                logsumexp(&terms)
            }
        };
        ExtReal::Finite(v)
    }

    /// `Λ′(θ)`, the mean of the exponentially tilted law; `None` outside the domain.
    pub fn log_mgf_derivative(&self, theta: f64) -> Option<f64> {
        use PopulationModel::*;
        if self.log_mgf(theta).is_infinite() {
            return None;
        }
        let d = match self {
            ShiftedExponential { k, lambda } => k - 1.0 / (lambda + theta),
            ReversedExponential { k, lambda } => 1.0 / (lambda - theta) - k,
            Gaussian { mu, sigma } => mu + theta * sigma * sigma,
            GaussianMixture { p, mu } => {
                // weight of the shifted component under the tilt
                let w = 1.0 / (1.0 + (p.ln() - (1.0 - p).ln() - theta * mu).exp());
                theta + w * mu
            }
            Pareto { .. } => {
                let l = self.log_mgf(theta).unwrap();
                self.expect(|x| x * (theta * x - l).exp())
            }
            Tilted { base, b, gamma } => {
                let l = self.log_mgf(theta).unwrap();
                let lb = base.log_mgf(theta).unwrap();
                let lower = (1.0 - gamma) * (lb - l).exp() * base.log_mgf_derivative(theta).unwrap();
                // E[X e^{θX} | X ≥ b] = e^{θb}·(E[(X−b)e^{θ(X−b)}] + b·E[e^{θ(X−b)}])
                let m0 = base.conditional_upper_exp_moment(*b, theta, 0);
                let m1 = base.conditional_upper_exp_moment(*b, theta, 1);
                lower + gamma * (theta * b - l).exp() * (m1 + b * m0)
            }
            _ => {
                let atoms = self.atoms().unwrap();
                let l = self.log_mgf(theta).unwrap();
                atoms.iter().map(|(x, p)| x * (p.ln() + theta * x - l).exp()).sum()
            }
        };
        Some(d)
    }

    /// The Legendre transform `I(a) = sup_θ (θa − Λ(θ))`.
    pub fn rate_function(&self, a: f64) -> RateEstimate {
        use PopulationModel::*;
        let mean = self.mean();
        if a == mean {
            return RateEstimate::at_mean();
        }
        let (slo, shi) = self.support();
        let side = if a > mean { RateStatus::DivergesRight } else { RateStatus::DivergesLeft };
        if a > shi || a < slo {
            return RateEstimate::diverging(side);
        }
        let finite = |value: f64, theta: Option<f64>, status| RateEstimate {
            value: ExtReal::Finite(value.max(0.0)),
            theta_star: theta,
            status,
            iterations: 0,
        };
        match self {
            Gaussian { mu, sigma } => {
                let s2 = sigma * sigma;
                return finite((a - mu) * (a - mu) / (2.0 * s2), Some((a - mu) / s2), RateStatus::Interior);
            }
            Bernoulli { q } => {
                if a == 0.0 || a == 1.0 {
                    return finite(bernoulli_kl(a, *q), None, RateStatus::Limit);
                }
                let theta = (a * (1.0 - q) / ((1.0 - a) * q)).ln();
                return finite(bernoulli_kl(a, *q), Some(theta), RateStatus::Interior);
            }
            TwoPoint { b, p_minus } => {
                let plus = (1.0 + a / b) / 2.0;
                if plus == 0.0 || plus == 1.0 {
                    return finite(bernoulli_kl(plus, 1.0 - p_minus), None, RateStatus::Limit);
                }
                let theta = (plus * p_minus / ((1.0 - plus) * (1.0 - p_minus))).ln() / (2.0 * b);
                return finite(bernoulli_kl(plus, 1.0 - p_minus), Some(theta), RateStatus::Interior);
            }
            _ => {}
        }
        if self.is_discrete() && (a == slo || a == shi) {
            let atoms = self.atoms().unwrap();
            let p = if a == slo { atoms[0].1 } else { atoms[atoms.len() - 1].1 };
            return finite(-p.ln(), None, RateStatus::Limit);
        }
        if !self.is_discrete() && (a == slo || a == shi) {
            return RateEstimate::diverging(side);
        }

        // Bracket the root of Λ′(θ) = a on the side of θ given by sign(a − mean).
        let dir = if a > mean { 1.0 } else { -1.0 };
        let (dlo, dhi) = self.mgf_domain();
        let edge = if dir > 0.0 { dhi } else { dlo };
        let value_at = |t: f64| t * a - self.log_mgf(t).to_f64();
        let mut near = 0.0;
        let mut far = None;
        let mut iterations = 0;
        if edge.is_finite() {
            if edge == 0.0 {
                // Λ is infinite on this whole side: the supremum sits at θ = 0.
                return finite(0.0, Some(0.0), RateStatus::Boundary);
            }
            for j in 1..=60 {
                iterations += 1;
                let t = edge * (1.0 - 0.5f64.powi(j));
                match self.log_mgf_derivative(t) {
                    Some(d) if (d - a) * dir >= 0.0 => {
                        far = Some(t);
                        break;
                    }
                    Some(_) => near = t,
                    None => break,
                }
            }
            if far.is_none() {
                if let ExtReal::Finite(_) = self.log_mgf(edge) {
                    return finite(value_at(edge), Some(edge), RateStatus::Boundary);
                }
                far = Some(edge * (1.0 - 0.5f64.powi(60)));
            }
        } else {
            let mut t = dir;
            while t.abs() <= 2f64.powi(40) {
                iterations += 1;
                match self.log_mgf_derivative(t) {
                    Some(d) if (d - a) * dir >= 0.0 => {
                        far = Some(t);
                        break;
                    }
                    _ => {
                        near = t;
                        t *= 2.0;
                    }
                }
            }
            if far.is_none() {
                return finite(value_at(near), None, RateStatus::Limit);
            }
        }
        let far = far.unwrap();
        let (lo, hi) = if dir > 0.0 { (near, far) } else { (far, near) };
        let tol = 1e-14 * lo.abs().max(hi.abs()).max(1e-300);
        let theta = bisect(
            |t| match self.log_mgf_derivative(t) {
                Some(d) => d - a,
                None => dir * f64::INFINITY,
            },
            lo,
            hi,
            tol,
        )
        .unwrap_or(0.5 * (lo + hi));
        RateEstimate {
            value: ExtReal::Finite(value_at(theta).max(0.0)),
            theta_star: Some(theta),
            status: RateStatus::Interior,
            iterations: iterations + 60,
        }
    }

    /// Generalized inverse `inf{x : F(x) ≥ p}`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        use PopulationModel::*;
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain("p", format!("must lie in (0, 1), got {p}")));
        }
        self.validate()?;
        Ok(match self {
            ShiftedExponential { k, lambda } => k + p.ln() / lambda,
            ReversedExponential { k, lambda } => -k - (-p).ln_1p() / lambda,
            Gaussian { mu, sigma } => Normal::new(*mu, *sigma).unwrap().inverse_cdf(p),
            Pareto { alpha_tail: a, scale: s } => s * ((-(-p).ln_1p() / a).exp() - 1.0),
            GaussianMixture { .. } | Tilted { .. } => self.invert_log_cdf(p.ln(), 1e-10),
            _ => {
                let atoms = self.atoms().unwrap();
                let mut c = 0.0;
                for (x, w) in &atoms {
                    c += w;
                    if c >= p * (1.0 - 1e-15) {
                        return Ok(*x);
                    }
                }
                atoms[atoms.len() - 1].0
            }
        })
    }

    /// Solve `log F(x) = target` by bisection to absolute tolerance `tol`.
    fn invert_log_cdf(&self, target: f64, tol: f64) -> f64 {
        let (slo, shi) = self.support();
        let s = self.quad_scale();
        let mut lo = if slo.is_finite() { slo } else { self.mean() - s };
        while slo.is_infinite() && self.log_cdf(lo) > target {
            lo -= (self.mean() - lo).abs().max(s);
        }
        let mut hi = if shi.is_finite() { shi } else { self.mean() + s };
        while shi.is_infinite() && self.log_cdf(hi) < target {
            hi += (hi - self.mean()).abs().max(s);
        }
        bisect(|x| self.log_cdf(x) - target, lo, hi, tol).unwrap_or(0.5 * (lo + hi))
    }

    /// Solve `log P(X > x) = target` (deep upper tail), by bisection.
    fn invert_log_sf(&self, target: f64) -> f64 {
        use PopulationModel::*;
        match self {
            ReversedExponential { k, lambda } => -k - target / lambda,
            Pareto { alpha_tail: a, scale: s } => s * ((-target / a).exp() - 1.0),
            _ => {
                let s = self.quad_scale();
                let (slo, shi) = self.support();
                let mut lo = if slo.is_finite() { slo } else { self.mean() - s };
                while self.log_sf(lo) < target {
                    lo -= (self.mean() - lo).abs().max(s);
                }
                let mut hi = self.mean().max(lo) + s;
                while self.log_sf(hi) > target && hi < shi {
                    hi += (hi - lo).abs().max(s);
                }
                let hi = hi.min(shi);
                let tol = 1e-13 * hi.abs().max(s);
                bisect(|x| target - self.log_sf(x), lo, hi, tol).unwrap_or(0.5 * (lo + hi))
            }
        }
    }

    /// One draw. The model must already be validated.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        use PopulationModel::*;
        match self {
            TwoPoint { b, p_minus } => {
                if rng.random::<f64>() < *p_minus {
                    -b
                } else {
                    *b
                }
            }
            Bernoulli { q } => {
                if rng.random::<f64>() < *q {
                    1.0
                } else {
                    0.0
                }
            }
            ShiftedExponential { k, lambda } => {
                let e: f64 = rng.sample(Exp1);
                k - e / lambda
            }
            ReversedExponential { k, lambda } => {
                let e: f64 = rng.sample(Exp1);
                e / lambda - k
            }
            Gaussian { mu, sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                mu + sigma * z
            }
            GaussianMixture { p, mu } => {
                let first = rng.random::<f64>() < *p;
                let z: f64 = rng.sample(StandardNormal);
                if first {
                    z
                } else {
                    mu + z
                }
            }
            Pareto { alpha_tail, scale } => {
                let u = 1.0 - rng.random::<f64>();
                scale * ((-u.ln() / alpha_tail).exp() - 1.0)
            }
            Empirical { values } => values[rng.random_range(0..values.len())],
            Tilted { base, b, gamma } => {
                if rng.random::<f64>() >= *gamma {
                    base.draw(rng)
                } else {
                    let u = 1.0 - rng.random::<f64>();
                    base.invert_log_sf(base.log_sf(*b) + u.ln()).max(*b)
                }
            }
        }
    }

    /// `n` draws from stream `(seed, stream)`.
    pub fn sample(&self, seed: u64, stream: u64, n: usize) -> Result<SampleBatch> {
        self.validate()?;
        if n == 0 {
            return Err(Error::domain("n", "must be at least 1"));
        }
        let mut rng = stream_rng(seed, stream);
        let values = (0..n).map(|_| self.draw(&mut rng)).collect();
        Ok(SampleBatch {
            values,
            model_id: Some(self.variant_name().to_string()),
            seed,
            stream_index: stream,
        })
    }
}

/// `KL(g ‖ g_tilde) = ∫ log(dG/dG̃) dG`.
///
/// Closed form for Gaussian and Bernoulli pairs and any pair of discrete laws;
/// adaptive quadrature of the log-density ratio otherwise. +∞ when G is not
/// absolutely continuous with respect to G̃.
pub fn kl_divergence(g: &PopulationModel, g_tilde: &PopulationModel) -> Result<ExtReal> {
    use PopulationModel::*;
    g.validate().map_err(|e| e.within("g"))?;
    g_tilde.validate().map_err(|e| e.within("g_tilde"))?;
    if g == g_tilde {
        return Ok(ExtReal::ZERO);
    }
    match (g, g_tilde) {
        (Gaussian { mu: m1, sigma: s1 }, Gaussian { mu: m2, sigma: s2 }) => {
            let v = (s2 / s1).ln() + (s1 * s1 + (m1 - m2) * (m1 - m2)) / (2.0 * s2 * s2) - 0.5;
            return Ok(ExtReal::Finite(v.max(0.0)));
        }
        (Bernoulli { q: a }, Bernoulli { q: b }) => {
            if (*b == 0.0 && *a > 0.0) || (*b == 1.0 && *a < 1.0) {
                return Ok(ExtReal::PosInfinity);
            }
            return Ok(ExtReal::Finite(bernoulli_kl(*a, *b)));
        }
        _ => {}
    }
    match (g.is_discrete(), g_tilde.is_discrete()) {
        (true, true) => {
            let pa = g.atoms().unwrap();
            let qa = g_tilde.atoms().unwrap();
            let mut s = 0.0;
            for (x, p) in pa {
                match qa.iter().find(|(y, _)| *y == x) {
                    Some((_, q)) => s += p * (p / q).ln(),
                    None => return Ok(ExtReal::PosInfinity),
                }
            }
            Ok(ExtReal::Finite(s.max(0.0)))
        }
        (false, false) => {
            let (glo, ghi) = g.support();
            let (qlo, qhi) = g_tilde.support();
            if glo < qlo || ghi > qhi {
                return Ok(ExtReal::PosInfinity);
            }
            let mut bp = g.breakpoints();
            bp.extend(g_tilde.breakpoints());
            let q = integrate(
                |x| {
                    let lp = g.log_pdf(x);
                    if lp == f64::NEG_INFINITY {
                        return [0.0];
                    }
                    let lq = g_tilde.log_pdf(x);
                    if lq == f64::NEG_INFINITY {
                        return [f64::INFINITY];
                    }
                    [lp.exp() * (lp - lq)]
                },
                glo,
                ghi,
                &bp,
                g.quad_scale(),
                QuadOptions::default(),
            );
            let v = q.value[0];
            if v.is_nan() || v == f64::INFINITY {
                Ok(ExtReal::PosInfinity)
            } else {
                Ok(ExtReal::Finite(v.max(0.0)))
            }
        }
        _ => Err(Error::SupportIncompatible(format!(
            "{} is {} but {} is {}",
            g.variant_name(),
            if g.is_discrete() { "discrete" } else { "continuous" },
            g_tilde.variant_name(),
            if g_tilde.is_discrete() { "discrete" } else { "continuous" },
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn shifted() -> PopulationModel {
        PopulationModel::ShiftedExponential { k: 0.96, lambda: 1.0 }
    }

    fn zoo() -> Vec<PopulationModel> {
        use PopulationModel::*;
        vec![
            TwoPoint { b: 1.0, p_minus: 0.55 },
            TwoPoint { b: 2.5, p_minus: 0.3 },
            shifted(),
            ReversedExponential { k: 0.96, lambda: 1.0 },
            ReversedExponential { k: 2.0, lambda: 3.0 },
            Gaussian { mu: -0.3, sigma: 1.7 },
            GaussianMixture { p: 0.3, mu: 4.0 },
            Bernoulli { q: 0.3 },
            Pareto { alpha_tail: 4.0, scale: 1.5 },
            Empirical { values: vec![1.0, -2.0, 0.5, 0.5] },
            Tilted { base: Box::new(ReversedExponential { k: 0.5, lambda: 1.0 }), b: 3.0, gamma: 0.2 },
        ]
    }

    #[test]
    fn degenerate_samplers() {
        let v = PopulationModel::TwoPoint { b: 1.0, p_minus: 1.0 }.sample(9, 0, 5).unwrap();
        assert_eq!(v.values, vec![-1.0; 5]);
        let v = PopulationModel::Bernoulli { q: 0.0 }.sample(9, 0, 3).unwrap();
        assert_eq!(v.values, vec![0.0; 3]);
        assert!(PopulationModel::Bernoulli { q: 1.5 }.sample(1, 1, 3).is_err());
        assert!(shifted().sample(1, 1, 0).is_err());
    }

    #[test]
    fn sampling_is_reproducible() {
        let a = shifted().sample(42, 7, 100).unwrap();
        let b = shifted().sample(42, 7, 100).unwrap();
        let c = shifted().sample(42, 8, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values, c.values);
        assert_eq!(a.stream_index, 7);
    }

    #[test]
    fn shifted_exponential_sample_mean() {
        let n = 1_000_000;
        let batch = shifted().sample(2024, 0, n).unwrap();
        let se = (shifted().variance() / n as f64).sqrt();
        assert!((batch.mean() - (-0.04)).abs() < 3.0 * se, "mean {}", batch.mean());
    }

    #[test]
    fn sample_means_converge() {
        let n = 100_000;
        for (i, m) in zoo().iter().enumerate() {
            let var = m.variance();
            if !var.is_finite() {
                continue;
            }
            let batch = m.sample(11, i as u64, n).unwrap();
            let tol = 5.0 * (var / n as f64).sqrt();
            assert!((batch.mean() - m.mean()).abs() <= tol, "{m:?}: {} vs {}", batch.mean(), m.mean());
        }
    }

    #[test]
    fn log_mgf_examples() {
        for m in zoo() {
            assert_eq!(m.log_mgf(0.0), ExtReal::ZERO);
        }
        let tp = PopulationModel::TwoPoint { b: 1.0, p_minus: 0.55 };
        for &t in &[-2.0f64, -0.3, 0.7, 5.0] {
            let want = (0.55 * (-t).exp() + 0.45 * t.exp()).ln();
            assert_abs_diff_eq!(tp.log_mgf(t).unwrap(), want, epsilon = 1e-14);
        }
        assert_eq!(shifted().log_mgf(-1.0), ExtReal::PosInfinity);
        assert_abs_diff_eq!(shifted().log_mgf(0.5).unwrap(), 0.48 - 1.5f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn quadrature_log_mgf_matches_closed_forms() {
        // Lomax: E e^{θX} has no elementary form; compare with direct summation
        // over a fine grid in the uniform variable.
        let m = PopulationModel::Pareto { alpha_tail: 3.0, scale: 2.0 };
        let theta = -0.7;
        let n = 200_000;
        let direct: f64 = (0..n)
            .map(|i| {
                let u = (i as f64 + 0.5) / n as f64;
                (theta * 2.0 * (u.powf(-1.0 / 3.0) - 1.0)).exp()
            })
            .sum::<f64>()
            / n as f64;
        assert_abs_diff_eq!(m.log_mgf(theta).unwrap(), direct.ln(), epsilon = 1e-8);
        // Tilted over a reversed exponential: the conditional law above b is b + Exp(λ).
        let base = PopulationModel::ReversedExponential { k: 0.5, lambda: 2.0 };
        let (b, g) = (3.0, 0.2);
        let t = PopulationModel::Tilted { base: Box::new(base.clone()), b, gamma: g };
        let theta = 0.8;
        let want = ((1.0 - g) * base.log_mgf(theta).unwrap().exp() + g * (theta * b).exp() * 2.0 / (2.0 - theta)).ln();
        assert_abs_diff_eq!(t.log_mgf(theta).unwrap(), want, epsilon = 1e-10);
        assert_abs_diff_eq!(t.mean(), (1.0 - g) * base.mean() + g * (b + 0.5), epsilon = 1e-10);
    }

    #[test]
    fn derivative_at_zero_is_mean() {
        let h = 1e-6;
        for m in zoo() {
            let fd = (m.log_mgf(h).to_f64() - m.log_mgf(-h).to_f64()) / (2.0 * h);
            if m.log_mgf(h).is_infinite() || m.log_mgf(-h).is_infinite() {
                // one-sided domain (Lomax): use the left difference
                let fd = (0.0 - m.log_mgf(-h).unwrap()) / h;
                assert!((fd - m.mean()).abs() < 1e-4, "{m:?}");
                continue;
            }
            assert!((fd - m.mean()).abs() < 1e-4, "{m:?}: {fd} vs {}", m.mean());
        }
    }

    #[test]
    fn log_mgf_is_convex() {
        for m in zoo() {
            let (dlo, dhi) = m.mgf_domain();
            let lo = dlo.max(-3.0) * 0.98;
            let hi = dhi.min(3.0) * 0.98;
            for i in 0..20 {
                let t1 = lo + (hi - lo) * i as f64 / 19.0;
                let t2 = hi - (hi - lo) * (i as f64 * 0.37).fract();
                let mid = m.log_mgf(0.5 * (t1 + t2)).unwrap();
                let avg = 0.5 * (m.log_mgf(t1).unwrap() + m.log_mgf(t2).unwrap());
                assert!(mid <= avg + 1e-12 * (1.0 + avg.abs()), "{m:?} at {t1}, {t2}");
            }
        }
    }

    #[test]
    fn rate_function_examples() {
        let tp = PopulationModel::TwoPoint { b: 1.0, p_minus: 0.55 };
        let r = tp.rate_function(0.0);
        assert_abs_diff_eq!(r.value.unwrap(), -(2.0 * (0.55f64 * 0.45).sqrt()).ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(r.value.unwrap(), 0.0050252, epsilon = 1e-7);
        assert_abs_diff_eq!(r.theta_star.unwrap(), 0.5 * (0.55f64 / 0.45).ln(), epsilon = 1e-14);

        // I(0) = λK − 1 − log(λK) for X = K − Y
        let r = shifted().rate_function(0.0);
        let want = 0.96 - 1.0 - 0.96f64.ln();
        assert_abs_diff_eq!(r.value.unwrap(), want, epsilon = 1e-13);
        assert_abs_diff_eq!(r.theta_star.unwrap(), 1.0 / 0.96 - 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(want, 8.218e-4, epsilon = 3e-7);

        for m in zoo() {
            assert_eq!(m.rate_function(m.mean()).value, ExtReal::ZERO);
        }
        assert_eq!(shifted().rate_function(0.96).value, ExtReal::PosInfinity);
        assert_eq!(tp.rate_function(1.5).status, RateStatus::DivergesRight);
        assert_abs_diff_eq!(tp.rate_function(1.0).value.unwrap(), -(0.45f64.ln()), epsilon = 1e-15);
        // heavy upper tail: no exponential decay above the mean
        let lomax = PopulationModel::Pareto { alpha_tail: 3.0, scale: 1.0 };
        assert_eq!(lomax.rate_function(2.0).value, ExtReal::ZERO);
        assert!(lomax.rate_function(0.1).value.unwrap() > 0.0);
    }

    #[test]
    fn generic_rate_matches_closed_forms() {
        // Gaussian via the generic path: a two-component mixture with p → tiny is
        // not closed form, so compare the exponential models against their
        // closed forms I(a) = λ(K−a) − 1 − log(λ(K−a)).
        let (k, lambda) = (0.96, 1.3);
        let m = PopulationModel::ShiftedExponential { k, lambda };
        for &a in &[-3.0, -1.0, 0.0, 0.5, 0.9] {
            let u = lambda * (k - a);
            assert_abs_diff_eq!(m.rate_function(a).value.unwrap(), u - 1.0 - u.ln(), epsilon = 1e-12);
        }
        let r = PopulationModel::ReversedExponential { k, lambda };
        for &a in &[-0.9, -0.5, 0.0, 2.0, 7.0] {
            let u = lambda * (a + k);
            assert_abs_diff_eq!(r.rate_function(a).value.unwrap(), u - 1.0 - u.ln(), epsilon = 1e-12);
        }
    }

    #[test]
    fn rate_is_nonnegative_and_vanishes_only_at_mean() {
        for m in zoo() {
            let mean = m.mean();
            let sd = m.variance().sqrt().min(3.0);
            for i in 0..100 {
                let a = mean - 2.0 * sd + 4.0 * sd * (i as f64 + 0.5) / 100.0;
                let r = m.rate_function(a);
                assert!(r.value >= 0.0, "{m:?} at {a}");
                if (a - mean).abs() > 1e-3 && !matches!(m, PopulationModel::Pareto { .. }) {
                    assert!(r.value > 0.0, "{m:?} at {a}");
                }
            }
        }
    }

    #[test]
    fn two_point_law() {
        let rows = two_point_rate_law(4, 0.55).unwrap();
        assert_abs_diff_eq!(rows[1].value.unwrap(), (4.0 / (2.0 * 3f64.sqrt())).ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(rows[1].value.unwrap(), 0.143841, epsilon = 1e-6);
        assert_eq!(rows[0].value, ExtReal::PosInfinity);
        assert_eq!(rows[4].value, ExtReal::PosInfinity);
        assert_eq!(two_point_rate_law(2, 0.3).unwrap()[1].value, ExtReal::ZERO);
        for &m in &[1usize, 7, 100, 2000] {
            for &p in &[0.0, 0.3, 0.55, 1.0] {
                let s: f64 = two_point_rate_law(m, p).unwrap().iter().map(|r| r.probability).sum();
                assert!((s - 1.0).abs() <= 1e-12, "m={m} p={p} sum={s}");
            }
        }
        assert!(two_point_rate_law(0, 0.5).is_err());
    }

    #[test]
    fn kl_examples() {
        use PopulationModel::*;
        let want = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert_abs_diff_eq!(
            kl_divergence(&Bernoulli { q: 0.5 }, &Bernoulli { q: 0.25 }).unwrap().unwrap(),
            want,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(want, 0.143841, epsilon = 1e-6);
        for m in zoo() {
            assert_eq!(kl_divergence(&m, &m).unwrap(), ExtReal::ZERO);
        }
        assert!(matches!(
            kl_divergence(&Bernoulli { q: 0.5 }, &Gaussian { mu: 0.0, sigma: 1.0 }),
            Err(Error::SupportIncompatible(_))
        ));
        // reversed exponentials with different shifts: support not nested
        let a = ReversedExponential { k: 1.0, lambda: 1.0 };
        let b = ReversedExponential { k: 0.5, lambda: 1.0 };
        assert_eq!(kl_divergence(&a, &b).unwrap(), ExtReal::PosInfinity);
        assert!(kl_divergence(&b, &a).unwrap().is_finite());
    }

    #[test]
    fn quadrature_kl_matches_gaussian_closed_form() {
        use PopulationModel::*;
        // A mixture with weight → 1 on the N(0,1) component is N(0,1) up to
        // a vanishing perturbation; use exponential pairs for an exact check.
        let g = ShiftedExponential { k: 1.0, lambda: 2.0 };
        let h = ShiftedExponential { k: 1.0, lambda: 0.5 };
        // KL(Exp(a) ‖ Exp(b)) = log(a/b) + b/a − 1
        let want = (2.0f64 / 0.5).ln() + 0.5 / 2.0 - 1.0;
        assert_abs_diff_eq!(kl_divergence(&g, &h).unwrap().unwrap(), want, epsilon = 1e-9);
        let tilt = Tilted { base: Box::new(ReversedExponential { k: 0.5, lambda: 1.0 }), b: 3.0, gamma: 0.1 };
        let base = ReversedExponential { k: 0.5, lambda: 1.0 };
        // piecewise-constant likelihood ratio: G(b)·log(1/(1−γ)) + Ḡ(b)·log(1/β)
        let gb = 1.0 - (-3.5f64).exp();
        let beta = 1.0 + 0.1 * gb / (1.0 - gb);
        let want = gb * -(0.9f64.ln()) - (1.0 - gb) * beta.ln();
        assert_abs_diff_eq!(kl_divergence(&base, &tilt).unwrap().unwrap(), want, epsilon = 1e-10);
    }

    #[test]
    fn quantile_examples() {
        use PopulationModel::*;
        assert_abs_diff_eq!(Gaussian { mu: 0.0, sigma: 1.0 }.quantile(0.5).unwrap(), 0.0, epsilon = 1e-12);
        assert_eq!(Bernoulli { q: 0.3 }.quantile(0.5).unwrap(), 0.0);
        assert_eq!(Bernoulli { q: 0.3 }.quantile(0.71).unwrap(), 1.0);
        let mix = GaussianMixture { p: 0.3, mu: 10.0 };
        let q = mix.quantile(0.3).unwrap();
        assert!(q < 5.0);
        assert!((mix.cdf(q) - 0.3).abs() < 1e-9);
        assert!(mix.quantile(0.0).is_err());
        assert!(mix.quantile(1.0).is_err());
        for m in zoo() {
            if m.is_discrete() {
                continue;
            }
            for &p in &[0.01, 0.3, 0.5, 0.9] {
                let x = m.quantile(p).unwrap();
                assert!((m.cdf(x) - p).abs() < 1e-8, "{m:?} p={p}");
            }
        }
    }

    #[test]
    fn tilted_upper_draws_respect_the_split() {
        let t = PopulationModel::Tilted {
            base: Box::new(PopulationModel::Gaussian { mu: 0.0, sigma: 1.0 }),
            b: 2.0,
            gamma: 0.5,
        };
        let batch = t.sample(3, 0, 200_000).unwrap();
        let above = batch.values.iter().filter(|&&x| x >= 2.0).count() as f64 / 200_000.0;
        let want = t.log_sf(2.0).exp();
        assert!((above - want).abs() < 0.005, "{above} vs {want}");
    }

    #[test]
    fn config_round_trip() {
        let m: PopulationModel = serde_json::from_str(r#"{"variant":"shifted-exponential","K":0.96,"lambda":1.0}"#).unwrap();
        assert_eq!(m, shifted());
        let s = serde_json::to_string(&PopulationModel::TwoPoint { b: 1.0, p_minus: 0.55 }).unwrap();
        assert_eq!(s, r#"{"variant":"two-point","b":1.0,"p_minus":0.55}"#);
    }

    proptest! {
        #[test]
        fn kl_nonnegative_on_grids(a in 0.01f64..0.99, b in 0.01f64..0.99, m1 in -3.0f64..3.0, s1 in 0.2f64..3.0) {
            use PopulationModel::*;
            let k = kl_divergence(&Bernoulli { q: a }, &Bernoulli { q: b }).unwrap().unwrap();
            prop_assert!(k >= 0.0);
            if (a - b).abs() > 1e-3 { prop_assert!(k > 0.0); }
            let k = kl_divergence(&Gaussian { mu: m1, sigma: s1 }, &Gaussian { mu: 0.0, sigma: 1.0 }).unwrap().unwrap();
            prop_assert!(k >= 0.0);
            let k = kl_divergence(&GaussianMixture { p: a, mu: m1 }, &GaussianMixture { p: b, mu: m1 }).unwrap().unwrap();
            prop_assert!(k >= 0.0);
        }
    }
}
