//! The empirical log-MGF `Λ̂_m(θ) = log((1/m) Σ exp(θ X_i))` and the plug-in
//! rate estimator `Î_m(x) = sup_θ (θx − Λ̂_m(θ))`.

use serde::{Deserialize, Serialize};

use crate::ext::ExtReal;
use crate::numerics::newton_bracketed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateStatus {
    /// Optimum at a finite stationary point.
    Interior,
    /// Value +∞, approached as θ → −∞ (every sample is positive).
    DivergesLeft,
    /// Value +∞, approached as θ → +∞ (every sample is negative).
    DivergesRight,
    /// Evaluated at the mean: the optimiser is θ = 0 and the value is 0.
    AtMean,
    /// Optimum at the edge of the MGF domain (population models only).
    Boundary,
    /// Finite value approached only as |θ| → ∞, e.g. a sample of zeros and
    /// positives, or a level equal to the edge of a bounded support.
    Limit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub value: ExtReal,
    pub theta_star: Option<f64>,
    pub status: RateStatus,
    pub iterations: usize,
}

impl RateEstimate {
    pub(crate) fn diverging(status: RateStatus) -> Self {
        RateEstimate {
            value: ExtReal::PosInfinity,
            theta_star: None,
            status,
            iterations: 0,
        }
    }

    pub(crate) fn at_mean() -> Self {
        RateEstimate {
            value: ExtReal::ZERO,
            theta_star: Some(0.0),
            status: RateStatus::AtMean,
            iterations: 0,
        }
    }
}

/// Bracket expansion cap for the derivative root, in units of 1/max|X_i|.
pub const BRACKET_CAP: f64 = 1024.0;
/// Root tolerance on the scaled derivative.
pub const DERIVATIVE_TOL: f64 = 1e-12;

/// `Λ̂_m(θ)`, computed with a max shift so `θ·X_i` up to ±700 and beyond is safe.
pub fn empirical_log_mgf(batch: impl AsRef<[f64]>, theta: f64) -> f64 {
    let xs = batch.as_ref();
    assert!(!xs.is_empty(), "empirical log-MGF of an empty batch");
    if theta == 0.0 {
        return 0.0;
    }
    let shift = xs.iter().map(|x| theta * x).fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = xs.iter().map(|x| (theta * x - shift).exp()).sum();
    shift + s.ln() - (xs.len() as f64).ln()
}

/// `(Λ̂, Λ̂′, Λ̂″)` at θ: log-MGF, tilted mean and tilted variance.
fn moments(xs: &[f64], theta: f64) -> (f64, f64, f64) {
    let shift = xs.iter().map(|x| theta * x).fold(f64::NEG_INFINITY, f64::max);
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for &x in xs {
        let w = (theta * x - shift).exp();
        s0 += w;
        s1 += w * x;
        s2 += w * x * x;
    }
    let mean = s1 / s0;
    let var = (s2 / s0 - mean * mean).max(0.0);
    (shift + s0.ln() - (xs.len() as f64).ln(), mean, var)
}

/// `Î_m(0) = −inf_θ Λ̂_m(θ)`.
///
/// Λ̂′ is the tilted sample mean and is increasing, so the minimiser is the
/// root of Λ̂′. The sample is rescaled to max|X_i| = 1 (the estimate is scale
/// free), the root is bracketed from `[−1, 1]` by doubling up to
/// [`BRACKET_CAP`], and polished by bracketed Newton steps. A sample of one
/// strict sign has `inf Λ̂ = −∞` and is reported as diverging with value +∞.
pub fn estimate_rate_at_zero(batch: impl AsRef<[f64]>) -> RateEstimate {
    let xs = batch.as_ref();
    assert!(!xs.is_empty(), "rate estimate from an empty batch");
    let scale = xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return RateEstimate::at_mean();
    }
    let ys: Vec<f64> = xs.iter().map(|x| x / scale).collect();
    let n_pos = ys.iter().filter(|&&y| y > 0.0).count();
    let n_neg = ys.iter().filter(|&&y| y < 0.0).count();
    let n_zero = ys.len() - n_pos - n_neg;
    if n_neg == 0 || n_pos == 0 {
        if n_zero == 0 {
            return RateEstimate::diverging(if n_pos > 0 {
                RateStatus::DivergesLeft
            } else {
                RateStatus::DivergesRight
            });
        }
        // Zeros plus one sign: Λ̂ decreases to log(n_zero/m) without attaining it.
        return RateEstimate {
            value: ExtReal::Finite((ys.len() as f64 / n_zero as f64).ln()),
            theta_star: None,
            status: RateStatus::Limit,
            iterations: 0,
        };
    }

    let (_, d0, _) = moments(&ys, 0.0);
    if d0.abs() <= DERIVATIVE_TOL {
        return RateEstimate {
            value: ExtReal::ZERO,
            theta_star: Some(0.0),
            status: RateStatus::Interior,
            iterations: 0,
        };
    }
    // The root lies on the side opposite to the sign of the mean.
    let dir = -d0.signum();
    let mut near = 0.0;
    let mut far = dir;
    let mut expansions = 0;
    loop {
        let (_, d, _) = moments(&ys, far);
        if d.abs() <= DERIVATIVE_TOL || d.signum() == dir {
            break;
        }
        near = far;
        far *= 2.0;
        expansions += 1;
        if far.abs() > BRACKET_CAP {
            // Both signs present but the root is beyond reach: only possible
            // when the minority sign has magnitude below ~e^-1024.
            let theta = near;
            let (l, _, _) = moments(&ys, theta);
            return RateEstimate {
                value: ExtReal::Finite((-l).max(0.0)),
                theta_star: None,
                status: RateStatus::Limit,
                iterations: expansions,
            };
        }
    }
    let (lo, hi) = if dir > 0.0 { (near, far) } else { (far, near) };
    let (theta, it) = newton_bracketed(
        |t| {
            let (_, d, v) = moments(&ys, t);
            (d, v)
        },
        lo,
        hi,
        DERIVATIVE_TOL,
        200,
    );
    let (l, _, _) = moments(&ys, theta);
    RateEstimate {
        value: ExtReal::Finite((-l).max(0.0)),
        theta_star: Some(theta / scale),
        status: RateStatus::Interior,
        iterations: expansions + it,
    }
}

/// `Î_m(x)`: the rate at level x is the rate of the shifted sample `X_i − x` at 0.
pub fn estimate_rate_at(batch: impl AsRef<[f64]>, x: f64) -> RateEstimate {
    let shifted: Vec<f64> = batch.as_ref().iter().map(|v| v - x).collect();
    estimate_rate_at_zero(shifted)
}

/// Infimum of Λ̂ over `[theta_lo, theta_hi]` and where it is attained.
pub fn restricted_inf_log_mgf(batch: impl AsRef<[f64]>, theta_lo: f64, theta_hi: f64) -> (f64, f64) {
    let xs = batch.as_ref();
    assert!(theta_lo <= theta_hi, "empty θ interval");
    let (l_lo, d_lo, _) = moments(xs, theta_lo);
    if d_lo >= 0.0 {
        return (if theta_lo == 0.0 { 0.0 } else { l_lo }, theta_lo);
    }
    let (l_hi, d_hi, _) = moments(xs, theta_hi);
    if d_hi <= 0.0 {
        return (if theta_hi == 0.0 { 0.0 } else { l_hi }, theta_hi);
    }
    let tol = DERIVATIVE_TOL * xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let (theta, _) = newton_bracketed(
        |t| {
            let (_, d, v) = moments(xs, t);
            (d, v)
        },
        theta_lo,
        theta_hi,
        tol,
        200,
    );
    (empirical_log_mgf(xs, theta), theta)
}
