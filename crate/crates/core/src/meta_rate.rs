//! The second-level rate function
//!
//! ```text
//! 𝓘_θ(ν) = sup_α ( αν − log E exp(α e^{θX}) )
//! ```
//!
//! which is the Cramér rate of the sample mean of `W = e^{θX}` at level ν and
//! governs large deviations of the empirical rate estimator. Built on top of
//! it: the infimum over θ (probability that the estimate is too large), the
//! supremum over `Θ_a = {θ : Λ(θ) ≤ −a}` (probability that it is too small),
//! the failure exponent of the two-phase procedure and the failure
//! certificate of the sequential procedure.

use serde::Serialize;

use crate::error::{check_positive, Error, Result};
use crate::ext::ExtReal;
use crate::numerics::{bisect, geomspace, golden_min, grid_then_golden, integrate, logsumexp, newton_bracketed, QuadOptions};
use crate::populations::PopulationModel;

/// Bracket for every θ search.
pub const THETA_MAX: f64 = 64.0;
/// Smallest |θ| on the search grids.
pub const THETA_MIN: f64 = 1e-3;

/// Law of `W = e^{θX}`, in whichever parametrisation makes `E[W^j e^{αW}]`
/// easy to integrate accurately.
#[derive(Debug, Clone)]
enum WLaw<'a> {
    /// Atoms `(w, log p)`.
    Atoms(Vec<(f64, f64)>),
    /// `W = scale·Z` with Z Pareto on `[1, ∞)`: density `κ z^{−κ−1}`.
    ParetoLike { scale: f64, kappa: f64 },
    /// `W = scale·U^power` with U uniform on (0, 1).
    UniformPower { scale: f64, power: f64 },
    /// Any other density model, integrated in x.
    Density { model: &'a PopulationModel, theta: f64 },
}

/// `log E e^{αW}`, `E_α W` and `Var_α W` under the α-tilted law of W.
#[derive(Debug, Clone, Copy)]
struct Tilt {
    log_mgf: f64,
    mean: f64,
    var: f64,
}

impl<'a> WLaw<'a> {
    fn new(model: &'a PopulationModel, theta: f64) -> Self {
        use PopulationModel::*;
        if theta == 0.0 {
            return WLaw::Atoms(vec![(1.0, 0.0)]);
        }
        if let Some(atoms) = model.atoms() {
            return WLaw::Atoms(atoms.iter().map(|(x, p)| ((theta * x).exp(), p.ln())).collect());
        }
        match model {
            // X = K − Y: W = e^{θK}·e^{−θY}
            ShiftedExponential { k, lambda } => Self::exponential(theta * k, -theta, *lambda),
            // X = Y − K: W = e^{−θK}·e^{θY}
            ReversedExponential { k, lambda } => Self::exponential(-theta * k, theta, *lambda),
            _ => WLaw::Density { model, theta },
        }
    }

    /// `W = e^{log_scale}·e^{s·Y}` with `Y ~ Exp(λ)`.
    fn exponential(log_scale: f64, s: f64, lambda: f64) -> Self {
        let scale = log_scale.exp();
        if s > 0.0 {
            // Z = e^{sY}: P(Z > z) = z^{−λ/s}
            WLaw::ParetoLike { scale, kappa: lambda / s }
        } else {
            // e^{sY} = U^{−s/λ}
            WLaw::UniformPower { scale, power: -s / lambda }
        }
    }

    /// Essential infimum and supremum of W.
    fn range(&self) -> (f64, f64) {
        match self {
            WLaw::Atoms(a) => (
                a.iter().map(|x| x.0).fold(f64::INFINITY, f64::min),
                a.iter().map(|x| x.0).fold(f64::NEG_INFINITY, f64::max),
            ),
            WLaw::ParetoLike { scale, .. } => (*scale, f64::INFINITY),
            WLaw::UniformPower { scale, .. } => (0.0, *scale),
            WLaw::Density { model, theta } => {
                let (lo, hi) = model.support();
                let (a, b) = ((theta * lo).exp(), (theta * hi).exp());
                (a.min(b), a.max(b))
            }
        }
    }

    /// Probability of the atom at an end of the range, 0 for continuous laws.
    fn end_mass(&self, w: f64) -> f64 {
        match self {
            WLaw::Atoms(a) => a.iter().filter(|x| x.0 == w).map(|x| x.1.exp()).sum(),
            _ => 0.0,
        }
    }

    /// Whether `E e^{αW}` is finite.
    fn alpha_admissible(&self, alpha: f64) -> bool {
        alpha <= 0.0 || self.range().1.is_finite()
    }

    fn tilt(&self, alpha: f64) -> Tilt {
        match self {
            WLaw::Atoms(atoms) => {
                let logs: Vec<f64> = atoms.iter().map(|(w, lp)| lp + alpha * w).collect();
                let l = logsumexp(&logs);
                let mut mean = 0.0;
                for ((w, _), lw) in atoms.iter().zip(&logs) {
                    mean += w * (lw - l).exp();
                }
                let mut var = 0.0;
                for ((w, _), lw) in atoms.iter().zip(&logs) {
                    var += (w - mean) * (w - mean) * (lw - l).exp();
                }
                Tilt { log_mgf: l, mean, var }
            }
            WLaw::ParetoLike { scale, kappa } => pareto_like_tilt(*scale, *kappa, alpha),
            WLaw::UniformPower { scale, power } => uniform_power_tilt(*scale, *power, alpha),
            WLaw::Density { model, theta } => density_tilt(model, *theta, alpha),
        }
    }

    /// `E W`, possibly +∞.
    fn mean(&self) -> f64 {
        match self {
            WLaw::ParetoLike { scale, kappa } => {
                if *kappa > 1.0 {
                    scale * kappa / (kappa - 1.0)
                } else {
                    f64::INFINITY
                }
            }
            _ => self.tilt(0.0).mean,
        }
    }
}

fn pareto_like_tilt(c: f64, kappa: f64, alpha: f64) -> Tilt {
    let beta = -alpha * c;
    debug_assert!(beta >= 0.0);
    if beta == 0.0 {
        let m1 = if kappa > 1.0 { kappa / (kappa - 1.0) } else { f64::INFINITY };
        let m2 = if kappa > 2.0 { kappa / (kappa - 2.0) } else { f64::INFINITY };
        return Tilt {
            log_mgf: 0.0,
            mean: c * m1,
            var: c * c * (m2 - m1 * m1),
        };
    }
    // ∫_1^∞ z^j e^{−βz} κ z^{−κ−1} dz = κ e^{−β}/β · ∫_0^∞ e^{−v} (1 + v/β)^{j−κ−1} dv
    let q = integrate(
        |v| {
            let base = (v / beta).ln_1p();
            let e = (-v).exp();
            if e == 0.0 {
                return [0.0; 3];
            }
            [
                e * ((-kappa - 1.0) * base).exp(),
                e * ((-kappa) * base).exp(),
                e * ((1.0 - kappa) * base).exp(),
            ]
        },
        0.0,
        f64::INFINITY,
        &[beta.min(1.0), (10.0 * beta).min(1.0)],
        1.0,
        QuadOptions::default(),
    );
    let [k0, k1, k2] = q.value;
    let mean = c * k1 / k0;
    let second = c * c * k2 / k0;
    Tilt {
        log_mgf: kappa.ln() - beta - beta.ln() + k0.ln(),
        mean,
        var: (second - mean * mean).max(0.0),
    }
}

fn uniform_power_tilt(c: f64, p: f64, alpha: f64) -> Tilt {
    let a = alpha * c;
    let shift = a.max(0.0);
    let mut bp = vec![];
    if a * p > 2.0 {
        bp.push(1.0 - 1.0 / (a * p));
        bp.push((1.0 - 30.0 / (a * p)).max(0.0));
    }
    if a < -1.0 {
        let u0 = (-a).powf(-1.0 / p);
        bp.push(u0);
        bp.push((10.0 * u0).min(0.999));
    }
    let q = integrate(
        |u| {
            let v = u.powf(p);
            let e = (a * v - shift).exp();
            [e, e * v, e * v * v]
        },
        0.0,
        1.0,
        &bp,
        1.0,
        QuadOptions::default(),
    );
    let [j0, j1, j2] = q.value;
    let mean = c * j1 / j0;
    Tilt {
        log_mgf: shift + j0.ln(),
        mean,
        var: (c * c * j2 / j0 - mean * mean).max(0.0),
    }
}

fn density_tilt(model: &PopulationModel, theta: f64, alpha: f64) -> Tilt {
    let f0 = |x: f64| alpha * (theta * x).exp() + model.log_pdf(x);
    // Locate the bulk of exp(f0) to shift and split the integral there.
    let grid: Vec<f64> = [1e-12, 1e-8, 1e-4, 0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0 - 1e-4, 1.0 - 1e-8, 1.0 - 1e-12]
        .iter()
        .filter_map(|&p| model.quantile(p).ok())
        .collect();
    let (mut x_best, mut f_best) = (grid[0], f64::NEG_INFINITY);
    for &x in &grid {
        let v = f0(x);
        if v > f_best {
            x_best = x;
            f_best = v;
        }
    }
    let shift = f_best;
    let mut bp = model.breakpoints();
    bp.push(x_best);
    let (lo, hi) = model.support();
    let q = integrate(
        |x| {
            let lf = f0(x) - shift;
            let e = lf.exp();
            if e == 0.0 {
                return [0.0; 3];
            }
            let w = (theta * x).exp();
            [e, e * w, e * w * w]
        },
        lo,
        hi,
        &bp,
        model.quad_scale(),
        QuadOptions::default(),
    );
    let [j0, j1, j2] = q.value;
    let mean = j1 / j0;
    Tilt {
        log_mgf: shift + j0.ln(),
        mean,
        var: (j2 / j0 - mean * mean).max(0.0),
    }
}

/// `log E exp(α e^{θX})`; +∞ when the expectation diverges (α > 0 with
/// `e^{θX}` unbounded).
pub fn tilted_log_mgf(model: &PopulationModel, alpha: f64, theta: f64) -> ExtReal {
    if alpha == 0.0 {
        return ExtReal::ZERO;
    }
    let law = WLaw::new(model, theta);
    if !law.alpha_admissible(alpha) {
        return ExtReal::PosInfinity;
    }
    ExtReal::Finite(law.tilt(alpha).log_mgf)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetaRateResult {
    pub value: ExtReal,
    /// Maximiser of the inner problem; ±∞ when the supremum is not attained.
    pub alpha_star: f64,
    pub theta: f64,
    pub nu: f64,
    /// The supremum sits at the edge `α = 0` of the finite-MGF region.
    pub alpha_at_boundary: bool,
}

fn meta_rate_on_law(law: &WLaw, theta: f64, nu: f64) -> MetaRateResult {
    let result = |value: ExtReal, alpha_star: f64, boundary: bool| MetaRateResult {
        value,
        alpha_star,
        theta,
        nu,
        alpha_at_boundary: boundary,
    };
    let (w_lo, w_hi) = law.range();
    if w_lo == w_hi {
        return if nu == w_lo {
            result(ExtReal::ZERO, 0.0, false)
        } else {
            result(ExtReal::PosInfinity, if nu < w_lo { f64::NEG_INFINITY } else { f64::INFINITY }, false)
        };
    }
    let ew = law.mean();
    if (nu - ew).abs() <= 1e-15 * nu {
        return result(ExtReal::ZERO, 0.0, false);
    }
    let below = nu < ew;
    if below && nu <= w_lo {
        let mass = law.end_mass(w_lo);
        let v = if nu == w_lo && mass > 0.0 { ExtReal::Finite(-mass.ln()) } else { ExtReal::PosInfinity };
        return result(v, f64::NEG_INFINITY, false);
    }
    if !below {
        if w_hi.is_infinite() {
            // α is confined to (−∞, 0] and the objective increases up to 0.
            return result(ExtReal::ZERO, 0.0, true);
        }
        if nu >= w_hi {
            let mass = law.end_mass(w_hi);
            let v = if nu == w_hi && mass > 0.0 { ExtReal::Finite(-mass.ln()) } else { ExtReal::PosInfinity };
            return result(v, f64::INFINITY, false);
        }
    }

    // Root of E_α W = ν; E_α W increases in α with slope Var_α W.
    let dir = if below { -1.0 } else { 1.0 };
    let unit = 1.0 / nu;
    let mut near = 0.0;
    let mut far = dir * unit;
    for _ in 0..200 {
        let m = law.tilt(far).mean;
        if (m - nu) * dir >= 0.0 || m.is_nan() {
            break;
        }
        near = far;
        far *= 2.0;
    }
    let (lo, hi) = if below { (far, near) } else { (near, far) };
    let (alpha, _) = newton_bracketed(
        |a| {
            let t = law.tilt(a);
            (t.mean - nu, t.var)
        },
        lo,
        hi,
        1e-14 * nu,
        300,
    );
    let t = law.tilt(alpha);
    result(ExtReal::Finite((alpha * nu - t.log_mgf).max(0.0)), alpha, false)
}

/// `𝓘_θ(ν)`: a concave maximisation over α, solved by bracketed Newton steps
/// on `ν − ∂_α log E e^{αW}`. When `e^{θX}` is unbounded the admissible α are
/// non-positive and the supremum for `ν ≥ E W` sits at α = 0.
pub fn meta_rate(model: &PopulationModel, theta: f64, nu: f64) -> Result<MetaRateResult> {
    model.validate()?;
    check_positive("nu", nu)?;
    if !theta.is_finite() {
        return Err(Error::domain("theta", "must be finite"));
    }
    Ok(meta_rate_on_law(&WLaw::new(model, theta), theta, nu))
}

fn meta_value(model: &PopulationModel, theta: f64, nu: f64) -> f64 {
    meta_rate_on_law(&WLaw::new(model, theta), theta, nu).value.to_f64()
}

/// Both-signs θ grid: `±[THETA_MIN, THETA_MAX]`, sorted.
fn theta_grid(n_per_side: usize) -> Vec<f64> {
    let pos = geomspace(THETA_MIN, THETA_MAX, n_per_side);
    let mut g: Vec<f64> = pos.iter().rev().map(|t| -t).collect();
    g.extend(pos);
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaOptimum {
    pub value: ExtReal,
    pub theta_star: f64,
    pub alpha_star: f64,
}

/// `inf_θ 𝓘_θ(e^{−a})` for `a > I(0)`: the exponent of `P(Î_m(0) ≥ a)`.
pub fn inf_meta_rate(model: &PopulationModel, a: f64) -> Result<ThetaOptimum> {
    model.validate()?;
    let i0 = model.rate_function(0.0).value;
    if !(ExtReal::Finite(a) > i0) {
        return Err(Error::Regime(format!(
            "a = {a} does not exceed I(0) = {i0}; use sup_meta_rate_on_theta_a below I(0)"
        )));
    }
    Ok(inf_meta_rate_unchecked(model, a))
}

fn inf_meta_rate_unchecked(model: &PopulationModel, a: f64) -> ThetaOptimum {
    let nu = (-a).exp();
    let (theta, v) = grid_then_golden(|t| meta_value(model, t, nu), &theta_grid(60), 1e-9);
    let r = meta_rate_on_law(&WLaw::new(model, theta), theta, nu);
    ThetaOptimum {
        value: ExtReal::from_f64(v),
        theta_star: theta,
        alpha_star: r.alpha_star,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaAOptimum {
    pub value: ExtReal,
    pub theta_star: f64,
    pub alpha_star: f64,
    /// `Θ_a = [lo, hi]`.
    pub theta_a: (f64, f64),
    /// `E[X e^{θX} e^{αe^{θX}}] / E[e^{αe^{θX}}]` at the maximiser: the
    /// stationarity condition in θ. `None` when the maximiser sits at an end
    /// of `Θ_a` or at α = 0, where it need not vanish.
    pub foc_residual: Option<f64>,
}

/// `E[X W e^{αW}] / E[e^{αW}]`, exact for atoms and by a central difference of
/// `∂_θ log E e^{αW} = α·E[X W e^{αW}]/E[e^{αW}]` otherwise.
fn theta_stationarity(model: &PopulationModel, theta: f64, alpha: f64) -> f64 {
    if let Some(atoms) = model.atoms() {
        let logs: Vec<f64> = atoms.iter().map(|(x, p)| p.ln() + alpha * (theta * x).exp()).collect();
        let l = logsumexp(&logs);
        return atoms
            .iter()
            .zip(&logs)
            .map(|((x, _), lw)| x * (theta * x).exp() * (lw - l).exp())
            .sum();
    }
    let h = 1e-5 * theta.abs().max(1e-2);
    let up = WLaw::new(model, theta + h).tilt(alpha).log_mgf;
    let dn = WLaw::new(model, theta - h).tilt(alpha).log_mgf;
    (up - dn) / (2.0 * h) / alpha
}

/// `sup_{θ ∈ Θ_a} 𝓘_θ(e^{−a})` for `0 < a < I(0)`: the exponent of
/// `P(Î_m(0) ≤ a)`.
pub fn sup_meta_rate_on_theta_a(model: &PopulationModel, a: f64) -> Result<ThetaAOptimum> {
    model.validate()?;
    let rate0 = model.rate_function(0.0);
    let i0 = rate0.value;
    if !(a > 0.0 && ExtReal::Finite(a) < i0) {
        return Err(Error::Regime(format!("need 0 < a < I(0) = {i0}, got a = {a}")));
    }
    let theta_min = rate0
        .theta_star
        .ok_or_else(|| Error::DegenerateRegime("Λ has no finite minimiser".into()))?;
    let excess = |t: f64| match model.log_mgf(t) {
        ExtReal::Finite(l) => l + a,
        ExtReal::PosInfinity => f64::INFINITY,
    };
    let (dlo, dhi) = model.mgf_domain();
    let find_edge = |edge: f64| -> Result<f64> {
        let sign = (edge - theta_min).signum();
        let mut inside = theta_min;
        for j in 0..200 {
            let t = if edge.is_finite() {
                theta_min + (edge - theta_min) * (1.0 - 0.5f64.powi(j + 1))
            } else {
                theta_min + sign * 2f64.powi(j) * theta_min.abs().max(1.0) * 0.01
            };
            if excess(t) >= 0.0 {
                let (lo, hi) = if sign > 0.0 { (inside, t) } else { (t, inside) };
                let tol = 1e-12 * lo.abs().max(hi.abs()).max(1e-3);
                return bisect(|s| excess(s).min(1e300), lo, hi, tol);
            }
            inside = t;
            if edge.is_finite() && j > 60 {
                break;
            }
        }
        if edge.is_finite() && excess(edge) <= 0.0 {
            return Ok(edge);
        }
        Err(Error::DegenerateRegime(format!("Λ stays below −a on the {} side", if sign > 0.0 { "right" } else { "left" })))
    };
    let lo = find_edge(dlo)?;
    let hi = find_edge(dhi)?;
    if hi - lo <= 1e-12 * hi.abs().max(1.0) {
        return Err(Error::DegenerateRegime(format!("Θ_a = [{lo}, {hi}] is numerically empty")));
    }
    let nu = (-a).exp();
    let neg = |t: f64| -meta_value(model, t, nu);
    let grid: Vec<f64> = (0..=40).map(|i| lo + (hi - lo) * i as f64 / 40.0).collect();
    let (theta, v) = grid_then_golden(neg, &grid, 1e-10 * (hi - lo).max(1e-3));
    let r = meta_rate_on_law(&WLaw::new(model, theta), theta, nu);
    let interior = (theta - lo).abs() > 1e-6 * (hi - lo) && (hi - theta).abs() > 1e-6 * (hi - lo);
    let foc_residual = if interior && r.alpha_star != 0.0 && r.alpha_star.is_finite() {
        Some(theta_stationarity(model, theta, r.alpha_star))
    } else {
        None
    };
    Ok(ThetaAOptimum {
        value: ExtReal::from_f64(-v),
        theta_star: theta,
        alpha_star: r.alpha_star,
        theta_a: (lo, hi),
        foc_residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoPhaseExponent {
    /// `inf_γ ( c2·I(0)/γ + inf_θ 𝓘_θ(e^{−γ}) )`: decay rate of P(FS) per
    /// phase-1 sample.
    pub exponent: f64,
    /// `c1·exponent`: P(FS) behaves like `δ^{delta_exponent}`.
    pub delta_exponent: f64,
    pub gamma_star: f64,
    pub theta_star: f64,
    /// Multiplier of `e^{θX}` in the stationarity system, with the sign
    /// convention `exp(−α e^{θX})` so that it is positive.
    pub alpha_star: f64,
    pub c1: f64,
    pub c2: f64,
    /// Residuals of the stationarity system at the returned point:
    /// tilted-mean equation, θ-stationarity, and `α e^{−γ} = c2·I(0)/γ²`.
    pub residuals: [f64; 3],
    /// Whether the Newton polish of the stationarity system was accepted.
    pub newton_polished: bool,
    /// A second Newton start converged to a stationary point whose exponent
    /// differs by more than 1e-4.
    pub multiple_root_suspected: bool,
}

/// Residuals of the two-phase stationarity system at `(γ, θ, α⁺)`, with
/// α⁺ = −α the positive multiplier.
fn two_phase_residuals(model: &PopulationModel, i0: f64, c2: f64, p: [f64; 3]) -> [f64; 3] {
    let [gamma, theta, alpha_pos] = p;
    let law = WLaw::new(model, theta);
    let t = law.tilt(-alpha_pos);
    let nu = (-gamma).exp();
    [
        (t.mean - nu) / nu,
        theta_stationarity(model, theta, -alpha_pos),
        alpha_pos * nu - c2 * i0 / (gamma * gamma),
    ]
}

fn two_phase_value(model: &PopulationModel, i0: f64, c2: f64, p: [f64; 3]) -> f64 {
    let [gamma, theta, alpha_pos] = p;
    let nu = (-gamma).exp();
    let t = WLaw::new(model, theta).tilt(-alpha_pos);
    c2 * i0 / gamma + (-alpha_pos * nu - t.log_mgf)
}

fn solve3(j: [[f64; 3]; 3], r: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(j);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let mut x = [0.0; 3];
    for (c, xc) in x.iter_mut().enumerate() {
        let mut m = j;
        for row in 0..3 {
            m[row][c] = r[row];
        }
        *xc = det(m) / d;
    }
    Some(x)
}

/// Damped Newton on the stationarity system with a forward-difference
/// Jacobian. Returns the final point and whether the residual norm fell
/// below `tol`.
fn newton3(model: &PopulationModel, i0: f64, c2: f64, start: [f64; 3], tol: f64, max_iter: usize) -> ([f64; 3], bool) {
    let norm = |r: [f64; 3]| r.iter().map(|x| x * x).sum::<f64>().sqrt();
    let valid = |p: [f64; 3]| p[0] > 0.0 && p[2] > 0.0 && p[1].abs() <= THETA_MAX;
    let mut p = start;
    let mut r = two_phase_residuals(model, i0, c2, p);
    for _ in 0..max_iter {
        let n0 = norm(r);
        if !n0.is_finite() {
            return (p, false);
        }
        if n0 <= tol {
            return (p, true);
        }
        let mut jac = [[0.0; 3]; 3];
        for c in 0..3 {
            let h = 1e-7 * p[c].abs().max(1e-4);
            let mut q = p;
            q[c] += h;
            let rq = two_phase_residuals(model, i0, c2, q);
            for row in 0..3 {
                jac[row][c] = (rq[row] - r[row]) / h;
            }
        }
        let step = match solve3(jac, r) {
            Some(s) => s,
            None => return (p, false),
        };
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let q = [p[0] - lambda * step[0], p[1] - lambda * step[1], p[2] - lambda * step[2]];
            if valid(q) {
                let rq = two_phase_residuals(model, i0, c2, q);
                if norm(rq) < n0 {
                    p = q;
                    r = rq;
                    improved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !improved {
            return (p, norm(r) <= tol);
        }
    }
    (p, norm(r) <= tol)
}

/// Failure exponent of the two-phase procedure.
///
/// The outer problem `inf_γ (c2·I(0)/γ + inf_θ 𝓘_θ(e^{−γ}))` is solved by a
/// log-grid scan over γ > I(0) followed by golden-section refinement; for
/// γ ≤ I(0) the inner infimum vanishes, so the minimum lies above I(0). The
/// optimum is then polished by Newton steps on the stationarity system in
/// `(γ, θ, α)`, and a second Newton run from `(2·I(0), argmin Λ, 1)` checks
/// for a competing stationary point.
pub fn two_phase_exponent(model: &PopulationModel, c1: f64, c2: f64) -> Result<TwoPhaseExponent> {
    model.validate()?;
    check_positive("c1", c1)?;
    check_positive("c2", c2)?;
    if model.mean() >= 0.0 {
        return Err(Error::Regime(format!("the mean must be negative, got {}", model.mean())));
    }
    let rate0 = model.rate_function(0.0);
    let i0 = match rate0.value {
        ExtReal::Finite(v) if v > 0.0 => v,
        v => return Err(Error::DegenerateRegime(format!("I(0) = {v} admits no finite exponent"))),
    };
    let outer = |g: f64| c2 * i0 / g + inf_meta_rate_unchecked(model, g).value.to_f64();
    let hi = (200.0 * i0).max(40.0);
    let grid = geomspace(i0 * (1.0 + 1e-9), hi, 48);
    let (gamma, value) = grid_then_golden(outer, &grid, 1e-10 * i0);
    if !value.is_finite() {
        return Err(Error::NumericalFailure {
            what: "two-phase outer search".into(),
            iterations: grid.len(),
            best: vec![gamma, value],
        });
    }
    let inner = inf_meta_rate_unchecked(model, gamma);
    let nested = [gamma, inner.theta_star, -inner.alpha_star];

    let (polished, converged) = newton3(model, i0, c2, nested, 1e-12, 50);
    let polished_value = two_phase_value(model, i0, c2, polished);
    let accept = converged && (polished_value - value).abs() <= 1e-6;
    let (point, exponent) = if accept { (polished, polished_value.min(value)) } else { (nested, value) };

    let start = [2.0 * i0, rate0.theta_star.unwrap_or(1.0), 1.0];
    let (other, other_ok) = newton3(model, i0, c2, start, 1e-10, 500);
    let multiple_root_suspected = other_ok && (two_phase_value(model, i0, c2, other) - exponent).abs() > 1e-4;

    Ok(TwoPhaseExponent {
        exponent,
        delta_exponent: c1 * exponent,
        gamma_star: point[0],
        theta_star: point[1],
        alpha_star: point[2],
        c1,
        c2,
        residuals: two_phase_residuals(model, i0, c2, point),
        newton_polished: accept,
        multiple_root_suspected,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SequentialCertificate {
    /// Magnitude t > 0 of the tilt θ = −t.
    pub theta: f64,
    /// Positive multiplier in the normalised variable `Z = e^{−θX}/ess inf e^{−θX}`
    /// (for `X = K − Y` with exponential Y, `Z = e^{tY}`), i.e. the
    /// integrand `e^{−α Z}`.
    pub alpha_star: f64,
    pub meta_rate_value: f64,
    /// `meta_rate_value < 1/c1`: the sequential procedure's failure
    /// probability is not O(δ).
    pub certified: bool,
}

/// Searches θ = −t < 0 for the smallest `𝓘_θ(e^{−1/c1})`. A value below
/// `1/c1` means the first-round stopping rule of the sequential procedure
/// fires on a false sign with probability decaying slower than δ.
pub fn sequential_failure_certificate(model: &PopulationModel, c1: f64) -> Result<SequentialCertificate> {
    model.validate()?;
    check_positive("c1", c1)?;
    if model.mean() >= 0.0 {
        return Err(Error::Regime(format!("the mean must be negative, got {}", model.mean())));
    }
    let i0 = model.rate_function(0.0).value;
    if !(i0 < ExtReal::Finite(1.0 / c1)) {
        return Err(Error::Regime(format!("need I(0) = {i0} < 1/c1 = {}", 1.0 / c1)));
    }
    let nu = (-1.0 / c1).exp();
    let grid = geomspace(THETA_MIN, THETA_MAX, 96);
    let (t, _) = grid_then_golden(|t| meta_value(model, -t, nu), &grid, 1e-9);
    // polish: the objective is flat near its minimum
    let (t, v) = golden_min(|s| meta_value(model, -s, nu), t * 0.98, t * 1.02, 1e-10 * t);
    let law = WLaw::new(model, -t);
    let r = meta_rate_on_law(&law, -t, nu);
    let w_lo = law.range().0;
    let norm = if w_lo > 0.0 { w_lo } else { 1.0 };
    Ok(SequentialCertificate {
        theta: t,
        alpha_star: -r.alpha_star * norm,
        meta_rate_value: v,
        certified: v < 1.0 / c1,
    })
}
