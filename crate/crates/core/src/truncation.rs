//! Worst-case bias of truncating (`X·1{X < u}`) and capping (`min(X, u)`) a
//! non-negative random variable whose moment `E f(X)` is bounded by `c`.
//!
//! Both optimisation problems are solved by two-point laws with an atom at 0.
//! The operations are written against [`MomentFunction`], so any strictly
//! increasing convex `f` can be plugged in; [`FSpec`] provides the power and
//! exponential families.

use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};
use crate::numerics::bisect;

/// A strictly increasing, non-negative, convex moment function on `[0, ∞)`.
pub trait MomentFunction {
    fn f(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
    fn inverse(&self, c: f64) -> f64;

    fn f0(&self) -> f64 {
        self.f(0.0)
    }

    /// Root of `x − u = (f(x) − f(0)) / f'(x)`, the atom location of the
    /// worst capping law.
    fn x_u(&self, u: f64) -> f64 {
        let resid = |x: f64| x - u - (self.f(x) - self.f0()) / self.derivative(x);
        let mut hi = 2.0 * u;
        while resid(hi) < 0.0 && hi < 1e300 {
            hi *= 2.0;
        }
        bisect(resid, u, hi, 1e-13 * hi).unwrap_or(hi)
    }
}

/// The built-in moment functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FSpec {
    /// `f(x) = x^α`, α > 1.
    Power { alpha: f64 },
    /// `f(x) = e^{θx}`, θ > 0.
    Exponential { theta: f64 },
}

impl FSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            FSpec::Power { alpha } => {
                if !(alpha > 1.0 && alpha.is_finite()) {
                    return Err(Error::domain("alpha", format!("must exceed 1, got {alpha}")));
                }
            }
            FSpec::Exponential { theta } => check_positive("theta", theta)?,
        }
        Ok(())
    }
}

impl MomentFunction for FSpec {
    fn f(&self, x: f64) -> f64 {
        match *self {
            FSpec::Power { alpha } => x.powf(alpha),
            FSpec::Exponential { theta } => (theta * x).exp(),
        }
    }

    fn derivative(&self, x: f64) -> f64 {
        match *self {
            FSpec::Power { alpha } => alpha * x.powf(alpha - 1.0),
            FSpec::Exponential { theta } => theta * (theta * x).exp(),
        }
    }

    fn inverse(&self, c: f64) -> f64 {
        match *self {
            FSpec::Power { alpha } => c.powf(1.0 / alpha),
            FSpec::Exponential { theta } => c.ln() / theta,
        }
    }

    fn f0(&self) -> f64 {
        match self {
            FSpec::Power { .. } => 0.0,
            FSpec::Exponential { .. } => 1.0,
        }
    }

    fn x_u(&self, u: f64) -> f64 {
        match *self {
            FSpec::Power { alpha } => u * alpha / (alpha - 1.0),
            // x − u = (1 − e^{−θx})/θ; the residual is increasing and changes
            // sign on [u, u + 1/θ].
            FSpec::Exponential { theta } => {
                let resid = |x: f64| x - u - (-(theta * x)).exp_m1() / -theta;
                bisect(resid, u, u + 1.0 / theta, 1e-12 * (u + 1.0 / theta)).unwrap_or(u)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Support {
    Degenerate { point: f64 },
    TwoPoint { low: f64, high: f64, p_high: f64 },
}

impl Support {
    /// `E f(X)` under this law.
    pub fn moment<M: MomentFunction + ?Sized>(&self, f: &M) -> f64 {
        match *self {
            Support::Degenerate { point } => f.f(point),
            Support::TwoPoint { low, high, p_high } => (1.0 - p_high) * f.f(low) + p_high * f.f(high),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseSolution {
    pub error: f64,
    pub support: Support,
    pub u: f64,
    pub c: f64,
    /// The moment function, when it is one of the built-ins.
    pub f_spec: Option<FSpec>,
}

fn check_budget<M: MomentFunction + ?Sized>(f: &M, c: f64, u: f64) -> Result<()> {
    check_positive("u", u)?;
    let floor = f.f0();
    if !(c > floor) || !c.is_finite() {
        return Err(Error::InfeasibleBudget { c, floor });
    }
    Ok(())
}

/// `sup E[X·1{X ≥ u}]` over `X ≥ 0` with `E f(X) ≤ c`.
pub fn truncation_error_with<M: MomentFunction + ?Sized>(f: &M, c: f64, u: f64) -> Result<WorstCaseSolution> {
    check_budget(f, c, u)?;
    let top = f.inverse(c);
    let (error, support) = if u <= top {
        (top, Support::Degenerate { point: top })
    } else {
        let p = (c - f.f0()) / (f.f(u) - f.f0());
        (u * p, Support::TwoPoint { low: 0.0, high: u, p_high: p })
    };
    Ok(WorstCaseSolution { error, support, u, c, f_spec: None })
}

/// `sup E[(X − u)⁺]` over `X ≥ 0` with `E f(X) ≤ c`.
pub fn capping_error_with<M: MomentFunction + ?Sized>(f: &M, c: f64, u: f64) -> Result<WorstCaseSolution> {
    check_budget(f, c, u)?;
    let top = f.inverse(c);
    let x = f.x_u(u);
    let (error, support) = if x <= top {
        ((top - u).max(0.0), Support::Degenerate { point: top })
    } else {
        let p = (c - f.f0()) / (f.f(x) - f.f0());
        ((x - u) * p, Support::TwoPoint { low: 0.0, high: x, p_high: p })
    };
    Ok(WorstCaseSolution { error, support, u, c, f_spec: None })
}

pub fn worst_truncation_error(f_spec: FSpec, c: f64, u: f64) -> Result<WorstCaseSolution> {
    f_spec.validate()?;
    let mut s = truncation_error_with(&f_spec, c, u)?;
    s.f_spec = Some(f_spec);
    Ok(s)
}

pub fn worst_capping_error(f_spec: FSpec, c: f64, u: f64) -> Result<WorstCaseSolution> {
    f_spec.validate()?;
    let mut s = capping_error_with(&f_spec, c, u)?;
    s.f_spec = Some(f_spec);
    Ok(s)
}

pub fn solve_x_u(f_spec: FSpec, u: f64) -> Result<f64> {
    f_spec.validate()?;
    check_positive("u", u)?;
    Ok(f_spec.x_u(u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const P2: FSpec = FSpec::Power { alpha: 2.0 };

    #[test]
    fn x_u_examples() {
        assert_eq!(solve_x_u(P2, 1.0).unwrap(), 2.0);
        assert_eq!(solve_x_u(FSpec::Power { alpha: 3.0 }, 2.0).unwrap(), 3.0);
        let x = solve_x_u(FSpec::Exponential { theta: 1.0 }, 1.0).unwrap();
        assert!((x - 1.0 - (1.0 - (-x).exp())).abs() < 1e-10);
        assert_abs_diff_eq!(x, 1.8414, epsilon = 1e-4);
    }

    #[test]
    fn generic_x_u_agrees_with_specialised() {
        struct Generic(FSpec);
        impl MomentFunction for Generic {
            fn f(&self, x: f64) -> f64 {
                self.0.f(x)
            }
            fn derivative(&self, x: f64) -> f64 {
                self.0.derivative(x)
            }
            fn inverse(&self, c: f64) -> f64 {
                self.0.inverse(c)
            }
        }
        for spec in [P2, FSpec::Power { alpha: 1.5 }, FSpec::Exponential { theta: 0.7 }] {
            for &u in &[0.1, 1.0, 7.0] {
                let a = Generic(spec).x_u(u);
                let b = spec.x_u(u);
                assert!((a - b).abs() <= 1e-9 * b, "{spec:?} u={u}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn degenerate_branches() {
        let t = worst_truncation_error(P2, 1.0, 0.5).unwrap();
        assert_eq!(t.error, 1.0);
        assert_eq!(t.support, Support::Degenerate { point: 1.0 });
        let c = worst_capping_error(P2, 1.0, 0.4).unwrap();
        assert_abs_diff_eq!(c.error, 0.6, epsilon = 1e-15);
    }

    #[test]
    fn budget_and_domain_errors() {
        assert!(matches!(worst_truncation_error(P2, 0.0, 1.0), Err(Error::InfeasibleBudget { .. })));
        assert!(matches!(
            worst_capping_error(FSpec::Exponential { theta: 1.0 }, 1.0, 1.0),
            Err(Error::InfeasibleBudget { .. })
        ));
        assert!(worst_truncation_error(FSpec::Power { alpha: 1.0 }, 2.0, 1.0).is_err());
        assert!(worst_truncation_error(P2, 2.0, 0.0).is_err());
    }

    #[test]
    fn two_point_solutions_are_tight() {
        for spec in [P2, FSpec::Power { alpha: 3.0 }, FSpec::Exponential { theta: 1.0 }] {
            for &c in &[1.5, 4.0] {
                for &u in &[0.5, 2.0, 5.0] {
                    for s in [worst_truncation_error(spec, c, u).unwrap(), worst_capping_error(spec, c, u).unwrap()] {
                        if let Support::TwoPoint { low, .. } = s.support {
                            assert_eq!(low, 0.0);
                            assert!((s.support.moment(&spec) - c).abs() <= 1e-9 * c);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn capping_never_worse_and_monotone_in_u() {
        for spec in [P2, FSpec::Power { alpha: 1.5 }, FSpec::Exponential { theta: 2.0 }] {
            for &c in &[1.2, 3.0, 10.0] {
                let mut prev = (f64::INFINITY, f64::INFINITY);
                for i in 1..60 {
                    let u = 0.1 * i as f64;
                    let t = worst_truncation_error(spec, c, u).unwrap().error;
                    let k = worst_capping_error(spec, c, u).unwrap().error;
                    assert!(k <= t + 1e-15);
                    assert!(t <= prev.0 + 1e-15 && k <= prev.1 + 1e-15, "{spec:?} c={c} u={u}");
                    prev = (t, k);
                }
            }
        }
    }

    #[test]
    fn serde_round_trip() {
        let s = worst_capping_error(FSpec::Exponential { theta: 1.0 }, 3.0, 2.0).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert!(j.contains("\"kind\":\"two-point\""));
        let back: WorstCaseSolution = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
    }
}
