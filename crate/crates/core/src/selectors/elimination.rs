//! Successive elimination for the arm with the largest mean, with
//! confidence radii for bounded and heavy-tailed rewards.

use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};
use crate::populations::Sampler;

use super::{check_delta, SelectionOutcome, Termination};

/// `(Σ 1/m²)^{-1}`, spreading δ over rounds.
pub const C_NORM: f64 = 6.0 / (std::f64::consts::PI * std::f64::consts::PI);

/// Deviation constant for truncated means under `E|X|^α ≤ K`.
pub fn p_truncated(alpha: f64) -> f64 {
    (1.0 + alpha) + std::f64::consts::SQRT_2 + 1.0 / 3.0
}

/// Deviation constant for capped means under `E|X|^α ≤ K`.
pub fn p_capped(alpha: f64) -> f64 {
    (alpha - 1.0).powf(alpha - 1.0) / alpha.powf(alpha) * (1.0 + alpha) + std::f64::consts::SQRT_2 + 1.0 / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RadiusKind {
    /// Rewards within `b` of their mean.
    Bounded { b: f64 },
    /// `E|X|^α ≤ K`, capped-mean constant `p̂(α)`.
    Heavy { alpha: f64, k: f64 },
    /// `E|X|^α ≤ K`, truncated-mean constant `p(α)`.
    HeavyTruncated { alpha: f64, k: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusSchedule {
    pub kind: RadiusKind,
    pub d: usize,
    pub delta: f64,
    pub c_norm: f64,
}

impl RadiusSchedule {
    pub fn new(kind: RadiusKind, d: usize, delta: f64) -> Result<Self> {
        let s = RadiusSchedule { kind, d, delta, c_norm: C_NORM };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        check_delta(self.delta)?;
        if self.d < 2 {
            return Err(Error::domain("d", format!("need at least 2 arms, got {}", self.d)));
        }
        check_positive("c_norm", self.c_norm)?;
        match self.kind {
            RadiusKind::Bounded { b } => check_positive("b", b),
            RadiusKind::Heavy { alpha, k } | RadiusKind::HeavyTruncated { alpha, k } => {
                if !(alpha > 1.0 && alpha <= 2.0) {
                    return Err(Error::domain("alpha", format!("must lie in (1, 2], got {alpha}")));
                }
                check_positive("k", k)
            }
        }
    }

    fn heavy_constant(&self) -> Option<(f64, f64, f64)> {
        match self.kind {
            RadiusKind::Bounded { .. } => None,
            RadiusKind::Heavy { alpha, k } => Some((alpha, k, p_capped(alpha))),
            RadiusKind::HeavyTruncated { alpha, k } => Some((alpha, k, p_truncated(alpha))),
        }
    }

    /// Confidence radius `α_m`, valid for all rounds simultaneously with
    /// probability at least `1 − δ/d` per arm.
    pub fn radius(&self, m: u64) -> f64 {
        let m = m.max(1) as f64;
        let d = self.d as f64;
        match self.kind {
            RadiusKind::Bounded { b } => b * (2.0 / m * (d * m * m / (self.c_norm * self.delta)).ln()).sqrt(),
            _ => {
                let (alpha, k, p) = self.heavy_constant().unwrap();
                let log_term = (2.0 * m * m * d / (self.c_norm * self.delta)).ln();
                p * k.powf(1.0 / alpha) * (log_term / m).powf((alpha - 1.0) / alpha)
            }
        }
    }
}

/// Running-mean estimator for successive elimination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Plain,
    /// `X_j·1{|X_j| ≤ B_j}`.
    Truncated,
    /// `sign(X_j)·min(|X_j|, B_j)`.
    Capped,
    /// `min(|X_j|, B_j)`: the literal capped mean, which discards the sign.
    CappedAbs,
}

/// Per-sample thresholds `B_j = (K·j/log(1/δ))^{1/α}`, with δ the run's target.
struct Thresholds {
    alpha: f64,
    scale: f64,
}

impl Thresholds {
    fn new(schedule: &RadiusSchedule) -> Option<Self> {
        let (alpha, k, _) = schedule.heavy_constant()?;
        Some(Thresholds {
            alpha,
            scale: k / (1.0 / schedule.delta).ln(),
        })
    }

    fn at(&self, j: u64) -> f64 {
        (self.scale * j as f64).powf(1.0 / self.alpha)
    }
}

fn transform(estimator: Estimator, thresholds: Option<&Thresholds>, x: f64, j: u64) -> f64 {
    let b = || thresholds.map_or(f64::INFINITY, |t| t.at(j));
    match estimator {
        Estimator::Plain => x,
        Estimator::Truncated => {
            if x.abs() <= b() {
                x
            } else {
                0.0
            }
        }
        Estimator::Capped => x.signum() * x.abs().min(b()),
        Estimator::CappedAbs => x.abs().min(b()),
    }
}

/// One round of an instrumented run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundTrace {
    pub m: u64,
    pub radius: f64,
    /// Running means of the arms alive at the start of the round.
    pub means: Vec<Option<f64>>,
    pub eliminated: Vec<usize>,
}

fn run<S: Sampler>(
    samplers: &mut [S],
    schedule: &RadiusSchedule,
    estimator: Estimator,
    pull_cap: u64,
    mut trace: Option<&mut Vec<RoundTrace>>,
) -> Result<SelectionOutcome> {
    schedule.validate()?;
    let d = samplers.len();
    if d != schedule.d {
        return Err(Error::domain("d", format!("schedule expects {} arms, got {d}", schedule.d)));
    }
    if pull_cap == 0 {
        return Err(Error::domain("pull_cap", "must be at least 1"));
    }
    if estimator != Estimator::Plain && schedule.heavy_constant().is_none() {
        return Err(Error::domain("estimator", "truncated and capped means need a heavy-tail schedule"));
    }
    let thresholds = Thresholds::new(schedule);
    let mut alive: Vec<bool> = vec![true; d];
    let mut sums = vec![0.0; d];
    let mut pulls = vec![0u64; d];
    let mut m = 0u64;
    loop {
        m += 1;
        for i in 0..d {
            if alive[i] {
                let x = samplers[i].draw();
                sums[i] += transform(estimator, thresholds.as_ref(), x, m);
                pulls[i] += 1;
            }
        }
        let mean = |i: usize| sums[i] / m as f64;
        let leader = (0..d)
            .filter(|&i| alive[i])
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if mean(b) >= mean(i) => Some(b),
                _ => Some(i),
            })
            .unwrap();
        let r = schedule.radius(m);
        let top = mean(leader);
        let eliminated: Vec<usize> = (0..d).filter(|&i| alive[i] && top - mean(i) >= 2.0 * r).collect();
        if let Some(t) = trace.as_deref_mut() {
            t.push(RoundTrace {
                m,
                radius: r,
                means: (0..d).map(|i| alive[i].then(|| mean(i))).collect(),
                eliminated: eliminated.clone(),
            });
        }
        for &i in &eliminated {
            alive[i] = false;
        }
        let survivors = alive.iter().filter(|&&a| a).count();
        if survivors == 1 || m >= pull_cap {
            return Ok(SelectionOutcome {
                chosen: leader,
                per_arm_samples: pulls,
                rounds: m,
                termination: if survivors == 1 { Termination::ConfidenceMet } else { Termination::RoundCap },
                decided_sign: None,
                false_selection: None,
            });
        }
    }
}

/// Pulls every surviving arm once per round and drops arm i once the
/// leader's running mean exceeds its own by `2·α_m`. Ends when one arm
/// remains, or after `pull_cap` rounds with the current leader chosen
/// (lowest index among tied leaders).
pub fn successive_elimination<S: Sampler>(
    samplers: &mut [S],
    schedule: &RadiusSchedule,
    estimator: Estimator,
    pull_cap: u64,
) -> Result<SelectionOutcome> {
    run(samplers, schedule, estimator, pull_cap, None)
}

/// [`successive_elimination`] with a per-round record.
pub fn successive_elimination_traced<S: Sampler>(
    samplers: &mut [S],
    schedule: &RadiusSchedule,
    estimator: Estimator,
    pull_cap: u64,
) -> Result<(SelectionOutcome, Vec<RoundTrace>)> {
    let mut trace = Vec::new();
    let o = run(samplers, schedule, estimator, pull_cap, Some(&mut trace))?;
    Ok((o, trace))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogFixedPoint {
    pub t_star: f64,
    /// `a + b·log a + (2b²/a)·log(a + b)`.
    pub bound: f64,
    pub iterations: usize,
}

/// Root of `t = a + b·log t` by fixed-point iteration from `t = a`, with
/// the closed-form upper bound. Requires `a ≥ e`, `b ≥ 1`.
pub fn solve_log_fixed_point(a: f64, b: f64) -> Result<LogFixedPoint> {
    if !(a >= std::f64::consts::E && a.is_finite()) {
        return Err(Error::domain("a", format!("must be at least e, got {a}")));
    }
    if !(b >= 1.0 && b.is_finite()) {
        return Err(Error::domain("b", format!("must be at least 1, got {b}")));
    }
    let mut t = a;
    let mut iterations = 0;
    for it in 1..=100_000 {
        let next = a + b * t.ln();
        iterations = it;
        let done = (next - t).abs() <= 1e-15 * next;
        t = next;
        if done {
            break;
        }
    }
    Ok(LogFixedPoint {
        t_star: t,
        bound: a + b * a.ln() + 2.0 * b * b / a * (a + b).ln(),
        iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmPullsBound {
    pub gap: f64,
    /// `min{m : 4·α_m ≤ Δ}`.
    pub tau_star: u64,
    /// Closed-form upper bound on `tau_star`; `None` when the fixed-point
    /// lemma's preconditions fail for this gap.
    pub closed_form: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PullsBound {
    pub arms: Vec<ArmPullsBound>,
    /// Expected pulls of all suboptimal arms are at most `Σ τ*_i + 2δ`.
    pub suboptimal_total: f64,
    /// Leading small-δ term of the bound on the total expected samples.
    pub dominant_total: f64,
}

fn tau_star(schedule: &RadiusSchedule, gap: f64) -> u64 {
    let ok = |m: u64| 4.0 * schedule.radius(m) <= gap;
    if ok(1) {
        return 1;
    }
    // α_m decreases for m ≥ 2: gallop then bisect on the first success
    let mut lo = 1u64;
    let mut hi = 2u64;
    while !ok(hi) {
        lo = hi;
        hi = hi.saturating_mul(2);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Per-arm `τ*_i` by integer search, their closed-form bounds, and the
/// dominant term of the expected total sample count.
pub fn expected_pulls_bound(gaps: &[f64], schedule: &RadiusSchedule) -> Result<PullsBound> {
    schedule.validate()?;
    for (i, &g) in gaps.iter().enumerate() {
        check_positive("gaps", g).map_err(|e| e.within(&i.to_string()))?;
    }
    let d = schedule.d as f64;
    let c = schedule.c_norm;
    let delta = schedule.delta;
    let mut arms = Vec::with_capacity(gaps.len());
    let mut dominant = 0.0;
    for &gap in gaps {
        // m* solves m = a + b'·log m; τ* ≤ m* + 1
        let (a, b) = match schedule.kind {
            RadiusKind::Bounded { b } => {
                let s = 32.0 * b * b / (gap * gap);
                dominant += 64.0 * b * b * (d / (c * delta)).ln() / (gap * gap);
                (s * (d / (c * delta)).ln(), 2.0 * s)
            }
            _ => {
                let (alpha, k, p) = schedule.heavy_constant().unwrap();
                let e = alpha / (alpha - 1.0);
                let s = (4.0 * p * k.powf(1.0 / alpha) / gap).powf(e);
                dominant += 2.0 * (4.0 * p * k.powf(1.0 / alpha)).powf(e) * (2.0 * d / (c * delta)).ln() * gap.powf(-e);
                (s * (2.0 * d / (c * delta)).ln(), 2.0 * s)
            }
        };
        let closed_form = solve_log_fixed_point(a, b).ok().map(|s| s.bound + 1.0);
        arms.push(ArmPullsBound {
            gap,
            tau_star: tau_star(schedule, gap),
            closed_form,
        });
    }
    let suboptimal_total = arms.iter().map(|a| a.tau_star as f64).sum::<f64>() + 2.0 * delta;
    Ok(PullsBound {
        arms,
        suboptimal_total,
        dominant_total: dominant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::populations::{ModelSampler, PopulationModel, ReplaySampler};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn bounded(d: usize, delta: f64) -> RadiusSchedule {
        RadiusSchedule::new(RadiusKind::Bounded { b: 1.0 }, d, delta).unwrap()
    }

    #[test]
    fn constants() {
        assert_abs_diff_eq!(C_NORM, 0.607_927_101_854_026_6, epsilon = 1e-12);
        assert_abs_diff_eq!(p_capped(2.0), 2.49754, epsilon = 1e-5);
        assert_abs_diff_eq!(p_truncated(2.0), 4.74754, epsilon = 1e-5);
    }

    #[test]
    fn bounded_radius_two_arrangements() {
        let s = bounded(2, 0.1);
        let direct = (0.02f64 * (2.0 * 1e4 / (C_NORM * 0.1)).ln()).sqrt();
        let split = (0.02f64 * (2.0f64.ln() + 2.0 * 100f64.ln() - C_NORM.ln() - 0.1f64.ln())).sqrt();
        assert!((s.radius(100) - direct).abs() <= 1e-14);
        assert!((direct - split).abs() <= 1e-14);
    }

    #[test]
    fn bounded_radius_shape() {
        let s = bounded(4, 0.05);
        let ratios: Vec<f64> = [10u64, 100, 1_000, 10_000, 100_000, 1_000_000]
            .iter()
            .map(|&m| s.radius(m) * (m as f64).sqrt() / (m as f64).ln().sqrt())
            .collect();
        for r in &ratios {
            assert!(*r > 1.0 && *r < 5.0, "{ratios:?}");
        }
    }

    #[test]
    fn degenerate_arms_eliminate_when_radius_halves_gap() {
        let s = bounded(2, 0.1);
        let mut arms = vec![Box::new(|| 1.0) as Box<dyn FnMut() -> f64>, Box::new(|| 0.0)];
        let o = successive_elimination(&mut arms, &s, Estimator::Plain, 1_000_000).unwrap();
        let expect = (1..).find(|&m| 2.0 * s.radius(m) <= 1.0).unwrap();
        assert_eq!(o.chosen, 0);
        assert_eq!(o.rounds, expect);
        assert_eq!(o.per_arm_samples, vec![expect, expect]);
        assert_eq!(o.termination, Termination::ConfidenceMet);
    }

    #[test]
    fn identical_arms_hit_the_cap() {
        let s = bounded(2, 0.1);
        let mut arms = vec![Box::new(|| 0.5) as Box<dyn FnMut() -> f64>, Box::new(|| 0.5)];
        let o = successive_elimination(&mut arms, &s, Estimator::Plain, 50).unwrap();
        assert_eq!(o.termination, Termination::RoundCap);
        assert_eq!(o.chosen, 0);
        let judged = o.judge(&[0.5, 0.5], super::super::Objective::Maximize);
        assert_eq!(judged.false_selection, None);
    }

    #[test]
    fn estimator_transforms() {
        let t = Thresholds { alpha: 2.0, scale: 1.0 };
        // B_4 = 2
        assert_eq!(transform(Estimator::Truncated, Some(&t), -3.0, 4), 0.0);
        assert_eq!(transform(Estimator::Truncated, Some(&t), -1.5, 4), -1.5);
        assert_eq!(transform(Estimator::Capped, Some(&t), -3.0, 4), -2.0);
        assert_eq!(transform(Estimator::CappedAbs, Some(&t), -3.0, 4), 2.0);
        // the sign-preserving cap sits between truncation and the raw value
        for &x in &[-5.0, -1.0, 0.5, 3.0] {
            let (tr, cp) = (transform(Estimator::Truncated, Some(&t), x, 4), transform(Estimator::Capped, Some(&t), x, 4));
            assert!((tr.min(x)..=tr.max(x)).contains(&cp));
        }
        let s = bounded(2, 0.1);
        let mut arms = vec![|| 0.0, || 0.0];
        assert!(successive_elimination(&mut arms, &s, Estimator::Capped, 10).is_err());
    }

    #[test]
    fn leader_never_eliminated_and_good_event_keeps_best() {
        let models = [
            PopulationModel::Bernoulli { q: 0.7 },
            PopulationModel::Bernoulli { q: 0.5 },
            PopulationModel::Bernoulli { q: 0.45 },
        ];
        let s = bounded(3, 0.1);
        for rep in 0..20 {
            let mut arms: Vec<ModelSampler> =
                models.iter().enumerate().map(|(i, m)| ModelSampler::new(m.clone(), rep, i as u64).unwrap()).collect();
            let (o, trace) = successive_elimination_traced(&mut arms, &s, Estimator::Plain, 100_000).unwrap();
            let mut good = true;
            for r in &trace {
                let top = r.means.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
                for &i in &r.eliminated {
                    assert!(r.means[i].unwrap() < top);
                }
                for (i, m) in r.means.iter().enumerate() {
                    if let Some(m) = m {
                        good &= (m - models[i].mean()).abs() < r.radius;
                    }
                }
            }
            if good {
                assert_eq!(o.chosen, 0);
            }
        }
    }

    #[test]
    fn relabelling_arms_relabels_the_choice() {
        let s = bounded(3, 0.2);
        let streams: Vec<Vec<f64>> = (0..3)
            .map(|i| PopulationModel::Bernoulli { q: 0.3 + 0.2 * i as f64 }.sample(5, i, 20_000).unwrap().values)
            .collect();
        let perm = [2usize, 0, 1];
        let mut a: Vec<ReplaySampler> = streams.iter().cloned().map(ReplaySampler::new).collect();
        let mut b: Vec<ReplaySampler> = perm.iter().map(|&p| ReplaySampler::new(streams[p].clone())).collect();
        let oa = successive_elimination(&mut a, &s, Estimator::Plain, 20_000).unwrap();
        let ob = successive_elimination(&mut b, &s, Estimator::Plain, 20_000).unwrap();
        assert_eq!(perm[ob.chosen], oa.chosen);
        assert_eq!(oa.rounds, ob.rounds);
    }

    #[test]
    fn fixed_point_examples() {
        let r = solve_log_fixed_point(10.0, 2.0).unwrap();
        assert_abs_diff_eq!(r.t_star, 10.0 + 2.0 * r.t_star.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.t_star, 15.48, epsilon = 0.01);
        assert_abs_diff_eq!(r.bound, 16.59, epsilon = 0.01);
        let r = solve_log_fixed_point(std::f64::consts::E, 1.0).unwrap();
        assert!((r.t_star - std::f64::consts::E - r.t_star.ln()).abs() < 1e-12);
        assert!(r.t_star <= r.bound);
        assert!(solve_log_fixed_point(2.0, 1.0).is_err());
        assert!(solve_log_fixed_point(3.0, 0.5).is_err());
        // b = 1, a large: t* − a − log a → 0
        let gaps: Vec<f64> = [1e2, 1e4, 1e6]
            .iter()
            .map(|&a| {
                let r = solve_log_fixed_point(a, 1.0).unwrap();
                r.t_star - a - a.ln()
            })
            .collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2] && gaps[2] < 2e-5);
    }

    #[test]
    fn tau_star_examples() {
        let s = bounded(2, 0.01);
        let b = expected_pulls_bound(&[0.5], &s).unwrap();
        let tau = b.arms[0].tau_star;
        assert!(4.0 * s.radius(tau) <= 0.5 && 4.0 * s.radius(tau - 1) > 0.5);
        assert!(tau as f64 <= b.arms[0].closed_form.unwrap());
        let huge = expected_pulls_bound(&[1e6], &s).unwrap();
        assert_eq!(huge.arms[0].tau_star, 1);
        let heavy = RadiusSchedule::new(RadiusKind::Heavy { alpha: 1.5, k: 2.0 }, 3, 0.05).unwrap();
        let h = expected_pulls_bound(&[0.5, 1.0], &heavy).unwrap();
        for arm in &h.arms {
            assert!(arm.tau_star as f64 <= arm.closed_form.unwrap());
        }
        assert!(h.arms[0].tau_star >= h.arms[1].tau_star);
    }

    proptest! {
        #[test]
        fn fixed_point_within_bounds(a in std::f64::consts::E..1e3, b in 1.0f64..50.0) {
            let r = solve_log_fixed_point(a, b).unwrap();
            prop_assert!((r.t_star - a - b * r.t_star.ln()).abs() <= 1e-9 * r.t_star);
            prop_assert!(r.t_star <= r.bound * (1.0 + 1e-12));
            prop_assert!(r.t_star <= (a + b) * (a + b));
        }

        #[test]
        fn radius_positive(m in 1u64..10_000_000, delta in 1e-6f64..0.9, d in 2usize..20) {
            let s = bounded(d, delta);
            prop_assert!(s.radius(m) > 0.0);
            let h = RadiusSchedule::new(RadiusKind::Heavy { alpha: 1.5, k: 1.0 }, d, delta).unwrap();
            prop_assert!(h.radius(m) > 0.0);
        }
    }
}
