//! Procedures deciding the sign of EX using the empirical rate `Î_m(0)` as a
//! proxy for how hard the decision is.

use crate::empirical_rate::estimate_rate_at_zero;
use crate::error::{check_positive, Error, Result};
use crate::ext::ExtReal;
use crate::populations::Sampler;

use super::{ceil_count, check_delta, SelectionOutcome, Sign, Termination};

/// Phase-2 size used when the phase-1 rate estimate is exactly 0 and the
/// formula `c2·m/Î` is infinite.
pub const DEFAULT_PHASE2_CAP: u64 = 100_000_000;
pub const DEFAULT_ROUND_CAP: u64 = 50;

fn sign_of_mean(sum: f64) -> Sign {
    if sum > 0.0 {
        Sign::Positive
    } else {
        Sign::Negative
    }
}

/// Phase 1 draws `m = ⌈c1·log(1/δ)⌉` samples and estimates `Î_m(0)`; phase 2
/// draws `N = ⌈c2·m/Î_m(0)⌉` fresh samples and reports the sign of their
/// mean. `Î = +∞` gives `N = m`; `Î = 0` gives `N = phase2_cap` and a
/// round-cap termination.
pub fn two_phase_select<S: Sampler + ?Sized>(
    sampler: &mut S,
    delta: f64,
    c1: f64,
    c2: f64,
    phase2_cap: u64,
) -> Result<SelectionOutcome> {
    check_delta(delta)?;
    check_positive("c1", c1)?;
    check_positive("c2", c2)?;
    let m = ceil_count(c1 * (1.0 / delta).ln())?.max(1);
    let phase1: Vec<f64> = (0..m).map(|_| sampler.draw()).collect();
    let rate = estimate_rate_at_zero(&phase1).value;
    let (n, termination) = match rate {
        ExtReal::PosInfinity => (m, Termination::BudgetExhausted),
        ExtReal::Finite(r) if r > 0.0 => {
            let n = ceil_count(c2 * m as f64 / r).unwrap_or(u64::MAX);
            if n > phase2_cap {
                (phase2_cap, Termination::RoundCap)
            } else {
                (n, Termination::BudgetExhausted)
            }
        }
        ExtReal::Finite(_) => (phase2_cap, Termination::RoundCap),
    };
    let sum: f64 = (0..n).map(|_| sampler.draw()).sum();
    Ok(SelectionOutcome {
        chosen: 0,
        per_arm_samples: vec![m + n],
        rounds: 2,
        termination,
        decided_sign: Some(sign_of_mean(sum)),
        false_selection: None,
    })
}

pub(crate) fn check_sequential(delta: f64, c_schedule: &[f64], round_cap: u64) -> Result<()> {
    check_delta(delta)?;
    if c_schedule.is_empty() {
        return Err(Error::domain("c_schedule", "must be nonempty"));
    }
    for (i, &c) in c_schedule.iter().enumerate() {
        check_positive(&format!("c_schedule.{i}"), c)?;
    }
    if round_cap == 0 {
        return Err(Error::domain("round_cap", "must be at least 1"));
    }
    Ok(())
}

/// Round k tops the sample up to `m_k = ⌈(c_1 + … + c_k)·log(1/δ)⌉` and stops
/// once `m_k·Î_{m_k}(0) ≥ log(1/δ)`, deciding by the sign of the running
/// mean. The last entry of `c_schedule` repeats once the list runs out.
pub fn sequential_select<S: Sampler + ?Sized>(
    sampler: &mut S,
    delta: f64,
    c_schedule: &[f64],
    round_cap: u64,
) -> Result<SelectionOutcome> {
    check_sequential(delta, c_schedule, round_cap)?;
    let log_inv = (1.0 / delta).ln();
    let mut samples: Vec<f64> = Vec::new();
    let mut c_total = 0.0;
    for k in 1..=round_cap {
        c_total += c_schedule[((k - 1) as usize).min(c_schedule.len() - 1)];
        let m_k = ceil_count(c_total * log_inv)?.max(1) as usize;
        while samples.len() < m_k {
            samples.push(sampler.draw());
        }
        let rate = estimate_rate_at_zero(&samples).value;
        let stop = match rate {
            ExtReal::PosInfinity => true,
            ExtReal::Finite(r) => samples.len() as f64 * r >= log_inv,
        };
        if stop || k == round_cap {
            return Ok(SelectionOutcome {
                chosen: 0,
                per_arm_samples: vec![samples.len() as u64],
                rounds: k,
                termination: if stop { Termination::ConfidenceMet } else { Termination::RoundCap },
                decided_sign: Some(sign_of_mean(samples.iter().sum())),
                false_selection: None,
            });
        }
    }
    unreachable!("the loop returns by round_cap")
}
