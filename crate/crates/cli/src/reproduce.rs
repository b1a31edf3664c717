//! Recomputes the published constants and compares each against its
//! reference value.

use ordinal_core::meta_rate::{sequential_failure_certificate, two_phase_exponent};
use ordinal_core::numerics::{geomspace, golden_min};
use ordinal_core::populations::PopulationModel;
use ordinal_core::selectors::{
    capped_sample_size, capping_radius, hoeffding_sample_size, solve_log_fixed_point, MomentBound,
};
use ordinal_core::truncation::{worst_capping_error, worst_truncation_error, FSpec};

use crate::error::CliError;
use crate::output::{Cell, Table};

pub const GROUPS: [&str; 6] = ["two-phase", "certificates", "truncation", "beta", "sample-sizes", "fixed-point"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Check {
    /// `|computed − expected| ≤ tol`
    Abs(f64),
    /// `|computed − expected| ≤ tol·|expected|`
    Rel(f64),
    /// `computed ≤ expected`
    AtMost,
}

#[derive(Debug, Clone)]
pub struct Item {
    pub group: &'static str,
    pub name: String,
    pub computed: f64,
    pub expected: f64,
    pub check: Check,
}

impl Item {
    fn new(group: &'static str, name: impl Into<String>, computed: f64, expected: f64, check: Check) -> Self {
        Item { group, name: name.into(), computed, expected, check }
    }

    pub fn pass(&self) -> bool {
        match self.check {
            Check::Abs(t) => (self.computed - self.expected).abs() <= t,
            Check::Rel(t) => (self.computed - self.expected).abs() <= t * self.expected.abs(),
            Check::AtMost => self.computed <= self.expected,
        }
    }

    fn tolerance(&self) -> String {
        match self.check {
            Check::Abs(t) => format!("±{t}"),
            Check::Rel(t) => format!("±{}%", t * 100.0),
            Check::AtMost => "≤".into(),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {} {}: computed {:.6} expected {} ({})",
            if self.pass() { "PASS" } else { "FAIL" },
            self.group,
            self.name,
            self.computed,
            self.expected,
            self.tolerance()
        )
    }
}

fn two_phase() -> Result<Vec<Item>, CliError> {
    let mut items = vec![];
    for &(p, want) in &[(0.55, 0.105), (0.52, 0.047), (0.51, 0.025)] {
        let e = two_phase_exponent(&PopulationModel::TwoPoint { b: 1.0, p_minus: p }, 1.0, 1.0)?;
        items.push(Item::new("two-phase", format!("p_minus={p} exponent"), e.exponent, want, Check::Abs(0.002)));
    }
    Ok(items)
}

fn certificates() -> Result<Vec<Item>, CliError> {
    let model = PopulationModel::ShiftedExponential { k: 0.96, lambda: 1.0 };
    let mut items = vec![];
    for &(c1, theta, alpha, rate) in &[(2.0, 2.133, 0.0607, 0.2231), (5.0, 0.987, 0.201, 0.1259), (100.0, 0.129, 1.1792, 0.005425)] {
        let c = sequential_failure_certificate(&model, c1)?;
        let g = "certificates";
        items.push(Item::new(g, format!("c1={c1} theta"), c.theta, theta, Check::Rel(0.01)));
        items.push(Item::new(g, format!("c1={c1} alpha*"), c.alpha_star, alpha, Check::Rel(0.01)));
        items.push(Item::new(g, format!("c1={c1} meta-rate"), c.meta_rate_value, rate, Check::Rel(0.005)));
        // the meta-rate must stay below 1/c1 for the certificate to apply
        items.push(Item::new(g, format!("c1={c1} meta-rate below 1/c1"), c.meta_rate_value, 1.0 / c1, Check::AtMost));
    }
    Ok(items)
}

fn truncation() -> Result<Vec<Item>, CliError> {
    let g = "truncation";
    let p2 = FSpec::Power { alpha: 2.0 };
    let exp = FSpec::Exponential { theta: 1.0 };
    let tol = Check::Abs(1e-10);
    let mut items = vec![
        Item::new(g, "power a=2 c=1 u=3 truncation", worst_truncation_error(p2, 1.0, 3.0)?.error, 1.0 / 3.0, tol),
        Item::new(g, "power a=2 c=1 u=3 capping", worst_capping_error(p2, 1.0, 3.0)?.error, 1.0 / 12.0, tol),
        Item::new(g, "power a=2 c=1 u=0.5 truncation", worst_truncation_error(p2, 1.0, 0.5)?.error, 1.0, tol),
        Item::new(g, "power a=2 c=1 u=0.25 capping", worst_capping_error(p2, 1.0, 0.25)?.error, 0.75, tol),
        Item::new(
            g,
            "exponential t=1 c=2 u=3 truncation",
            worst_truncation_error(exp, 2.0, 3.0)?.error,
            3.0 / (3f64.exp() - 1.0),
            tol,
        ),
    ];
    for &alpha in &[1.5, 2.0, 3.0] {
        let spec = FSpec::Power { alpha };
        let ratio = worst_capping_error(spec, 1.0, 10.0)?.error / worst_truncation_error(spec, 1.0, 10.0)?.error;
        let want = (alpha - 1.0f64).powf(alpha - 1.0) / alpha.powf(alpha);
        items.push(Item::new(g, format!("capping/truncation ratio a={alpha}"), ratio, want, tol));
    }
    Ok(items)
}

fn beta() -> Result<Vec<Item>, CliError> {
    let mut items = vec![];
    for &alpha in &[1.5, 2.0, 3.0] {
        let bounds = MomentBound { f_spec: FSpec::Power { alpha }, c: vec![1.0] };
        let cost = |b: f64| {
            let u = capping_radius(&bounds, b * 0.5).unwrap_or(f64::INFINITY);
            u * u / ((1.0 - b) * (1.0 - b))
        };
        let (best, _) = golden_min(cost, 1e-3, 1.0 - 1e-3, 1e-10);
        items.push(Item::new("beta", format!("optimal beta a={alpha}"), best, 1.0 / alpha, Check::Abs(1e-6)));
    }
    Ok(items)
}

fn sample_sizes() -> Result<Vec<Item>, CliError> {
    let bounds = MomentBound { f_spec: FSpec::Power { alpha: 2.0 }, c: vec![1.0, 1.0] };
    let (capped, _) = capped_sample_size(0.5, 0.1, &bounds, 0.5, 2)?;
    Ok(vec![
        Item::new("sample-sizes", "hoeffding b=1 eps=0.1 d=2 delta=0.05", hoeffding_sample_size(0.1, 0.05, 1.0, 2)? as f64, 600.0, Check::Abs(0.0)),
        Item::new("sample-sizes", "capped a=2 c=1 eps=0.5 d=2 delta=0.1", capped as f64, 74.0, Check::Abs(0.0)),
    ])
}

fn fixed_point() -> Result<Vec<Item>, CliError> {
    let mut worst = f64::NEG_INFINITY;
    for a in geomspace(std::f64::consts::E, 1e3, 10) {
        for b in geomspace(1.0, 50.0, 10) {
            let r = solve_log_fixed_point(a, b)?;
            worst = worst.max(r.t_star - r.bound);
        }
    }
    Ok(vec![Item::new("fixed-point", "max(t* − bound) over 10×10 grid", worst, 0.0, Check::AtMost)])
}

pub fn run(only: Option<&str>) -> Result<Vec<Item>, CliError> {
    if let Some(g) = only {
        if !GROUPS.contains(&g) {
            return Err(CliError::validation(Some("only".into()), format!("unknown group `{g}`, expected one of {GROUPS:?}")));
        }
    }
    let mut items = vec![];
    for group in GROUPS.iter().filter(|g| only.is_none_or(|o| o == **g)) {
        items.extend(match *group {
            "two-phase" => two_phase()?,
            "certificates" => certificates()?,
            "truncation" => truncation()?,
            "beta" => beta()?,
            "sample-sizes" => sample_sizes()?,
            _ => fixed_point()?,
        });
    }
    Ok(items)
}

pub fn table(items: &[Item]) -> Table {
    let mut t = Table::new(&["group", "item", "computed", "expected", "tolerance", "pass"]);
    for i in items {
        t.push(vec![
            i.group.into(),
            i.name.clone().into(),
            i.computed.into(),
            i.expected.into(),
            Cell::Text(i.tolerance()),
            i.pass().into(),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn only_filters_groups() {
        let items = run(Some("two-phase")).unwrap();
        assert_eq!(items.len(), 3);
        assert!(items.iter().all(|i| i.pass()));
        assert!(run(Some("nope")).is_err());
    }

    #[test]
    fn closed_form_groups_pass() {
        for g in ["truncation", "beta", "sample-sizes", "fixed-point"] {
            for i in run(Some(g)).unwrap() {
                assert!(i.pass(), "{}", i.line());
            }
        }
    }
}
