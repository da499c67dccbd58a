//! The acceptance checks, shared by `gffpin verify` and the integration tests.
//! Each check computes its measurements from scratch and reports every
//! tolerance it applies.

mod checks;

pub(crate) use checks::brute_tail;

use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;

use crate::error::Result;

#[derive(Clone, Debug, Serialize)]
pub struct Measurement {
    pub label: String,
    pub value: f64,
    /// Human-readable acceptance rule.
    pub rule: String,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub id: usize,
    pub name: &'static str,
    pub measurements: Vec<Measurement>,
    pub notes: Vec<String>,
    pub seconds: f64,
}

impl CheckReport {
    fn new(id: usize) -> Self {
        Self {
            id,
            name: CHECKS[id - 1].1,
            measurements: Vec::new(),
            notes: Vec::new(),
            seconds: 0.0,
        }
    }

    fn measure(&mut self, label: impl Into<String>, value: f64, rule: impl Into<String>, pass: bool) {
        self.measurements.push(Measurement {
            label: label.into(),
            value,
            rule: rule.into(),
            pass,
        });
    }

    fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn passed(&self) -> bool {
        !self.measurements.is_empty() && self.measurements.iter().all(|m| m.pass)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let _ = writeln!(s, "{verdict} C{} {} ({:.1} s)", self.id, self.name, self.seconds);
        for m in &self.measurements {
            let v = if m.pass { "pass" } else { "FAIL" };
            let _ = writeln!(s, "  {v} {} = {:.6e}  [{}]", m.label, m.value, m.rule);
        }
        for n in &self.notes {
            let _ = writeln!(s, "  note: {n}");
        }
        s
    }
}

/// `(id, name)` of every check.
pub const CHECKS: [(usize, &str); 11] = [
    (1, "green-convergence"),
    (2, "frd-covariance"),
    (3, "phi0-variance"),
    (4, "hierarchy-bounds"),
    (5, "optimal-density"),
    (6, "mcmc-oracle"),
    (7, "homogeneous-free-energy"),
    (8, "quenched-inequalities"),
    (9, "bounds"),
    (10, "bi-gradient-decay"),
    (11, "height-profile"),
];

/// Check ids of a named suite: `all`, `fast` (deterministic checks only), a
/// check name, or `c<id>`.
pub fn suite(name: &str) -> Option<Vec<usize>> {
    match name {
        "all" | "acceptance" => Some((1..=11).collect()),
        "fast" => Some(vec![1, 2, 3, 4, 5, 9, 10]),
        "mcmc" => Some(vec![6, 7, 8, 11]),
        _ => {
            if let Some(id) = name.strip_prefix('c').and_then(|s| s.parse::<usize>().ok()) {
                return (1..=11).contains(&id).then(|| vec![id]);
            }
            CHECKS.iter().find(|(_, n)| *n == name).map(|(id, _)| vec![*id])
        }
    }
}

pub fn run_check(id: usize) -> Result<CheckReport> {
    let start = Instant::now();
    let mut report = CheckReport::new(id);
    match id {
        1 => checks::green_convergence(&mut report)?,
        2 => checks::frd_covariance(&mut report)?,
        3 => checks::phi0_variance(&mut report)?,
        4 => checks::hierarchy_bounds(&mut report)?,
        5 => checks::optimal_density(&mut report)?,
        6 => checks::mcmc_oracle(&mut report)?,
        7 => checks::homogeneous_free_energy(&mut report)?,
        8 => checks::quenched_inequalities(&mut report)?,
        9 => checks::bounds(&mut report)?,
        10 => checks::bi_gradient_decay(&mut report)?,
        11 => checks::height_profile(&mut report)?,
        _ => return crate::error::invalid(format!("no check with id {id}")),
    }
    report.seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names() {
        assert_eq!(suite("all").unwrap().len(), 11);
        assert_eq!(suite("c7"), Some(vec![7]));
        assert_eq!(suite("bounds"), Some(vec![9]));
        assert_eq!(suite("c12"), None);
        assert_eq!(suite("nope"), None);
    }

    #[test]
    fn empty_report_does_not_pass() {
        let r = CheckReport::new(1);
        assert!(!r.passed());
        assert!(r.render().starts_with("FAIL C1"));
    }
}
