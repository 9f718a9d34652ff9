//! Observation storage and scenario-level structural checks.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Which data structure the analysis assumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    /// Every target unit received the control treatment.
    One,
    /// Target units received a mix of treatments; `x` suffices for confounding control.
    Two,
    /// As `Two`, with extra target-only confounders `w`.
    Three,
}

impl Scenario {
    pub fn number(self) -> u8 {
        match self {
            Scenario::One => 1,
            Scenario::Two => 2,
            Scenario::Three => 3,
        }
    }

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Scenario::One),
            2 => Ok(Scenario::Two),
            3 => Ok(Scenario::Three),
            _ => Err(Error::Parameter(format!("scenario must be 1, 2 or 3, got {n}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub y: f64,
    /// `true` for trial participants (`s = 1`).
    pub s: bool,
    /// `true` for the experimental arm (`a = 1`).
    pub a: bool,
    pub x: Vec<f64>,
    /// Target-only covariates; ignored on trial rows.
    pub w: Option<Vec<f64>>,
}

impl Observation {
    pub fn new(y: f64, s: bool, a: bool, x: Vec<f64>) -> Self {
        Observation { y, s, a, x, w: None }
    }

    pub fn with_w(mut self, w: Vec<f64>) -> Self {
        self.w = Some(w);
        self
    }

    #[inline]
    pub fn s_f64(&self) -> f64 {
        if self.s { 1.0 } else { 0.0 }
    }

    #[inline]
    pub fn a_f64(&self) -> f64 {
        if self.a { 1.0 } else { 0.0 }
    }

    /// `(x, w)` concatenated; `w` contributes nothing when absent.
    pub fn xw(&self) -> Vec<f64> {
        let mut v = self.x.clone();
        if let Some(w) = &self.w {
            v.extend_from_slice(w);
        }
        v
    }

    fn stratum(&self) -> usize {
        (self.s as usize) * 2 + self.a as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScenarioFlags {
    pub one: bool,
    pub two: bool,
    pub three: bool,
}

impl ScenarioFlags {
    pub fn supports(&self, scenario: Scenario) -> bool {
        match scenario {
            Scenario::One => self.one,
            Scenario::Two => self.two,
            Scenario::Three => self.three,
        }
    }
}

/// Immutable table of trial and target observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: Vec<Observation>,
    n1: usize,
    n0: usize,
    p: usize,
    q: usize,
    flags: ScenarioFlags,
}

impl Dataset {
    /// Builds a dataset, checking the structural invariants and deriving the
    /// scenario flags from the rows.
    pub fn new(mut rows: Vec<Observation>) -> Result<Self> {
        let p = rows.first().map_or(0, |r| r.x.len());
        let mut q = None;
        let mut target_w_present = 0usize;
        let mut target_treated = 0usize;
        let (mut n1, mut n0) = (0usize, 0usize);
        for (i, r) in rows.iter_mut().enumerate() {
            if r.x.len() != p {
                return Err(Error::Structural(format!(
                    "row {i}: expected {p} covariates, found {}",
                    r.x.len()
                )));
            }
            if !r.y.is_finite() || r.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse(format!("row {i}: non-finite value")));
            }
            if r.s {
                n1 += 1;
                r.w = None;
                continue;
            }
            n0 += 1;
            if r.a {
                target_treated += 1;
            }
            if let Some(w) = &r.w {
                if w.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Parse(format!("row {i}: non-finite w value")));
                }
                match q {
                    None => q = Some(w.len()),
                    Some(len) if len != w.len() => {
                        return Err(Error::Structural(format!(
                            "row {i}: expected {len} target covariates, found {}",
                            w.len()
                        )))
                    }
                    _ => {}
                }
                target_w_present += 1;
            }
        }
        if n1 == 0 || n0 == 0 {
            return Err(Error::Structural(format!(
                "both sources must be present (trial rows: {n1}, target rows: {n0})"
            )));
        }
        if target_w_present != 0 && target_w_present != n0 {
            return Err(Error::Structural(format!(
                "w present on {target_w_present} of {n0} target rows; it must be all or none"
            )));
        }
        let q = q.unwrap_or(0);
        let flags = ScenarioFlags {
            one: target_treated == 0,
            two: true,
            three: target_w_present == n0 && q > 0,
        };
        Ok(Dataset { rows, n1, n0, p, q, flags })
    }

    #[inline]
    pub fn rows(&self) -> &[Observation] {
        &self.rows
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Number of trial units.
    pub fn n1(&self) -> usize {
        self.n1
    }

    /// Number of target units.
    pub fn n0(&self) -> usize {
        self.n0
    }

    /// Length of the shared covariate vector.
    pub fn p(&self) -> usize {
        self.p
    }

    /// Length of the target-only covariate vector (0 when absent).
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn scenario_flags(&self) -> ScenarioFlags {
        self.flags
    }

    /// Unit counts per `(s, a)` cell, indexed `[s][a]`.
    pub fn cell_counts(&self) -> [[usize; 2]; 2] {
        let mut c = [[0usize; 2]; 2];
        for r in &self.rows {
            c[r.s as usize][r.a as usize] += 1;
        }
        c
    }

    /// Indices of each `(s, a)` stratum in row order, indexed `s * 2 + a`.
    pub fn strata(&self) -> [Vec<usize>; 4] {
        let mut out: [Vec<usize>; 4] = Default::default();
        for (i, r) in self.rows.iter().enumerate() {
            out[r.stratum()].push(i);
        }
        out
    }

    pub fn ensure_scenario(&self, scenario: Scenario) -> Result<()> {
        if self.flags.supports(scenario) {
            return Ok(());
        }
        let reason = match scenario {
            Scenario::One => String::from("some target units received the experimental treatment"),
            Scenario::Three => String::from("target-only covariates w are missing"),
            Scenario::Two => String::from("unsupported"),
        };
        Err(Error::ScenarioMismatch { requested: scenario.number(), reason })
    }

    /// Empirical positivity screening for `scenario`.
    pub fn validate(&self, scenario: Scenario) -> Result<ValidationReport> {
        self.ensure_scenario(scenario)?;
        let cells = self.cell_counts();
        let mut report = ValidationReport::default();
        if cells[1][1] == 0 {
            report.violations.push(Violation::new("TRIAL_TREATED_EMPTY", "treated arm empty in trial"));
        }
        if cells[1][0] == 0 {
            report.violations.push(Violation::new("TRIAL_CONTROL_EMPTY", "control arm empty in trial"));
        }
        if scenario != Scenario::One {
            if cells[0][0] == 0 {
                report.violations.push(Violation::new("TARGET_CONTROL_EMPTY", "control arm empty in target"));
            }
            if cells[0][1] == 0 {
                report.violations.push(Violation::new("TARGET_TREATED_EMPTY", "treated arm empty in target"));
            }
        }

        // constant covariates within the strata that outcome models are fit on
        let strata = self.strata();
        let mut fitting: Vec<(&str, Vec<usize>)> = alloc::vec![
            ("s=1,a=1", strata[3].clone()),
            ("s=1,a=0", strata[2].clone()),
        ];
        if scenario == Scenario::One {
            let mut target = strata[0].clone();
            target.extend_from_slice(&strata[1]);
            target.sort_unstable();
            fitting.push(("s=0", target));
        } else {
            fitting.push(("s=0,a=0", strata[0].clone()));
        }
        for (name, idx) in &fitting {
            if idx.len() < 2 {
                continue;
            }
            for j in 0..self.p {
                let first = self.rows[idx[0]].x[j];
                if idx.iter().all(|&i| self.rows[i].x[j] == first) {
                    report.warnings.push(format!("covariate x{} is constant within stratum {name}", j + 1));
                }
            }
            if scenario == Scenario::Three && name.starts_with("s=0") {
                for j in 0..self.q {
                    let w = |i: usize| self.rows[i].w.as_ref().map_or(0.0, |w| w[j]);
                    let first = w(idx[0]);
                    if idx.iter().all(|&i| w(i) == first) {
                        report.warnings.push(format!("covariate w{} is constant within stratum {name}", j + 1));
                    }
                }
            }
        }
        Ok(report)
    }

    /// Returns a copy with the outcomes replaced.
    pub fn with_outcomes(&self, y: &[f64]) -> Result<Self> {
        if y.len() != self.rows.len() {
            return Err(Error::Dimension { expected: self.rows.len(), got: y.len() });
        }
        let rows = self
            .rows
            .iter()
            .zip(y)
            .map(|(r, &y)| Observation { y, ..r.clone() })
            .collect();
        Dataset::new(rows)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub code: &'static str,
    pub message: &'static str,
}

impl Violation {
    fn new(code: &'static str, message: &'static str) -> Self {
        Violation { code, message }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn obs(s: u8, a: u8) -> Observation {
        Observation::new(1.0, s == 1, a == 1, vec![0.5])
    }

    #[test]
    fn counts_and_scenario_one_flag() {
        let d = Dataset::new(vec![obs(1, 1), obs(1, 0), obs(0, 0), obs(0, 0)]).unwrap();
        assert_eq!((d.n1(), d.n0()), (2, 2));
        assert!(d.scenario_flags().one);
        assert!(!d.scenario_flags().three);
    }

    #[test]
    fn treated_target_unit_clears_scenario_one() {
        let d = Dataset::new(vec![obs(1, 1), obs(1, 0), obs(0, 1), obs(0, 0)]).unwrap();
        assert!(!d.scenario_flags().one);
        assert!(d.scenario_flags().two);
    }

    #[test]
    fn scenario_three_needs_w_on_every_target_row() {
        let rows = vec![
            obs(1, 1),
            obs(1, 0).with_w(vec![9.0]),
            obs(0, 0).with_w(vec![1.0]),
            obs(0, 1).with_w(vec![0.0]),
        ];
        let d = Dataset::new(rows).unwrap();
        assert!(d.scenario_flags().three);
        assert!(d.rows()[1].w.is_none(), "trial w is dropped");

        let partial = vec![obs(1, 1), obs(1, 0), obs(0, 0).with_w(vec![1.0]), obs(0, 0)];
        assert!(matches!(Dataset::new(partial), Err(Error::Structural(_))));
    }

    #[test]
    fn empty_source_is_structural_error() {
        assert!(matches!(Dataset::new(vec![obs(1, 1), obs(1, 0)]), Err(Error::Structural(_))));
    }

    #[test]
    fn validate_reports_empty_target_control() {
        let d = Dataset::new(vec![obs(1, 1), obs(1, 0), obs(0, 1), obs(0, 1)]).unwrap();
        let report = d.validate(Scenario::Two).unwrap();
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].message, "control arm empty in target");
    }

    #[test]
    fn validate_scenario_one_clean() {
        let d = Dataset::new(vec![
            Observation::new(1.0, true, true, vec![0.1]),
            Observation::new(1.0, true, false, vec![0.2]),
            Observation::new(1.0, true, false, vec![0.3]),
            Observation::new(1.0, true, true, vec![0.4]),
            Observation::new(1.0, false, false, vec![0.5]),
            Observation::new(1.0, false, false, vec![0.6]),
        ])
        .unwrap();
        let report = d.validate(Scenario::One).unwrap();
        assert!(report.is_clean());
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn validate_warns_on_constant_covariate() {
        let d = Dataset::new(vec![obs(1, 1), obs(1, 1), obs(1, 0), obs(0, 0)]).unwrap();
        let report = d.validate(Scenario::One).unwrap();
        assert!(report.is_clean());
        assert!(report.warnings.iter().any(|w| w.contains("s=1,a=1")));
    }

    #[test]
    fn scenario_three_without_w_is_mismatch() {
        let d = Dataset::new(vec![obs(1, 1), obs(1, 0), obs(0, 0)]).unwrap();
        assert!(matches!(d.validate(Scenario::Three), Err(Error::ScenarioMismatch { requested: 3, .. })));
    }
}
