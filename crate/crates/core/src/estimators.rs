//! Point estimators and per-unit influence-function contributions.
//!
//! Every estimator of `alpha` (and of `beta` where nuisances are involved)
//! is the root of an estimating equation that is affine in the target:
//!
//! ```text
//! P_n[ κ_i (g_i − d_i θ) ] = 0      ⇒      θ̂ = Σ κ_i g_i / Σ κ_i d_i
//! ```
//!
//! where `κ_i` is the unit's fold-specific `1/P(S=0)` estimate and `d_i =
//! 1 − S_i`. With a single full-sample `κ̂` this reduces to the familiar
//! `κ̂ P_n[g]`. The influence-function vector of the estimate is
//! `κ_i (g_i − d_i θ̂)`, which has empirical mean zero by construction.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use crate::crossfit::NuisancePredictions;
use crate::data::{Dataset, Scenario};
use crate::error::{Error, Result};
use crate::nuisance::{Nuisance, TRIM};

/// `|beta|` below which the ratio `alpha / beta` is reported as undefined.
pub const RATIO_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Influence-function based (multiply robust) estimator.
    If,
    /// Outcome-regression weighting of target outcomes, `κ P_n[(μ11/μ10)(1−S)Y]`.
    Or,
    /// Treated-arm inverse probability weighting of trial outcomes.
    Ipw,
    /// Control-arm inverse probability weighting of trial outcomes.
    IpwAlt,
    /// Efficient estimator under the stronger mean-transportability condition.
    A4Star,
    /// Plug-in of the identification formula, `κ P_n[(1−S)(μ11/μ10)μ00]`.
    PlugIn,
    /// Target population is itself a two-arm trial.
    TrialTarget,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::If => "if",
            Method::Or => "or",
            Method::Ipw => "ipw",
            Method::IpwAlt => "ipw_alt",
            Method::A4Star => "a4star",
            Method::PlugIn => "plugin",
            Method::TrialTarget => "trial_target",
        }
    }

    pub fn from_name(name: &str) -> Option<Method> {
        [Method::If, Method::Or, Method::Ipw, Method::IpwAlt, Method::A4Star, Method::PlugIn, Method::TrialTarget]
            .into_iter()
            .find(|m| m.name() == name)
    }

    /// Whether the method comes with influence-function based inference.
    pub fn has_influence_function(self) -> bool {
        matches!(self, Method::If | Method::A4Star | Method::TrialTarget)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetEstimates {
    /// `E[Y¹ | S = 0]`
    pub alpha: f64,
    /// `E[Y⁰ | S = 0]`
    pub beta: f64,
    /// `alpha / beta`; `None` when `|beta| < 1e-12`.
    pub phi: Option<f64>,
    /// `alpha - beta`
    pub psi: f64,
    pub method: Method,
    pub scenario: Scenario,
}

impl TargetEstimates {
    fn new(alpha: f64, beta: f64, method: Method, scenario: Scenario) -> Self {
        let phi = if beta.abs() < RATIO_EPSILON { None } else { Some(alpha / beta) };
        TargetEstimates { alpha, beta, phi, psi: alpha - beta, method, scenario }
    }
}

/// Per-unit influence-function values at the point estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct IfVectors {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// Omitted when the ratio is undefined.
    pub phi: Option<Vec<f64>>,
    pub psi: Vec<f64>,
}

/// `κ_i (g_i − d_i θ)` for every unit.
#[derive(Debug, Clone)]
struct AffineEquation {
    kappa: Vec<f64>,
    g: Vec<f64>,
    d: Vec<f64>,
}

impl AffineEquation {
    fn solve(&self) -> Result<f64> {
        let mut num = 0.0;
        let mut den = 0.0;
        for ((k, g), d) in self.kappa.iter().zip(&self.g).zip(&self.d) {
            num += k * g;
            den += k * d;
        }
        if den == 0.0 || !den.is_finite() {
            return Err(Error::Structural(format!("estimating equation has no target-population mass")));
        }
        Ok(num / den)
    }

    fn influence(&self, theta: f64) -> Vec<f64> {
        self.kappa.iter().zip(&self.g).zip(&self.d).map(|((k, g), d)| k * (g - d * theta)).collect()
    }
}

struct Equations {
    alpha: AffineEquation,
    beta: AffineEquation,
    with_if: bool,
}

fn check_lengths(data: &Dataset, preds: &NuisancePredictions) -> Result<()> {
    if preds.len() != data.len() {
        return Err(Error::Dimension { expected: data.len(), got: preds.len() });
    }
    Ok(())
}

fn check_magnitude(nuisance: Nuisance, values: &[f64], units: impl Iterator<Item = usize>) -> Result<()> {
    let total = values.len();
    let bad = units.filter(|&i| !(values[i].abs() >= TRIM * (1.0 - 1e-12))).count();
    if bad > 0 {
        return Err(Error::Positivity { nuisance: nuisance.name(), clamped: bad, total });
    }
    Ok(())
}

fn check_probability(nuisance: Nuisance, values: &[f64], units: impl Iterator<Item = usize>) -> Result<()> {
    let total = values.len();
    let lo = TRIM * (1.0 - 1e-12);
    let bad = units.filter(|&i| !(values[i] >= lo && 1.0 - values[i] >= lo)).count();
    if bad > 0 {
        return Err(Error::Positivity { nuisance: nuisance.name(), clamped: bad, total });
    }
    Ok(())
}

/// Probabilities used only as denominators of their own value, not of `1 - p`.
fn check_denominator_probability(nuisance: Nuisance, values: &[f64], units: impl Iterator<Item = usize>) -> Result<()> {
    let total = values.len();
    let lo = TRIM * (1.0 - 1e-12);
    let bad = units.filter(|&i| !(values[i] >= lo && values[i] <= 1.0)).count();
    if bad > 0 {
        return Err(Error::Positivity { nuisance: nuisance.name(), clamped: bad, total });
    }
    Ok(())
}

fn trial_units(data: &Dataset) -> impl Iterator<Item = usize> + '_ {
    data.rows().iter().enumerate().filter(|(_, r)| r.s).map(|(i, _)| i)
}

fn target_units(data: &Dataset) -> impl Iterator<Item = usize> + '_ {
    data.rows().iter().enumerate().filter(|(_, r)| !r.s).map(|(i, _)| i)
}

/// Trial-side augmentation shared by the scenario 1–3 influence functions:
/// `S τ (num/μ10) [ (A/q)(Y−μ11) − ((1−A)/(1−q))(μ11/μ10)(Y−μ10) ]`,
/// where `num` is `μ00` (scenarios 1, 2) or `M` (scenario 3).
fn trial_augmentation(data: &Dataset, preds: &NuisancePredictions, numerator: Nuisance) -> Result<Vec<f64>> {
    let mu11 = preds.require(Nuisance::Mu11)?;
    let mu10 = preds.require(Nuisance::Mu10)?;
    let num = preds.require(numerator)?;
    let q = preds.require(Nuisance::Q)?;
    let tau = preds.require(Nuisance::Tau)?;
    check_magnitude(Nuisance::Mu10, mu10, 0..data.len())?;
    check_probability(Nuisance::Q, q, trial_units(data))?;
    Ok(data
        .rows()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if !r.s {
                return 0.0;
            }
            let ratio = mu11[i] / mu10[i];
            let resid = if r.a {
                (r.y - mu11[i]) / q[i]
            } else {
                -ratio * (r.y - mu10[i]) / (1.0 - q[i])
            };
            tau[i] * num[i] / mu10[i] * resid
        })
        .collect())
}

fn target_indicator(data: &Dataset) -> Vec<f64> {
    data.rows().iter().map(|r| 1.0 - r.s_f64()).collect()
}

/// Target-mean equation with the full-sample `κ = n / n0`.
fn target_mean_equation(data: &Dataset) -> AffineEquation {
    let kappa = data.len() as f64 / data.n0() as f64;
    AffineEquation {
        kappa: alloc::vec![kappa; data.len()],
        g: data.rows().iter().map(|r| if r.s { 0.0 } else { r.y }).collect(),
        d: target_indicator(data),
    }
}

fn scenario1_equations(data: &Dataset, preds: &NuisancePredictions, method: Method) -> Result<Equations> {
    data.ensure_scenario(Scenario::One)?;
    check_lengths(data, preds)?;
    let rows = data.rows();
    let kappa = preds.kappa().to_vec();
    let d = target_indicator(data);
    let ratio = || -> Result<Vec<f64>> {
        let mu11 = preds.require(Nuisance::Mu11)?;
        let mu10 = preds.require(Nuisance::Mu10)?;
        check_magnitude(Nuisance::Mu10, mu10, 0..data.len())?;
        Ok(mu11.iter().zip(mu10).map(|(a, b)| a / b).collect())
    };
    let g: Vec<f64> = match method {
        Method::If => {
            let aug = trial_augmentation(data, preds, Nuisance::Mu00)?;
            let ratio = ratio()?;
            rows.iter()
                .enumerate()
                .map(|(i, r)| if r.s { aug[i] } else { ratio[i] * r.y })
                .collect()
        }
        Method::Or => {
            let ratio = ratio()?;
            rows.iter().enumerate().map(|(i, r)| if r.s { 0.0 } else { ratio[i] * r.y }).collect()
        }
        Method::PlugIn => {
            let ratio = ratio()?;
            let mu00 = preds.require(Nuisance::Mu00)?;
            rows.iter().enumerate().map(|(i, r)| if r.s { 0.0 } else { ratio[i] * mu00[i] }).collect()
        }
        Method::Ipw | Method::IpwAlt => {
            let mu00 = preds.require(Nuisance::Mu00)?;
            let mu10 = preds.require(Nuisance::Mu10)?;
            let q = preds.require(Nuisance::Q)?;
            let tau = preds.require(Nuisance::Tau)?;
            check_magnitude(Nuisance::Mu10, mu10, 0..data.len())?;
            check_probability(Nuisance::Q, q, trial_units(data))?;
            let control = method == Method::IpwAlt;
            let ratio = if control { ratio()? } else { Vec::new() };
            rows.iter()
                .enumerate()
                .map(|(i, r)| {
                    if !r.s || r.a == control {
                        return 0.0;
                    }
                    let base = tau[i] * mu00[i] / mu10[i] * r.y;
                    if control {
                        base * ratio[i] / (1.0 - q[i])
                    } else {
                        base / q[i]
                    }
                })
                .collect()
        }
        Method::A4Star => {
            let mu11 = preds.require(Nuisance::Mu11)?;
            let q = preds.require(Nuisance::Q)?;
            let tau = preds.require(Nuisance::Tau)?;
            check_probability(Nuisance::Q, q, trial_units(data))?;
            rows.iter()
                .enumerate()
                .map(|(i, r)| match (r.s, r.a) {
                    (false, _) => mu11[i],
                    (true, true) => tau[i] * (r.y - mu11[i]) / q[i],
                    (true, false) => 0.0,
                })
                .collect()
        }
        Method::TrialTarget => {
            return Err(Error::Spec(format!("trial_target is estimated by estimate_trial_target")));
        }
    };
    Ok(Equations {
        alpha: AffineEquation { kappa, g, d },
        beta: target_mean_equation(data),
        with_if: matches!(method, Method::If | Method::A4Star),
    })
}

/// `(1−S)[ base + ((1−A)/π)(Y − base) ]` scaled by `scale` (the ratio for
/// alpha, 1 for beta).
fn target_augmented(
    data: &Dataset,
    base: &[f64],
    pi: &[f64],
    scale: Option<&[f64]>,
    treated_arm: bool,
) -> Vec<f64> {
    data.rows()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if r.s {
                return 0.0;
            }
            let w = if r.a != treated_arm {
                0.0
            } else if treated_arm {
                1.0 / (1.0 - pi[i])
            } else {
                1.0 / pi[i]
            };
            let v = base[i] + w * (r.y - base[i]);
            scale.map_or(v, |s| s[i] * v)
        })
        .collect()
}

fn confounded_equations(data: &Dataset, preds: &NuisancePredictions, scenario: Scenario) -> Result<Equations> {
    data.ensure_scenario(scenario)?;
    check_lengths(data, preds)?;
    let (outcome, propensity, weight_numerator) = match scenario {
        Scenario::Three => (Nuisance::Mu00W, Nuisance::PiW, Nuisance::MNested),
        _ => (Nuisance::Mu00, Nuisance::Pi, Nuisance::Mu00),
    };
    if data.cell_counts()[0][0] == 0 {
        return Err(Error::StratumEmpty { nuisance: outcome.name() });
    }
    let mu11 = preds.require(Nuisance::Mu11)?;
    let mu10 = preds.require(Nuisance::Mu10)?;
    let base = preds.require(outcome)?;
    let pi = preds.require(propensity)?;
    check_denominator_probability(propensity, pi, target_units(data))?;
    let aug = trial_augmentation(data, preds, weight_numerator)?;
    let ratio: Vec<f64> = mu11.iter().zip(mu10).map(|(a, b)| a / b).collect();
    let target_alpha = target_augmented(data, base, pi, Some(&ratio), false);
    let g_alpha = aug.iter().zip(&target_alpha).map(|(a, b)| a + b).collect();
    let g_beta = target_augmented(data, base, pi, None, false);
    let kappa = preds.kappa().to_vec();
    let d = target_indicator(data);
    Ok(Equations {
        alpha: AffineEquation { kappa: kappa.clone(), g: g_alpha, d: d.clone() },
        beta: AffineEquation { kappa, g: g_beta, d },
        with_if: true,
    })
}

fn trial_target_equations(data: &Dataset, preds: &NuisancePredictions) -> Result<Equations> {
    check_lengths(data, preds)?;
    let cells = data.cell_counts();
    if cells[0][1] == 0 {
        return Err(Error::StratumEmpty { nuisance: "mu01" });
    }
    if cells[0][0] == 0 {
        return Err(Error::StratumEmpty { nuisance: "mu00" });
    }
    let mu01 = preds.require(Nuisance::Mu01)?;
    let mu00 = preds.require(Nuisance::Mu00)?;
    let pi = preds.require(Nuisance::Pi)?;
    check_probability(Nuisance::Pi, pi, target_units(data))?;
    let kappa = preds.kappa().to_vec();
    let d = target_indicator(data);
    Ok(Equations {
        alpha: AffineEquation { kappa: kappa.clone(), g: target_augmented(data, mu01, pi, None, true), d: d.clone() },
        beta: AffineEquation { kappa, g: target_augmented(data, mu00, pi, None, false), d },
        with_if: true,
    })
}

fn equations(scenario: Scenario, method: Method, data: &Dataset, preds: &NuisancePredictions) -> Result<Equations> {
    match (method, scenario) {
        (Method::TrialTarget, _) => trial_target_equations(data, preds),
        (_, Scenario::One) => scenario1_equations(data, preds, method),
        (Method::If, s) => confounded_equations(data, preds, s),
        (m, s) => Err(Error::Spec(format!("method {m} is not available in scenario {}", s.number()))),
    }
}

fn ratio_and_difference(alpha: &[f64], beta: &[f64], points: &TargetEstimates) -> IfVectors {
    let psi = alpha.iter().zip(beta).map(|(a, b)| a - b).collect();
    let phi = points
        .phi
        .map(|phi| alpha.iter().zip(beta).map(|(a, b)| (a - phi * b) / points.beta).collect());
    IfVectors { alpha: alpha.to_vec(), beta: beta.to_vec(), phi, psi }
}

fn solve(
    scenario: Scenario,
    method: Method,
    data: &Dataset,
    preds: &NuisancePredictions,
) -> Result<(TargetEstimates, Option<IfVectors>)> {
    let eq = equations(scenario, method, data, preds)?;
    let alpha = eq.alpha.solve()?;
    let beta = eq.beta.solve()?;
    let points = TargetEstimates::new(alpha, beta, method, scenario);
    let ifs = eq
        .with_if
        .then(|| ratio_and_difference(&eq.alpha.influence(alpha), &eq.beta.influence(beta), &points));
    Ok((points, ifs))
}

/// Scenario 1 (all target units under control). Influence-function vectors
/// are returned for the `if` and `a4star` methods only.
pub fn estimate_scenario1(
    data: &Dataset,
    preds: &NuisancePredictions,
    method: Method,
) -> Result<(TargetEstimates, Option<IfVectors>)> {
    if method == Method::TrialTarget {
        return Err(Error::Spec(format!("trial_target is not a scenario-1 method")));
    }
    solve(Scenario::One, method, data, preds)
}

/// Scenario 2: confounded treatment in the target, `x` suffices.
pub fn estimate_scenario2(data: &Dataset, preds: &NuisancePredictions) -> Result<(TargetEstimates, IfVectors)> {
    let (est, ifs) = solve(Scenario::Two, Method::If, data, preds)?;
    Ok((est, ifs.expect("influence functions are always computed here")))
}

/// Scenario 3: target confounding needs the extra covariates `w`.
pub fn estimate_scenario3(data: &Dataset, preds: &NuisancePredictions) -> Result<(TargetEstimates, IfVectors)> {
    if data.q() == 0 {
        return Err(Error::ScenarioMismatch { requested: 3, reason: format!("target-only covariates w are missing") });
    }
    let (est, ifs) = solve(Scenario::Three, Method::If, data, preds)?;
    Ok((est, ifs.expect("influence functions are always computed here")))
}

/// Target population is a two-arm study; trial rows carry zero weight.
pub fn estimate_trial_target(data: &Dataset, preds: &NuisancePredictions) -> Result<(TargetEstimates, IfVectors)> {
    let (est, ifs) = solve(Scenario::Two, Method::TrialTarget, data, preds)?;
    Ok((est, ifs.expect("influence functions are always computed here")))
}

/// Dispatches on scenario and method.
pub fn estimate(
    scenario: Scenario,
    method: Method,
    data: &Dataset,
    preds: &NuisancePredictions,
) -> Result<(TargetEstimates, Option<IfVectors>)> {
    match (scenario, method) {
        (_, Method::TrialTarget) => estimate_trial_target(data, preds).map(|(e, i)| (e, Some(i))),
        (Scenario::One, m) => estimate_scenario1(data, preds, m),
        (Scenario::Two, Method::If) => estimate_scenario2(data, preds).map(|(e, i)| (e, Some(i))),
        (Scenario::Three, Method::If) => estimate_scenario3(data, preds).map(|(e, i)| (e, Some(i))),
        (s, m) => Err(Error::Spec(format!("method {m} is not available in scenario {}", s.number()))),
    }
}

/// Influence-function vectors evaluated at previously computed `points`.
pub fn influence_contributions(
    scenario: Scenario,
    method: Method,
    data: &Dataset,
    preds: &NuisancePredictions,
    points: &TargetEstimates,
) -> Result<IfVectors> {
    let eq = equations(scenario, method, data, preds)?;
    if !eq.with_if {
        return Err(Error::Spec(format!("method {method} has no influence function")));
    }
    Ok(ratio_and_difference(&eq.alpha.influence(points.alpha), &eq.beta.influence(points.beta), points))
}

/// Empirical versions of the second-order remainder terms, comparing fitted
/// nuisance predictions against oracle values at the same units. A term is
/// `None` when one of its nuisances is missing from either side.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BiasTerms {
    /// `‖μ̂11/μ̂10 − μ11/μ10‖ (‖μ̂00 − μ00‖ + ‖μ̂10 − μ10‖ + ‖τ̂ − τ‖)`
    pub r1n: Option<f64>,
    /// `‖μ̂11 − μ11‖ ‖τ̂ − τ‖`
    pub r1n_a4star: Option<f64>,
    /// `‖μ̂00 − μ00‖ ‖π̂ − π‖`
    pub r2n_beta: Option<f64>,
    /// `r1n + r2n_beta`
    pub r2n_alpha: Option<f64>,
    /// `‖μ̂′00 − μ′00‖ ‖π̂′ − π′‖`
    pub r3n_beta: Option<f64>,
    /// `‖μ̂11/μ̂10 − μ11/μ10‖ (‖M̂ − M‖ + ‖μ̂10 − μ10‖ + ‖τ̂ − τ‖) + r3n_beta`
    pub r3n_alpha: Option<f64>,
}

/// Empirical L2 distance over units where both vectors are defined.
fn l2(a: &[f64], b: &[f64]) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for (x, y) in a.iter().zip(b) {
        if !x.is_nan() && !y.is_nan() {
            sum += (x - y) * (x - y);
            n += 1;
        }
    }
    libm::sqrt(sum / n.max(1) as f64)
}

pub fn bias_terms(fitted: &NuisancePredictions, oracle: &NuisancePredictions) -> BiasTerms {
    let dist = |n: Nuisance| Some(l2(fitted.get(n)?, oracle.get(n)?));
    let ratio = |p: &NuisancePredictions| -> Option<Vec<f64>> {
        Some(p.get(Nuisance::Mu11)?.iter().zip(p.get(Nuisance::Mu10)?).map(|(a, b)| a / b).collect())
    };
    let ratio_dist = (|| Some(l2(&ratio(fitted)?, &ratio(oracle)?)))();
    let r1n = (|| Some(ratio_dist? * (dist(Nuisance::Mu00)? + dist(Nuisance::Mu10)? + dist(Nuisance::Tau)?)))();
    let r2n_beta = (|| Some(dist(Nuisance::Mu00)? * dist(Nuisance::Pi)?))();
    let r3n_beta = (|| Some(dist(Nuisance::Mu00W)? * dist(Nuisance::PiW)?))();
    BiasTerms {
        r1n,
        r1n_a4star: (|| Some(dist(Nuisance::Mu11)? * dist(Nuisance::Tau)?))(),
        r2n_beta,
        r2n_alpha: (|| Some(r1n? + r2n_beta?))(),
        r3n_beta,
        r3n_alpha: (|| {
            Some(ratio_dist? * (dist(Nuisance::MNested)? + dist(Nuisance::Mu10)? + dist(Nuisance::Tau)?) + r3n_beta?)
        })(),
    }
}
