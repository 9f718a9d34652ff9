//! Nuisance functions: specification, fitting and evaluation.
//!
//! Every nuisance is described by a [`NuisanceModel`]: a GLM over a subset of
//! covariates, a known constant, or an arbitrary function (oracle truth or a
//! perturbed version of it). [`fit_bundle`] turns a [`NuisanceSpec`] into an
//! immutable [`NuisanceBundle`] trained on a subset of rows.

pub mod glm;
pub mod perturb;

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::data::{Dataset, Observation, Scenario};
use crate::error::{Error, Result};
use crate::math::Matrix;

pub use glm::{fit_glm, predict, Family, GlmFit};
pub use perturb::{make_perturbed_oracle, perturb_with_epsilon, PerturbKind};

/// Denominator trimming threshold.
pub const TRIM: f64 = 1e-3;
/// Largest tolerated fraction of clamped denominator predictions.
pub const MAX_TRIM_FRACTION: f64 = 0.05;

/// Shared, thread-safe function of a covariate vector.
pub type NuisanceFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

pub fn nuisance_fn<F>(f: F) -> NuisanceFn
where
    F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
{
    Arc::new(f)
}

/// The nuisance functions that appear in any of the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Nuisance {
    /// `E[Y | X, S=1, A=1]`
    Mu11,
    /// `E[Y | X, S=1, A=0]`
    Mu10,
    /// `E[Y | X, S=0]` (all-control target) or `E[Y | X, S=0, A=0]`
    Mu00,
    /// `E[Y | X, S=0, A=1]`, trial-as-target only
    Mu01,
    /// `P(A=1 | X, S=1)`
    Q,
    /// `P(S=0 | X) / P(S=1 | X)`
    Tau,
    /// `P(A=0 | X, S=0)`
    Pi,
    /// `E[Y | X, W, S=0, A=0]`
    Mu00W,
    /// `E[ E[Y | X, W, S=0, A=0] | X, S=0 ]`
    MNested,
    /// `P(A=0 | X, W, S=0)`
    PiW,
}

impl Nuisance {
    pub const ALL: [Nuisance; 10] = [
        Nuisance::Mu11,
        Nuisance::Mu10,
        Nuisance::Mu00,
        Nuisance::Mu01,
        Nuisance::Q,
        Nuisance::Tau,
        Nuisance::Pi,
        Nuisance::Mu00W,
        Nuisance::MNested,
        Nuisance::PiW,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Nuisance::Mu11 => "mu11",
            Nuisance::Mu10 => "mu10",
            Nuisance::Mu00 => "mu00",
            Nuisance::Mu01 => "mu01",
            Nuisance::Q => "q",
            Nuisance::Tau => "tau",
            Nuisance::Pi => "pi",
            Nuisance::Mu00W => "mu00_w",
            Nuisance::MNested => "m_nested",
            Nuisance::PiW => "pi_w",
        }
    }

    pub fn from_name(name: &str) -> Option<Nuisance> {
        Nuisance::ALL.iter().copied().find(|n| n.name() == name)
    }

    #[inline]
    fn index(self) -> usize {
        self as usize
    }

    /// Whether the function takes `(x, w)` rather than `x`.
    pub fn uses_w(self) -> bool {
        matches!(self, Nuisance::Mu00W | Nuisance::PiW)
    }

    /// Probability-valued nuisances are always fit with the logistic family.
    fn is_probability(self) -> bool {
        matches!(self, Nuisance::Q | Nuisance::Tau | Nuisance::Pi | Nuisance::PiW)
    }
}

impl fmt::Display for Nuisance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Regressors of a GLM nuisance. Indices address `x` or, for the `(x, w)`
/// models, the concatenation `(x, w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpec {
    pub covariate_indices: Vec<usize>,
    pub include_intercept: bool,
    pub family: Family,
}

impl FeatureSpec {
    /// Intercept plus every covariate in `0..p`.
    pub fn all(p: usize, family: Family) -> Self {
        FeatureSpec { covariate_indices: (0..p).collect(), include_intercept: true, family }
    }

    pub fn intercept_only(family: Family) -> Self {
        FeatureSpec { covariate_indices: Vec::new(), include_intercept: true, family }
    }

    pub fn new(covariate_indices: Vec<usize>, include_intercept: bool, family: Family) -> Self {
        FeatureSpec { covariate_indices, include_intercept, family }
    }

    pub fn regressor_count(&self) -> usize {
        self.covariate_indices.len() + self.include_intercept as usize
    }

    fn check(&self, width: usize, nuisance: Nuisance) -> Result<()> {
        if self.regressor_count() == 0 {
            return Err(Error::Spec(format!("{nuisance}: at least one regressor is required")));
        }
        if let Some(&bad) = self.covariate_indices.iter().find(|&&j| j >= width) {
            return Err(Error::Spec(format!("{nuisance}: covariate index {bad} out of range (width {width})")));
        }
        Ok(())
    }

    fn features(&self, covariates: &[f64]) -> Vec<f64> {
        self.covariate_indices.iter().map(|&j| covariates[j]).collect()
    }

    fn design(&self, rows: &[Vec<f64>]) -> Matrix {
        let width = self.regressor_count();
        let mut data = Vec::with_capacity(rows.len() * width);
        for r in rows {
            if self.include_intercept {
                data.push(1.0);
            }
            data.extend(self.covariate_indices.iter().map(|&j| r[j]));
        }
        Matrix::from_row_major(rows.len(), width, data).expect("design dimensions are consistent")
    }
}

/// How one nuisance function is obtained.
#[derive(Clone)]
pub enum NuisanceModel {
    Glm(FeatureSpec),
    Known(f64),
    Oracle(NuisanceFn),
    Perturbed(NuisanceFn),
}

impl fmt::Debug for NuisanceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NuisanceModel::Glm(spec) => f.debug_tuple("Glm").field(spec).finish(),
            NuisanceModel::Known(v) => f.debug_tuple("Known").field(v).finish(),
            NuisanceModel::Oracle(_) => f.write_str("Oracle(..)"),
            NuisanceModel::Perturbed(_) => f.write_str("Perturbed(..)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Fitted,
    Oracle,
    Known,
    Perturbed,
}

/// Declarative description of every nuisance the analysis needs.
#[derive(Debug, Clone, Default)]
pub struct NuisanceSpec {
    models: [Option<NuisanceModel>; 10],
}

impl NuisanceSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, nuisance: Nuisance, model: NuisanceModel) -> Self {
        self.set(nuisance, model);
        self
    }

    pub fn set(&mut self, nuisance: Nuisance, model: NuisanceModel) {
        self.models[nuisance.index()] = Some(model);
    }

    pub fn get(&self, nuisance: Nuisance) -> Option<&NuisanceModel> {
        self.models[nuisance.index()].as_ref()
    }

    pub fn specified(&self) -> impl Iterator<Item = Nuisance> + '_ {
        Nuisance::ALL.iter().copied().filter(|n| self.get(*n).is_some())
    }

    /// GLMs on every covariate (with intercept) for the nuisances of
    /// `scenario`; outcome families follow the response type.
    pub fn glm_default(data: &Dataset, scenario: Scenario, trial_target: bool) -> Self {
        let p = data.p();
        let y: Vec<f64> = data.rows().iter().map(|r| r.y).collect();
        let outcome = Family::default_for(&y);
        let mut spec = NuisanceSpec::new();
        for n in required_nuisances(scenario, trial_target) {
            let model = match n {
                Nuisance::Mu00W => FeatureSpec::all(p + data.q(), outcome),
                Nuisance::PiW => FeatureSpec::all(p + data.q(), Family::Logistic),
                Nuisance::MNested => FeatureSpec::all(p, Family::Linear),
                n if n.is_probability() => FeatureSpec::all(p, Family::Logistic),
                _ => FeatureSpec::all(p, outcome),
            };
            spec.set(n, NuisanceModel::Glm(model));
        }
        spec
    }

    /// Checks that every nuisance needed by `scenario` is specified.
    pub fn check(&self, scenario: Scenario, trial_target: bool) -> Result<()> {
        for n in required_nuisances(scenario, trial_target) {
            if self.get(n).is_none() {
                return Err(Error::Spec(format!("nuisance {n} is required for scenario {}", scenario.number())));
            }
        }
        Ok(())
    }
}

/// Nuisances required by the estimators of a scenario.
pub fn required_nuisances(scenario: Scenario, trial_target: bool) -> Vec<Nuisance> {
    use Nuisance::*;
    if trial_target {
        return alloc::vec![Mu01, Mu00, Pi];
    }
    match scenario {
        Scenario::One => alloc::vec![Mu11, Mu10, Mu00, Q, Tau],
        Scenario::Two => alloc::vec![Mu11, Mu10, Mu00, Q, Tau, Pi],
        Scenario::Three => alloc::vec![Mu11, Mu10, Mu00W, MNested, Q, Tau, PiW],
    }
}

#[derive(Clone)]
enum Fitted {
    Glm { fit: GlmFit, features: FeatureSpec },
    Constant(f64),
    Function(NuisanceFn),
}

/// A nuisance function ready for evaluation.
#[derive(Clone)]
pub struct FittedNuisance {
    inner: Fitted,
    provenance: Provenance,
}

impl fmt::Debug for FittedNuisance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("FittedNuisance");
        d.field("provenance", &self.provenance);
        match &self.inner {
            Fitted::Glm { fit, .. } => d.field("fit", fit),
            Fitted::Constant(c) => d.field("constant", c),
            Fitted::Function(_) => d.field("function", &".."),
        };
        d.finish()
    }
}

impl FittedNuisance {
    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn glm(&self) -> Option<&GlmFit> {
        match &self.inner {
            Fitted::Glm { fit, .. } => Some(fit),
            _ => None,
        }
    }

    /// Value of the underlying regression on its own scale (for the
    /// membership model this is `P(S=0 | x)`).
    fn raw(&self, covariates: &[f64]) -> Result<f64> {
        match &self.inner {
            Fitted::Glm { fit, features } => predict(fit, &features.features(covariates)),
            Fitted::Constant(c) => Ok(*c),
            Fitted::Function(f) => Ok(f(covariates)),
        }
    }
}

/// Evaluated nuisance value after the trimming rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trimmed {
    pub value: f64,
    pub clamped: bool,
}

fn clamp_probability(p: f64) -> Trimmed {
    if p < TRIM {
        Trimmed { value: TRIM, clamped: true }
    } else if p > 1.0 - TRIM {
        Trimmed { value: 1.0 - TRIM, clamped: true }
    } else {
        Trimmed { value: p, clamped: false }
    }
}

fn clamp_magnitude(v: f64) -> Trimmed {
    if v.abs() < TRIM {
        Trimmed { value: if v < 0.0 { -TRIM } else { TRIM }, clamped: true }
    } else {
        Trimmed { value: v, clamped: false }
    }
}

/// Fitted nuisance functions plus the `kappa` estimate of their training set.
#[derive(Debug, Clone)]
pub struct NuisanceBundle {
    kappa: f64,
    fitted: [Option<FittedNuisance>; 10],
}

impl NuisanceBundle {
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn get(&self, nuisance: Nuisance) -> Option<&FittedNuisance> {
        self.fitted[nuisance.index()].as_ref()
    }

    pub fn has(&self, nuisance: Nuisance) -> bool {
        self.get(nuisance).is_some()
    }

    /// Evaluates a nuisance at an observation, applying the trimming rule to
    /// the denominator nuisances (`mu10`, `q`, `pi`, `pi_w`, and the trial
    /// membership probability inside `tau`).
    pub fn evaluate(&self, nuisance: Nuisance, obs: &Observation) -> Result<Trimmed> {
        let f = self
            .get(nuisance)
            .ok_or_else(|| Error::Spec(format!("nuisance {nuisance} was not fitted")))?;
        let raw = if nuisance.uses_w() {
            f.raw(&obs.xw())?
        } else {
            f.raw(&obs.x)?
        };
        Ok(match nuisance {
            Nuisance::Mu10 => clamp_magnitude(raw),
            Nuisance::Q | Nuisance::Pi | Nuisance::PiW => clamp_probability(raw),
            Nuisance::Tau => match f.inner {
                // membership model: raw is P(S=0|x); t = P(S=1|x) is the denominator
                Fitted::Glm { .. } => {
                    let t = 1.0 - raw;
                    if t < TRIM {
                        Trimmed { value: (1.0 - TRIM) / TRIM, clamped: true }
                    } else {
                        Trimmed { value: raw / t, clamped: false }
                    }
                }
                _ => Trimmed { value: raw, clamped: false },
            },
            _ => Trimmed { value: raw, clamped: false },
        })
    }
}

/// `1 / (fraction of target units in subset)`.
pub fn estimate_kappa(data: &Dataset, subset: &[usize]) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::Parameter(format!("kappa requires a nonempty subset")));
    }
    let n0 = subset.iter().filter(|&&i| !data.rows()[i].s).count();
    if n0 == 0 {
        return Err(Error::DegenerateKappa);
    }
    Ok(subset.len() as f64 / n0 as f64)
}

fn fit_glm_nuisance(
    nuisance: Nuisance,
    features: &FeatureSpec,
    covariates: Vec<Vec<f64>>,
    response: Vec<f64>,
    width: usize,
) -> Result<FittedNuisance> {
    features.check(width, nuisance)?;
    if covariates.is_empty() {
        return Err(Error::StratumEmpty { nuisance: nuisance.name() });
    }
    let family = if nuisance.is_probability() { Family::Logistic } else { features.family };
    let design = features.design(&covariates);
    let mut fit = fit_glm(&design, &response, family)?;
    fit.intercept = features.include_intercept;
    Ok(FittedNuisance { inner: Fitted::Glm { fit, features: features.clone() }, provenance: Provenance::Fitted })
}

/// Fits every specified nuisance on `train` (row indices of `data`).
///
/// Fitting strata: `mu11` on `{s=1,a=1}`, `mu10` on `{s=1,a=0}`, `mu00` on
/// `{s=0}` in scenario 1 and on `{s=0,a=0}` otherwise, `mu01` on
/// `{s=0,a=1}`, `q` on `{s=1}`, the membership model behind `tau` on all
/// rows, `pi` and `pi_w` on `{s=0}`, `mu00_w` on `{s=0,a=0}` and
/// `m_nested` by regressing fitted `mu00_w` values on `x` over `{s=0}`.
pub fn fit_bundle(data: &Dataset, spec: &NuisanceSpec, train: &[usize], scenario: Scenario) -> Result<NuisanceBundle> {
    let rows = data.rows();
    let kappa = estimate_kappa(data, train)?;
    let mut fitted: [Option<FittedNuisance>; 10] = Default::default();

    let select = |pred: &dyn Fn(&Observation) -> bool| -> Vec<usize> {
        train.iter().copied().filter(|&i| pred(&rows[i])).collect()
    };

    // MNested depends on Mu00W, which comes earlier in ALL
    for nuisance in Nuisance::ALL {
        let Some(model) = spec.get(nuisance) else { continue };
        let out = match model {
            NuisanceModel::Known(c) => FittedNuisance { inner: Fitted::Constant(*c), provenance: Provenance::Known },
            NuisanceModel::Oracle(f) => FittedNuisance { inner: Fitted::Function(f.clone()), provenance: Provenance::Oracle },
            NuisanceModel::Perturbed(f) => {
                FittedNuisance { inner: Fitted::Function(f.clone()), provenance: Provenance::Perturbed }
            }
            NuisanceModel::Glm(features) => {
                let p = data.p();
                let (idx, response): (Vec<usize>, Vec<f64>) = match nuisance {
                    Nuisance::Mu11 => with_y(rows, select(&|r| r.s && r.a)),
                    Nuisance::Mu10 => with_y(rows, select(&|r| r.s && !r.a)),
                    Nuisance::Mu00 if scenario == Scenario::One => with_y(rows, select(&|r| !r.s)),
                    Nuisance::Mu00 | Nuisance::Mu00W => with_y(rows, select(&|r| !r.s && !r.a)),
                    Nuisance::Mu01 => with_y(rows, select(&|r| !r.s && r.a)),
                    Nuisance::Q => {
                        let idx = select(&|r| r.s);
                        let resp = idx.iter().map(|&i| rows[i].a_f64()).collect();
                        (idx, resp)
                    }
                    Nuisance::Tau => (train.to_vec(), train.iter().map(|&i| 1.0 - rows[i].s_f64()).collect()),
                    Nuisance::Pi | Nuisance::PiW => {
                        let idx = select(&|r| !r.s);
                        let resp = idx.iter().map(|&i| 1.0 - rows[i].a_f64()).collect();
                        (idx, resp)
                    }
                    Nuisance::MNested => {
                        let inner = fitted[Nuisance::Mu00W.index()].as_ref().ok_or_else(|| {
                            Error::Spec(format!("m_nested needs mu00_w to be specified"))
                        })?;
                        let idx = select(&|r| !r.s);
                        let resp = idx.iter().map(|&i| inner.raw(&rows[i].xw())).collect::<Result<Vec<f64>>>()?;
                        (idx, resp)
                    }
                };
                let (covariates, width) = if nuisance.uses_w() {
                    if idx.iter().any(|&i| rows[i].w.is_none()) {
                        return Err(Error::ScenarioMismatch {
                            requested: 3,
                            reason: format!("{nuisance} needs w on every target row"),
                        });
                    }
                    (idx.iter().map(|&i| rows[i].xw()).collect(), p + data.q())
                } else {
                    (idx.iter().map(|&i| rows[i].x.clone()).collect(), p)
                };
                fit_glm_nuisance(nuisance, features, covariates, response, width)?
            }
        };
        fitted[nuisance.index()] = Some(out);
    }
    Ok(NuisanceBundle { kappa, fitted })
}

fn with_y(rows: &[Observation], idx: Vec<usize>) -> (Vec<usize>, Vec<f64>) {
    let y = idx.iter().map(|&i| rows[i].y).collect();
    (idx, y)
}
