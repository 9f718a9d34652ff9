//! One cell of the model-robustness experiment: a mechanism, a choice of
//! correctly and incorrectly specified nuisance models, and a list of
//! scenario-1 estimators evaluated on the same cross-fitted predictions.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;

use super::dgm::{exact_truth, generate_dataset, DgmConfig};
use super::metrics::{summarize, MetricsRow, Replicate};
use super::replication_rng;
use crate::crossfit::{crossfit_predictions, make_folds};
use crate::data::Scenario;
use crate::error::{Error, Result};
use crate::estimators::{bias_terms, estimate_scenario1, Method};
use crate::inference::wald_inference;
use crate::nuisance::{FeatureSpec, Family, Nuisance, NuisanceModel, NuisanceSpec};

/// Which scenario-1 nuisances are fitted with the reduced model (logistic on
/// `X2` alone, no intercept) instead of logistic on all covariates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrectnessConfig {
    pub name: String,
    pub misspecified: Vec<Nuisance>,
}

impl CorrectnessConfig {
    pub fn new(name: &str, misspecified: &[Nuisance]) -> Self {
        CorrectnessConfig { name: name.into(), misspecified: misspecified.to_vec() }
    }

    pub fn all_correct() -> Self {
        Self::new("all_correct", &[])
    }

    /// Outcome side (`mu11`) correct; `mu00` and `tau` misspecified.
    pub fn mu11_correct() -> Self {
        Self::new("mu11_correct", &[Nuisance::Mu00, Nuisance::Tau])
    }

    /// Weighting side (`mu00`, `tau`) correct; `mu11` misspecified.
    pub fn mu00_tau_correct() -> Self {
        Self::new("mu00_tau_correct", &[Nuisance::Mu11])
    }

    /// Both sides misspecified; `mu10` and `q` stay correct as in every
    /// standard configuration.
    pub fn all_wrong() -> Self {
        Self::new("all_wrong", &[Nuisance::Mu11, Nuisance::Mu00, Nuisance::Tau])
    }

    /// The four configurations of the model-robustness comparison.
    pub fn standard() -> Vec<Self> {
        vec![Self::all_correct(), Self::mu11_correct(), Self::mu00_tau_correct(), Self::all_wrong()]
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::standard().into_iter().find(|c| c.name == name)
    }

    /// GLM specification over the five mechanism covariates.
    pub fn spec(&self) -> NuisanceSpec {
        let mut spec = NuisanceSpec::new();
        for n in [Nuisance::Mu11, Nuisance::Mu10, Nuisance::Mu00, Nuisance::Q, Nuisance::Tau] {
            let features = if self.misspecified.contains(&n) {
                FeatureSpec::new(vec![1], false, Family::Logistic)
            } else {
                FeatureSpec::all(super::dgm::COVARIATES, Family::Logistic)
            };
            spec.set(n, NuisanceModel::Glm(features));
        }
        spec
    }
}

#[derive(Debug, Clone)]
pub struct McCell {
    pub dgm: DgmConfig,
    pub correctness: CorrectnessConfig,
    pub estimators: Vec<Method>,
    pub folds: usize,
    pub level: f64,
}

impl McCell {
    pub fn new(dgm: DgmConfig, correctness: CorrectnessConfig, estimators: Vec<Method>) -> Self {
        McCell { dgm, correctness, estimators, folds: 2, level: 0.95 }
    }

    /// Solves the membership intercept and the truth once per cell.
    pub fn prepare(&self) -> Result<PreparedCell> {
        if self.estimators.iter().any(|m| matches!(m, Method::TrialTarget)) {
            return Err(Error::Spec(format!("trial_target is not available for this mechanism")));
        }
        let dgm = self.dgm.resolved()?;
        let (truth, _) = exact_truth(&dgm)?;
        Ok(PreparedCell { cell: self.clone(), dgm, spec: self.correctness.spec(), truth })
    }
}

#[derive(Debug, Clone)]
pub struct PreparedCell {
    pub cell: McCell,
    pub dgm: DgmConfig,
    pub spec: NuisanceSpec,
    /// `E[Y¹ | S = 0]`
    pub truth: f64,
}

/// Estimates of every estimator of a cell on one replication.
pub type RepOutcome = Vec<Replicate>;

impl PreparedCell {
    pub fn run_replication(&self, base_seed: u64, cell_index: u64, rep: u64) -> Result<RepOutcome> {
        let mut rng = replication_rng(base_seed, cell_index, rep);
        let sim = generate_dataset(&self.dgm, &mut rng)?;
        let data = &sim.dataset;
        let folds = make_folds(data, self.cell.folds, rng.next_u64())?;
        let preds = crossfit_predictions(data, &self.spec, &folds, Scenario::One)?;
        let terms = bias_terms(&preds, &self.dgm.oracle_predictions(data)?);
        self.cell
            .estimators
            .iter()
            .map(|&method| {
                let (est, ifs) = estimate_scenario1(data, &preds, method)?;
                let covered = match ifs {
                    Some(ifs) => Some(wald_inference(&est, &ifs, self.cell.level)?.ci_alpha.contains(self.truth)),
                    None => None,
                };
                let r1n = if method == Method::A4Star { terms.r1n_a4star } else { terms.r1n };
                Ok(Replicate { estimate: est.alpha, covered, r1n, n1: data.n1(), n0: data.n0(), clip_count: sim.clip_count })
            })
            .collect()
    }

    /// One row per estimator; `outcomes` must be in replication order.
    pub fn summarize(&self, outcomes: &[RepOutcome]) -> Vec<MetricsRow> {
        self.cell
            .estimators
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let reps: Vec<Replicate> = outcomes.iter().map(|o| o[k]).collect();
                summarize(
                    m.name(),
                    &self.cell.correctness.name,
                    self.truth,
                    (self.dgm.n1, self.dgm.n0),
                    false,
                    self.dgm.total() as f64,
                    &reps,
                )
            })
            .collect()
    }
}
