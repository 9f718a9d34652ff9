//! Stratified sample splitting and cross-fitted nuisance predictions.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, Scenario};
use crate::error::{Error, Result};
use crate::nuisance::{fit_bundle, Nuisance, NuisanceBundle, NuisanceSpec, MAX_TRIM_FRACTION};

/// Assignment of every unit to one of `k` folds (labels `0..k`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldScheme {
    k: usize,
    assignment: Vec<usize>,
    seed: u64,
}

impl FoldScheme {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn fold_of(&self, unit: usize) -> usize {
        self.assignment[unit]
    }

    pub fn members(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == fold).collect()
    }

    pub fn complement(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] != fold).collect()
    }
}

/// Shuffles each `(s, a)` stratum with a generator seeded from `seed` and
/// deals its units round-robin to `k` folds.
pub fn make_folds(data: &Dataset, k: usize, seed: u64) -> Result<FoldScheme> {
    if k < 2 {
        return Err(Error::Parameter(format!("fold count must be at least 2, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![usize::MAX; data.len()];
    let mut next = 0usize;
    for (cell, mut units) in data.strata().into_iter().enumerate() {
        if units.is_empty() {
            continue;
        }
        if units.len() < k {
            return Err(Error::FoldInfeasible { s: (cell / 2) as u8, a: (cell % 2) as u8, size: units.len(), k });
        }
        units.shuffle(&mut rng);
        for u in units {
            assignment[u] = next % k;
            next += 1;
        }
    }
    Ok(FoldScheme { k, assignment, seed })
}

/// Per-unit out-of-fold nuisance values.
#[derive(Debug, Clone, PartialEq)]
pub struct NuisancePredictions {
    values: [Option<Vec<f64>>; 10],
    kappa: Vec<f64>,
    clamped: [usize; 10],
    folds: Option<FoldScheme>,
}

impl NuisancePredictions {
    /// Empty predictions for `n` units with a common `kappa`.
    pub fn new(n: usize, kappa: f64) -> Self {
        NuisancePredictions { values: Default::default(), kappa: vec![kappa; n], clamped: [0; 10], folds: None }
    }

    pub fn with(mut self, nuisance: Nuisance, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.kappa.len(), "prediction length must match unit count");
        self.values[nuisance as usize] = Some(values);
        self
    }

    pub fn with_constant(self, nuisance: Nuisance, value: f64) -> Self {
        let n = self.kappa.len();
        self.with(nuisance, vec![value; n])
    }

    pub fn with_kappa(mut self, kappa: Vec<f64>) -> Self {
        assert_eq!(kappa.len(), self.kappa.len());
        self.kappa = kappa;
        self
    }

    pub fn len(&self) -> usize {
        self.kappa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappa.is_empty()
    }

    pub fn get(&self, nuisance: Nuisance) -> Option<&[f64]> {
        self.values[nuisance as usize].as_deref()
    }

    pub fn require(&self, nuisance: Nuisance) -> Result<&[f64]> {
        self.get(nuisance).ok_or_else(|| Error::Spec(format!("predictions for {nuisance} are required")))
    }

    /// Each unit's `kappa`, taken from the training complement of its fold.
    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    /// Number of clamped denominator predictions per nuisance.
    pub fn clamped(&self, nuisance: Nuisance) -> usize {
        self.clamped[nuisance as usize]
    }

    pub fn folds(&self) -> Option<&FoldScheme> {
        self.folds.as_ref()
    }
}

/// Evaluates `bundle` at `units`, writing into `out`.
fn evaluate_into(
    data: &Dataset,
    bundle: &NuisanceBundle,
    spec: &NuisanceSpec,
    units: &[usize],
    out: &mut NuisancePredictions,
) -> Result<()> {
    for nuisance in spec.specified() {
        let (mut clamped, mut total) = (0usize, 0usize);
        let column = out.values[nuisance as usize].get_or_insert_with(|| vec![f64::NAN; data.len()]);
        for &i in units {
            let row = &data.rows()[i];
            // w is recorded on target rows only; trial rows stay NaN
            if nuisance.uses_w() && row.w.is_none() {
                continue;
            }
            let t = bundle.evaluate(nuisance, row)?;
            column[i] = t.value;
            clamped += t.clamped as usize;
            total += 1;
        }
        if clamped as f64 > MAX_TRIM_FRACTION * total as f64 {
            return Err(Error::Positivity { nuisance: nuisance.name(), clamped, total });
        }
        out.clamped[nuisance as usize] += clamped;
    }
    for &i in units {
        out.kappa[i] = bundle.kappa();
    }
    Ok(())
}

/// For each fold, fits the bundle on the complement and predicts the fold.
pub fn crossfit_predictions(
    data: &Dataset,
    spec: &NuisanceSpec,
    folds: &FoldScheme,
    scenario: Scenario,
) -> Result<NuisancePredictions> {
    if folds.assignment.len() != data.len() {
        return Err(Error::Dimension { expected: data.len(), got: folds.assignment.len() });
    }
    let mut out = NuisancePredictions::new(data.len(), f64::NAN);
    for fold in 0..folds.k {
        let train = folds.complement(fold);
        let test = folds.members(fold);
        let bundle = fit_bundle(data, spec, &train, scenario).map_err(|e| e.in_fold(fold))?;
        evaluate_into(data, &bundle, spec, &test, &mut out).map_err(|e| e.in_fold(fold))?;
    }
    out.folds = Some(folds.clone());
    Ok(out)
}

/// Fits one bundle on every row and evaluates it in-sample (no splitting);
/// `kappa` is the full-sample value.
pub fn predict_in_sample(data: &Dataset, spec: &NuisanceSpec, scenario: Scenario) -> Result<NuisancePredictions> {
    let all: Vec<usize> = (0..data.len()).collect();
    let bundle = fit_bundle(data, spec, &all, scenario)?;
    let mut out = NuisancePredictions::new(data.len(), f64::NAN);
    evaluate_into(data, &bundle, spec, &all, &mut out)?;
    Ok(out)
}
