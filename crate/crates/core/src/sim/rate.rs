//! Gaussian-outcome mechanism for studying nuisance convergence rates.
//!
//! `X1 ~ Bernoulli(0.5)`, `X2 ~ U(0, 1)`, `P(S = 1 | X) = t(X)`, trial
//! treatment `P(A = 1 | X, S = 1) = q(X)`, no treatment in the target, and
//! `Y ~ N(m(X, S, A), 1)`. Nuisances are the true functions shifted by one
//! random `ε ~ N(n^-r, n^-2r)` each, scaled by `h`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::metrics::{summarize, MetricsRow, Replicate};
use super::replication_rng;
use crate::crossfit::predict_in_sample;
use crate::data::{Dataset, Observation, Scenario};
use crate::error::{Error, Result};
use crate::estimators::{bias_terms, estimate_scenario1, Method};
use crate::inference::wald_inference;
use crate::math::{expit, gauss_legendre};
use crate::nuisance::{make_perturbed_oracle, nuisance_fn, Nuisance, NuisanceFn, NuisanceModel, NuisanceSpec, PerturbKind};

pub const DEFAULT_H: f64 = 2.2;

/// `P(S = 1 | x)`
pub fn membership(x: &[f64]) -> f64 {
    expit(-0.2 + 0.5 * x[0] + 1.2 * x[1])
}

/// `P(A = 1 | x, S = 1)`
pub fn trial_propensity(x: &[f64]) -> f64 {
    expit(0.3 + 0.9 * x[0] - 0.8 * x[1])
}

/// `E[Y | x, S = s, A = a]`
pub fn outcome_mean(x: &[f64], s: bool, a: bool) -> f64 {
    let scale = if s { 1.0 } else { 0.75 };
    let treated = if a { 1.2 - 0.6 * x[0] } else { 0.0 };
    scale * (5.2 + x[0] - 1.2 * x[1] + treated)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateDgmConfig {
    /// Total sample size.
    pub n: usize,
    /// Nuisance error exponent in `(0, 0.5]`.
    pub r: f64,
    /// Noise scale.
    pub h: f64,
}

impl RateDgmConfig {
    pub fn new(n: usize, r: f64, h: f64) -> Self {
        RateDgmConfig { n, r, h }
    }

    /// `r ∈ {0.10, 0.15, ..., 0.50}`
    pub fn default_rates() -> Vec<f64> {
        (0..9).map(|k| (10 + 5 * k) as f64 / 100.0).collect()
    }

    pub fn default_sizes() -> Vec<usize> {
        alloc::vec![1000, 2000, 5000]
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Parameter(format!("rate experiment needs n >= 2, got {}", self.n)));
        }
        if !(self.r > 0.0 && self.r <= 0.5) {
            return Err(Error::Parameter(format!("rate exponent r must lie in (0, 0.5], got {}", self.r)));
        }
        if !(self.h >= 0.0 && self.h.is_finite()) {
            return Err(Error::Parameter(format!("noise scale h must be nonnegative, got {}", self.h)));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        format!("r={:.2}", self.r)
    }
}

/// Draws `n` units.
pub fn generate<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Dataset> {
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let x1 = (rng.random::<f64>() < 0.5) as u8 as f64;
        let x2 = rng.random::<f64>();
        let x = alloc::vec![x1, x2];
        let s = rng.random::<f64>() < membership(&x);
        let a = rng.random::<f64>() < trial_propensity(&x) && s;
        let z: f64 = StandardNormal.sample(rng);
        rows.push(Observation::new(outcome_mean(&x, s, a) + z, s, a, x));
    }
    Dataset::new(rows)
}

/// `E[Y¹ | S = 0]` by Gauss–Legendre quadrature over `X2`, mixed over `X1`.
pub fn truth() -> f64 {
    let (nodes, weights) = gauss_legendre(40, 0.0, 1.0);
    let mut num = 0.0;
    let mut den = 0.0;
    for x1 in [0.0, 1.0] {
        for (x2, w) in nodes.iter().zip(&weights) {
            let x = [x1, *x2];
            let target = 1.0 - membership(&x);
            num += 0.5 * w * target * outcome_mean(&x, false, true);
            den += 0.5 * w * target;
        }
    }
    num / den
}

fn oracle_functions() -> [(Nuisance, NuisanceFn, PerturbKind); 5] {
    [
        (Nuisance::Tau, nuisance_fn(|x| (1.0 - membership(x)) / membership(x)), PerturbKind::Odds),
        (Nuisance::Q, nuisance_fn(trial_propensity), PerturbKind::Probability),
        (Nuisance::Mu00, nuisance_fn(|x| outcome_mean(x, false, false)), PerturbKind::Mean),
        (Nuisance::Mu10, nuisance_fn(|x| outcome_mean(x, true, false)), PerturbKind::Mean),
        (Nuisance::Mu11, nuisance_fn(|x| outcome_mean(x, true, true)), PerturbKind::Mean),
    ]
}

pub fn oracle_spec() -> NuisanceSpec {
    oracle_functions()
        .into_iter()
        .fold(NuisanceSpec::new(), |spec, (n, f, _)| spec.with(n, NuisanceModel::Oracle(f)))
}

/// Perturbed nuisances; one `ε` per function, drawn in a fixed order.
pub fn perturbed_spec<R: Rng + ?Sized>(config: &RateDgmConfig, rng: &mut R) -> Result<NuisanceSpec> {
    let mut spec = NuisanceSpec::new();
    for (n, f, kind) in oracle_functions() {
        let g = make_perturbed_oracle(f, kind, config.h, config.r, config.n, rng)?;
        spec.set(n, NuisanceModel::Perturbed(g));
    }
    Ok(spec)
}

pub const RATE_ESTIMATORS: [Method; 2] = [Method::If, Method::PlugIn];

#[derive(Debug, Clone)]
pub struct PreparedRateCell {
    pub config: RateDgmConfig,
    pub truth: f64,
}

impl PreparedRateCell {
    pub fn new(config: RateDgmConfig) -> Result<Self> {
        config.validate()?;
        Ok(PreparedRateCell { config, truth: truth() })
    }

    /// Influence-function and plug-in estimates on one replication, both
    /// using a single full-sample `kappa`.
    pub fn run_replication(&self, base_seed: u64, cell_index: u64, rep: u64) -> Result<Vec<Replicate>> {
        let mut rng = replication_rng(base_seed, cell_index, rep);
        let data = generate(self.config.n, &mut rng)?;
        let spec = perturbed_spec(&self.config, &mut rng)?;
        let preds = predict_in_sample(&data, &spec, Scenario::One)?;
        let oracle = predict_in_sample(&data, &oracle_spec(), Scenario::One)?;
        let r1n = bias_terms(&preds, &oracle).r1n;
        RATE_ESTIMATORS
            .iter()
            .map(|&m| {
                let (est, ifs) = estimate_scenario1(&data, &preds, m)?;
                let covered = match ifs {
                    Some(ifs) => Some(wald_inference(&est, &ifs, 0.95)?.ci_alpha.contains(self.truth)),
                    None => None,
                };
                Ok(Replicate { estimate: est.alpha, covered, r1n, n1: data.n1(), n0: data.n0(), clip_count: 0 })
            })
            .collect()
    }

    pub fn summarize(&self, outcomes: &[Vec<Replicate>]) -> Vec<MetricsRow> {
        RATE_ESTIMATORS
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let reps: Vec<Replicate> = outcomes.iter().map(|o| o[k]).collect();
                summarize(m.name(), &self.config.label(), self.truth, (0, 0), true, self.config.n as f64, &reps)
            })
            .collect()
    }
}
