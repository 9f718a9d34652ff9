//! Binary-outcome mechanisms with log-linear conditional means.
//!
//! Covariates are five independent `U(0, 1)` variables. Trial membership is
//! logistic in the covariates (and in an unmeasured `U ~ U(0, 1)` for cases 1
//! and 3), trial treatment is randomized with probability `q`, and nobody in
//! the target sample is treated. Potential outcomes are Bernoulli with
//!
//! | case | `log P(Y⁰ = 1 | X, U, S)`          |
//! |------|------------------------------------|
//! | 1    | `m(X) + U g1(X)`                   |
//! | 2    | `m(X) + S g(X)`                    |
//! | 3    | `m(X) + U g1(X) + S g(X)`          |
//!
//! and `log P(Y¹ = 1 | ...) = log P(Y⁰ = 1 | ...) + r(X)`. Probabilities
//! above one are clipped and counted.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::data::{Dataset, Observation, Scenario};
use crate::error::{Error, Result};
use crate::math::{expit, gauss_legendre, logit, simpson, unit_cube_integral};
use crate::nuisance::{nuisance_fn, Nuisance, NuisanceModel, NuisanceSpec};
use crate::crossfit::{predict_in_sample, NuisancePredictions};

pub const COVARIATES: usize = 5;

/// Simpson intervals for the membership expectation.
const INDEX_INTERVALS: usize = 2048;
/// Gauss–Legendre nodes for integrating out `U` inside oracle nuisances.
const U_NODES: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DgmCase {
    One,
    Two,
    Three,
}

impl DgmCase {
    pub fn number(self) -> u8 {
        match self {
            DgmCase::One => 1,
            DgmCase::Two => 2,
            DgmCase::Three => 3,
        }
    }

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(DgmCase::One),
            2 => Ok(DgmCase::Two),
            3 => Ok(DgmCase::Three),
            _ => Err(Error::Parameter(format!("unknown mechanism case {n}"))),
        }
    }

    fn has_u(self) -> bool {
        self != DgmCase::Two
    }

    fn has_source_shift(self) -> bool {
        self != DgmCase::One
    }
}

/// Coefficient vectors are over `(1, X1, ..., X5)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DgmConfig {
    pub case: DgmCase,
    pub m: [f64; 6],
    pub g: [f64; 6],
    pub r: [f64; 6],
    /// Coefficients of `g1`, the multiplier of `U` (cases 1 and 3).
    pub gamma1: [f64; 6],
    pub lambda_slopes: [f64; COVARIATES],
    /// Membership slope on `U` (cases 1 and 3).
    pub lambda_u: f64,
    /// Membership intercept; solved from `n1 / (n1 + n0)` when `None`.
    pub lambda0: Option<f64>,
    pub n1: usize,
    pub n0: usize,
    /// Trial treatment probability.
    pub q: f64,
}

impl Default for DgmConfig {
    fn default() -> Self {
        let ln105 = libm::log(1.05);
        DgmConfig {
            case: DgmCase::Two,
            m: [-0.5, -0.4, -0.4, -0.4, -0.4, -0.4],
            g: [0.0, 0.4, 0.5, -0.5, -0.6, 0.6],
            r: [0.0, 0.5, -0.1, 0.3, 0.2, -0.3],
            gamma1: [-0.3, 0.1, 0.0, 0.1, 0.0, 0.1],
            lambda_slopes: [ln105; COVARIATES],
            lambda_u: 0.5,
            lambda0: None,
            n1: 1000,
            n0: 5000,
            q: 0.5,
        }
    }
}

fn affine(coef: &[f64; 6], x: &[f64]) -> f64 {
    coef[0] + coef[1..].iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
}

impl DgmConfig {
    pub fn total(&self) -> usize {
        self.n1 + self.n0
    }

    pub fn trial_fraction(&self) -> f64 {
        self.n1 as f64 / self.total() as f64
    }

    /// Membership slopes, with the `U` slope appended when `U` is present.
    pub fn membership_slopes(&self) -> Vec<f64> {
        let mut s = self.lambda_slopes.to_vec();
        if self.case.has_u() {
            s.push(self.lambda_u);
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n0 == 0 {
            return Err(Error::Parameter(format!("n1 and n0 must both be positive")));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::Parameter(format!("trial treatment probability must lie in (0, 1), got {}", self.q)));
        }
        let finite = self.m.iter().chain(&self.g).chain(&self.r).chain(&self.gamma1).chain(&self.lambda_slopes);
        if finite.copied().chain([self.lambda_u]).any(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!("mechanism coefficients must be finite")));
        }
        Ok(())
    }

    /// Returns a copy with `lambda0` solved if it was unset.
    pub fn resolved(&self) -> Result<DgmConfig> {
        self.validate()?;
        let mut c = *self;
        if c.lambda0.is_none() {
            c.lambda0 = Some(solve_lambda0(&c.membership_slopes(), c.trial_fraction(), 1e-12)?);
        }
        Ok(c)
    }

    fn lambda0_or_err(&self) -> Result<f64> {
        self.lambda0.ok_or_else(|| Error::Parameter(format!("membership intercept has not been solved")))
    }

    /// `P(S = 1 | x, u)`.
    pub fn membership(&self, lambda0: f64, x: &[f64], u: f64) -> f64 {
        let mut eta = lambda0 + self.lambda_slopes.iter().zip(x).map(|(c, v)| c * v).sum::<f64>();
        if self.case.has_u() {
            eta += self.lambda_u * u;
        }
        expit(eta)
    }

    /// Unclipped `log P(Y^a = 1 | x, u, s)`.
    pub fn log_mean(&self, x: &[f64], u: f64, s: bool, a: bool) -> f64 {
        let mut v = affine(&self.m, x);
        if self.case.has_u() {
            v += u * affine(&self.gamma1, x);
        }
        if s && self.case.has_source_shift() {
            v += affine(&self.g, x);
        }
        if a {
            v += affine(&self.r, x);
        }
        v
    }

    /// Clipped success probability and whether clipping happened.
    pub fn mean(&self, x: &[f64], u: f64, s: bool, a: bool) -> (f64, bool) {
        let p = libm::exp(self.log_mean(x, u, s, a));
        if p > 1.0 {
            (1.0, true)
        } else {
            (p, false)
        }
    }

    /// `E[Y^a | x, S = s]`, integrating `U` against its conditional law.
    pub fn conditional_mean(&self, lambda0: f64, x: &[f64], s: bool, a: bool) -> f64 {
        if !self.case.has_u() {
            return self.mean(x, 0.0, s, a).0;
        }
        let (nodes, weights) = gauss_legendre(U_NODES, 0.0, 1.0);
        let mut num = 0.0;
        let mut den = 0.0;
        for (u, w) in nodes.iter().zip(&weights) {
            let t = self.membership(lambda0, x, *u);
            let ps = if s { t } else { 1.0 - t };
            num += w * ps * self.mean(x, *u, s, a).0;
            den += w * ps;
        }
        num / den
    }

    /// `P(S = 0 | x) / P(S = 1 | x)`.
    pub fn odds_target(&self, lambda0: f64, x: &[f64]) -> f64 {
        if !self.case.has_u() {
            let eta = lambda0 + self.lambda_slopes.iter().zip(x).map(|(c, v)| c * v).sum::<f64>();
            return libm::exp(-eta);
        }
        let (nodes, weights) = gauss_legendre(U_NODES, 0.0, 1.0);
        let t: f64 = nodes.iter().zip(&weights).map(|(u, w)| w * self.membership(lambda0, x, *u)).sum();
        (1.0 - t) / t
    }

    /// True nuisance functions for the scenario-1 estimators.
    pub fn oracle_spec(&self) -> Result<NuisanceSpec> {
        let lambda0 = self.lambda0_or_err()?;
        let c = *self;
        let mu = move |s: bool, a: bool| NuisanceModel::Oracle(nuisance_fn(move |x| c.conditional_mean(lambda0, x, s, a)));
        Ok(NuisanceSpec::new()
            .with(Nuisance::Mu11, mu(true, true))
            .with(Nuisance::Mu10, mu(true, false))
            .with(Nuisance::Mu00, mu(false, false))
            .with(Nuisance::Q, NuisanceModel::Known(self.q))
            .with(Nuisance::Tau, NuisanceModel::Oracle(nuisance_fn(move |x| c.odds_target(lambda0, x)))))
    }

    /// Oracle nuisance values at every unit of `data`, with the full-sample `kappa`.
    pub fn oracle_predictions(&self, data: &Dataset) -> Result<NuisancePredictions> {
        predict_in_sample(data, &self.oracle_spec()?, Scenario::One)
    }
}

/// Index `shift + Σ c_j U_j` with all `c_j > 0`.
struct IndexLaw {
    shift: f64,
    scales: Vec<f64>,
}

impl IndexLaw {
    fn new(slopes: &[f64]) -> Self {
        let mut shift = 0.0;
        let mut scales = Vec::new();
        for &c in slopes {
            if c < 0.0 {
                // cU = c + |c|(1 - U)
                shift += c;
                scales.push(-c);
            } else if c > 0.0 {
                scales.push(c);
            }
        }
        IndexLaw { shift, scales }
    }

    fn span(&self) -> f64 {
        self.scales.iter().sum()
    }

    /// Density of `Σ c_j U_j` at `t` by inclusion–exclusion.
    fn density(&self, t: f64) -> f64 {
        let d = self.scales.len();
        let mut norm = 1.0;
        for (k, c) in self.scales.iter().enumerate() {
            norm *= c * if k == 0 { 1.0 } else { k as f64 };
        }
        let mut total = 0.0;
        for subset in 0u32..(1 << d) {
            let mut offset = 0.0;
            for (j, c) in self.scales.iter().enumerate() {
                if subset & (1 << j) != 0 {
                    offset += c;
                }
            }
            let z = t - offset;
            if z > 0.0 {
                let sign = if subset.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                total += sign * libm::pow(z, (d - 1) as f64);
            }
        }
        (total / norm).max(0.0)
    }

    fn expected_expit(&self, lambda0: f64) -> f64 {
        let base = lambda0 + self.shift;
        match self.scales.len() {
            0 => expit(base),
            1 => {
                let c = self.scales[0];
                simpson(|u| expit(base + c * u), 0.0, 1.0, INDEX_INTERVALS)
            }
            _ => simpson(|t| expit(base + t) * self.density(t), 0.0, self.span(), INDEX_INTERVALS),
        }
    }
}

/// Intercept `λ0` with `E[expit(λ0 + Σ slopes_j U_j)] = target_fraction`,
/// where the `U_j` are independent `U(0, 1)`. Bisection stops once the
/// expectation is within `tol` of the target and the bracket is tight.
pub fn solve_lambda0(slopes: &[f64], target_fraction: f64, tol: f64) -> Result<f64> {
    if !(target_fraction > 0.0 && target_fraction < 1.0) {
        return Err(Error::Parameter(format!("target fraction must lie in (0, 1), got {target_fraction}")));
    }
    if slopes.iter().any(|c| !c.is_finite()) {
        return Err(Error::Parameter(format!("membership slopes must be finite")));
    }
    let law = IndexLaw::new(slopes);
    if law.scales.is_empty() {
        return Ok(logit(target_fraction) - law.shift);
    }
    let f = |l: f64| law.expected_expit(l) - target_fraction;
    let (mut lo, mut hi) = (-1.0, 1.0);
    while f(lo) > 0.0 || f(hi) < 0.0 {
        if lo <= -50.0 && hi >= 50.0 {
            return Err(Error::RootNotFound(format!("no membership intercept in [-50, 50] reaches {target_fraction}")));
        }
        lo = (lo * 2.0).max(-50.0);
        hi = (hi * 2.0).min(50.0);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = f(mid);
        if v == 0.0 {
            return Ok(mid);
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 && v.abs() <= tol.max(1e-15) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One simulated sample together with its potential outcomes.
#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub dataset: Dataset,
    pub y1: Vec<f64>,
    pub y0: Vec<f64>,
    /// Units whose success probability had to be clipped to one.
    pub clip_count: usize,
}

impl SimulatedData {
    /// Mean of `Y¹` over target units.
    pub fn target_mean_y1(&self) -> f64 {
        let rows = self.dataset.rows();
        let (sum, n) = rows
            .iter()
            .zip(&self.y1)
            .filter(|(r, _)| !r.s)
            .fold((0.0, 0usize), |(s, n), (_, y)| (s + y, n + 1));
        sum / n as f64
    }
}

/// Draws `n1 + n0` units; the realized trial size is random with mean `n1`.
pub fn generate_dataset<R: Rng + ?Sized>(config: &DgmConfig, rng: &mut R) -> Result<SimulatedData> {
    let config = config.resolved()?;
    let lambda0 = config.lambda0_or_err()?;
    let n = config.total();
    let mut rows = Vec::with_capacity(n);
    let mut y1s = Vec::with_capacity(n);
    let mut y0s = Vec::with_capacity(n);
    let mut clip_count = 0;
    for _ in 0..n {
        let x: Vec<f64> = (0..COVARIATES).map(|_| rng.random::<f64>()).collect();
        let u = if config.case.has_u() { rng.random::<f64>() } else { 0.0 };
        let s = rng.random::<f64>() < config.membership(lambda0, &x, u);
        let a = rng.random::<f64>() < config.q && s;
        let (p0, c0) = config.mean(&x, u, s, false);
        let (p1, c1) = config.mean(&x, u, s, true);
        clip_count += (c0 || c1) as usize;
        let y0 = (rng.random::<f64>() < p0) as u8 as f64;
        let y1 = (rng.random::<f64>() < p1) as u8 as f64;
        rows.push(Observation::new(if a { y1 } else { y0 }, s, a, x));
        y1s.push(y1);
        y0s.push(y0);
    }
    Ok(SimulatedData { dataset: Dataset::new(rows)?, y1: y1s, y0: y0s, clip_count })
}

/// Monte-Carlo truth: the average over `reps` simulated samples of the
/// target-sample mean of `Y¹`, with its Monte-Carlo standard error.
pub fn compute_truth<R: Rng + ?Sized>(config: &DgmConfig, reps: usize, rng: &mut R) -> Result<(f64, f64)> {
    if reps == 0 {
        return Err(Error::Parameter(format!("truth needs at least one replication")));
    }
    let config = config.resolved()?;
    let means = (0..reps)
        .map(|_| generate_dataset(&config, rng).map(|d| d.target_mean_y1()))
        .collect::<Result<Vec<f64>>>()?;
    let n = reps as f64;
    let mean = means.iter().sum::<f64>() / n;
    let var = if reps > 1 { means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Ok((mean, libm::sqrt(var / n)))
}

/// `(E[Y¹ | S = 0], E[Y⁰ | S = 0])` by tensor Gauss–Legendre quadrature
/// over the covariates (and `U`).
pub fn exact_truth(config: &DgmConfig) -> Result<(f64, f64)> {
    let config = config.resolved()?;
    let lambda0 = config.lambda0_or_err()?;
    let (dim, nodes) = if config.case.has_u() { (COVARIATES + 1, 7) } else { (COVARIATES, 9) };
    let split = |v: &[f64]| -> (Vec<f64>, f64) {
        let u = if config.case.has_u() { v[COVARIATES] } else { 0.0 };
        (v[..COVARIATES].to_vec(), u)
    };
    let mass = unit_cube_integral(dim, nodes, |v| {
        let (x, u) = split(v);
        1.0 - config.membership(lambda0, &x, u)
    });
    let moment = |a: bool| {
        unit_cube_integral(dim, nodes, |v| {
            let (x, u) = split(v);
            config.mean(&x, u, false, a).0 * (1.0 - config.membership(lambda0, &x, u))
        })
    };
    Ok((moment(true) / mass, moment(false) / mass))
}
