//! Wald intervals from the empirical second moment of influence functions.

use alloc::format;

use crate::error::{Error, Result};
use crate::estimators::{IfVectors, TargetEstimates};
use crate::math::norm_quantile;

/// Tolerance on the empirical mean of an IF vector, relative to its RMS
/// when that exceeds one.
pub const MEAN_ZERO_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRecord {
    pub estimates: TargetEstimates,
    pub se_alpha: f64,
    pub se_beta: f64,
    pub se_phi: Option<f64>,
    pub se_psi: f64,
    pub ci_alpha: Interval,
    pub ci_beta: Interval,
    pub ci_phi: Option<Interval>,
    pub ci_psi: Interval,
    pub level: f64,
    pub n: usize,
}

/// `sqrt(P_n[IF²]) / sqrt(n)` after checking that the vector is centered.
pub fn standard_error(name: &str, values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InconsistentInput(format!("{name} influence vector is empty")));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let second = values.iter().map(|v| v * v).sum::<f64>() / n;
    let rms = libm::sqrt(second);
    if !(mean.abs() <= MEAN_ZERO_TOLERANCE * rms.max(1.0)) {
        return Err(Error::InconsistentInput(format!(
            "{name} influence vector has mean {mean:e}, expected zero"
        )));
    }
    Ok(rms / libm::sqrt(n))
}

fn interval(point: f64, se: f64, z: f64) -> Interval {
    Interval { lower: point - z * se, upper: point + z * se }
}

/// Two-sided `level` Wald intervals for all four targets.
pub fn wald_inference(points: &TargetEstimates, ifs: &IfVectors, level: f64) -> Result<EstimateRecord> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Parameter(format!("confidence level must lie in (0, 1), got {level}")));
    }
    let n = ifs.alpha.len();
    for (name, v) in [("beta", &ifs.beta), ("psi", &ifs.psi)] {
        if v.len() != n {
            return Err(Error::InconsistentInput(format!("{name} influence vector has length {}, expected {n}", v.len())));
        }
    }
    let z = norm_quantile(1.0 - (1.0 - level) / 2.0);
    let se_alpha = standard_error("alpha", &ifs.alpha)?;
    let se_beta = standard_error("beta", &ifs.beta)?;
    let se_psi = standard_error("psi", &ifs.psi)?;
    let se_phi = match (points.phi, &ifs.phi) {
        (Some(_), Some(v)) => Some(standard_error("phi", v)?),
        _ => None,
    };
    Ok(EstimateRecord {
        estimates: points.clone(),
        se_alpha,
        se_beta,
        se_phi,
        se_psi,
        ci_alpha: interval(points.alpha, se_alpha, z),
        ci_beta: interval(points.beta, se_beta, z),
        ci_phi: points.phi.zip(se_phi).map(|(p, s)| interval(p, s, z)),
        ci_psi: interval(points.psi, se_psi, z),
        level,
        n,
    })
}
