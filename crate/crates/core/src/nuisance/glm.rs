//! Generalized linear model fitting by iteratively reweighted least squares.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{cholesky, cholesky_condition_estimate, cholesky_solve, dot, expit, Matrix};

/// Maximum-norm tolerance on the score at convergence.
pub const GRADIENT_TOLERANCE: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 100;
const RIDGE_JITTER: f64 = 1e-10;
const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Logistic,
    Linear,
}

impl Family {
    /// Logistic for 0/1 responses, linear otherwise.
    pub fn default_for(response: &[f64]) -> Family {
        if response.iter().all(|&y| y == 0.0 || y == 1.0) {
            Family::Logistic
        } else {
            Family::Linear
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmFit {
    pub coefficients: Vec<f64>,
    pub family: Family,
    /// Whether `coefficients[0]` multiplies an implicit leading 1.
    pub intercept: bool,
    pub converged: bool,
    pub iterations: usize,
    pub final_gradient_norm: f64,
    pub tolerance: f64,
}

impl GlmFit {
    pub fn linear_predictor(&self, covariates: &[f64]) -> Result<f64> {
        let expected = self.coefficients.len() - self.intercept as usize;
        if covariates.len() != expected {
            return Err(Error::Dimension { expected, got: covariates.len() });
        }
        let (offset, slopes) = if self.intercept {
            (self.coefficients[0], &self.coefficients[1..])
        } else {
            (0.0, &self.coefficients[..])
        };
        Ok(offset + dot(slopes, covariates))
    }
}

/// Mean-scale prediction: `expit` of the linear predictor for the logistic
/// family, the linear predictor itself otherwise.
pub fn predict(fit: &GlmFit, covariates: &[f64]) -> Result<f64> {
    let eta = fit.linear_predictor(covariates)?;
    Ok(match fit.family {
        Family::Logistic => expit(eta),
        Family::Linear => eta,
    })
}

/// Fits a GLM to an explicit design matrix (no implicit intercept column).
pub fn fit_glm(design: &Matrix, response: &[f64], family: Family) -> Result<GlmFit> {
    let n = design.rows();
    let p = design.cols();
    if response.len() != n {
        return Err(Error::Dimension { expected: n, got: response.len() });
    }
    if p == 0 {
        return Err(Error::Parameter(format!("design has no regressors")));
    }
    if n < p {
        return Err(Error::Parameter(format!("{n} rows cannot identify {p} coefficients")));
    }
    match family {
        Family::Linear => fit_linear(design, response),
        Family::Logistic => {
            if let Some(bad) = response.iter().find(|&&y| y != 0.0 && y != 1.0) {
                return Err(Error::Parameter(format!("logistic response must be 0/1, found {bad}")));
            }
            fit_logistic(design, response)
        }
    }
}

fn gram(design: &Matrix, weights: Option<&[f64]>) -> Matrix {
    let p = design.cols();
    let mut g = Matrix::zeros(p, p);
    for i in 0..design.rows() {
        let z = design.row(i);
        let w = weights.map_or(1.0, |w| w[i]);
        for a in 0..p {
            let wa = w * z[a];
            for b in 0..=a {
                g.set(a, b, g.get(a, b) + wa * z[b]);
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            g.set(b, a, g.get(a, b));
        }
    }
    g
}

/// Cholesky factor of the Gram matrix with the ridge-jitter rule applied.
fn factor(mut g: Matrix) -> Result<Matrix> {
    // a regressor that vanishes on every row carries no information at all
    if (0..g.rows()).any(|a| !(g.get(a, a) > 0.0)) {
        return Err(Error::Singular);
    }
    match cholesky(&g) {
        Some(l) if cholesky_condition_estimate(&l) <= CONDITION_LIMIT => Ok(l),
        _ => {
            for a in 0..g.rows() {
                g.set(a, a, g.get(a, a) + RIDGE_JITTER);
            }
            cholesky(&g).ok_or(Error::Singular)
        }
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn fit_linear(design: &Matrix, response: &[f64]) -> Result<GlmFit> {
    let p = design.cols();
    let g0 = gram(design, None);
    let ss = g0.get(0, 0);
    let l = factor(g0)?;
    let mut xty = vec![0.0; p];
    for i in 0..design.rows() {
        for (acc, z) in xty.iter_mut().zip(design.row(i)) {
            *acc += z * response[i];
        }
    }
    // one regressor has a closed form; for an intercept it is the sample mean
    let mut beta = if p == 1 { vec![xty[0] / ss] } else { cholesky_solve(&l, &xty) };
    let score = |beta: &[f64]| {
        let mut g = vec![0.0; p];
        for i in 0..design.rows() {
            let r = response[i] - dot(design.row(i), beta);
            for (acc, z) in g.iter_mut().zip(design.row(i)) {
                *acc += z * r;
            }
        }
        g
    };
    // a couple of refinement sweeps absorb cancellation in the normal equations
    let tolerance = GRADIENT_TOLERANCE * max_abs(&xty).max(1.0);
    let mut g = score(&beta);
    let mut iterations = 1;
    while p > 1 && max_abs(&g) > tolerance && iterations < 4 {
        let delta = cholesky_solve(&l, &g);
        for (b, d) in beta.iter_mut().zip(&delta) {
            *b += d;
        }
        g = score(&beta);
        iterations += 1;
    }
    let final_gradient_norm = max_abs(&g);
    Ok(GlmFit {
        coefficients: beta,
        family: Family::Linear,
        intercept: false,
        converged: final_gradient_norm <= tolerance,
        iterations,
        final_gradient_norm,
        tolerance,
    })
}

fn log_likelihood(design: &Matrix, response: &[f64], beta: &[f64]) -> f64 {
    (0..design.rows())
        .map(|i| {
            let eta = dot(design.row(i), beta);
            // y·η − log(1 + e^η), written to avoid overflow
            let log1pexp = if eta > 0.0 { eta + libm::log1p(libm::exp(-eta)) } else { libm::log1p(libm::exp(eta)) };
            response[i] * eta - log1pexp
        })
        .sum()
}

fn fit_logistic(design: &Matrix, response: &[f64]) -> Result<GlmFit> {
    let n = design.rows();
    let p = design.cols();
    let mut beta = vec![0.0; p];
    let mut ll = log_likelihood(design, response, &beta);
    let mut weights = vec![0.0; n];
    let mut gradient = vec![0.0; p];
    let mut iterations = 0;

    loop {
        gradient.iter_mut().for_each(|g| *g = 0.0);
        for i in 0..n {
            let z = design.row(i);
            let mu = expit(dot(z, &beta));
            weights[i] = mu * (1.0 - mu);
            let r = response[i] - mu;
            for (g, zj) in gradient.iter_mut().zip(z) {
                *g += zj * r;
            }
        }
        let grad_norm = max_abs(&gradient);
        if grad_norm <= GRADIENT_TOLERANCE || iterations >= MAX_ITERATIONS {
            return Ok(GlmFit {
                coefficients: beta,
                family: Family::Logistic,
                intercept: false,
                converged: grad_norm <= GRADIENT_TOLERANCE,
                iterations,
                final_gradient_norm: grad_norm,
                tolerance: GRADIENT_TOLERANCE,
            });
        }
        iterations += 1;

        let l = factor(gram(design, Some(&weights)))?;
        let step = cholesky_solve(&l, &gradient);
        // step halving until the likelihood does not decrease
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let candidate: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            let cand_ll = log_likelihood(design, response, &candidate);
            if cand_ll.is_finite() && cand_ll >= ll - 1e-12 * ll.abs().max(1.0) {
                beta = candidate;
                ll = cand_ll;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            // no ascent direction left at machine precision; report the current point
            let grad_norm = max_abs(&gradient);
            return Ok(GlmFit {
                coefficients: beta,
                family: Family::Logistic,
                intercept: false,
                converged: grad_norm <= GRADIENT_TOLERANCE,
                iterations,
                final_gradient_norm: grad_norm,
                tolerance: GRADIENT_TOLERANCE,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(values: &[f64]) -> Matrix {
        let rows: Vec<[f64; 1]> = values.iter().map(|&v| [v]).collect();
        Matrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn intercept_only_balanced() {
        let fit = fit_glm(&column(&[1.0; 4]), &[1.0, 0.0, 1.0, 0.0], Family::Logistic).unwrap();
        assert!(fit.converged);
        assert!(fit.coefficients[0].abs() < 1e-12);
        assert!((predict(&fit, &[1.0]).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn intercept_only_three_quarters() {
        let fit = fit_glm(&column(&[1.0; 4]), &[1.0, 1.0, 1.0, 0.0], Family::Logistic).unwrap();
        assert!((fit.coefficients[0] - libm::log(3.0)).abs() < 1e-10);
    }

    #[test]
    fn predict_examples() {
        let flat = GlmFit {
            coefficients: vec![0.0],
            family: Family::Logistic,
            intercept: false,
            converged: true,
            iterations: 0,
            final_gradient_norm: 0.0,
            tolerance: GRADIENT_TOLERANCE,
        };
        assert_eq!(predict(&flat, &[123.0]).unwrap(), 0.5);
        let with_intercept = GlmFit { coefficients: vec![0.0, 1.0], intercept: true, ..flat.clone() };
        assert_eq!(predict(&with_intercept, &[0.0]).unwrap(), 0.5);
        let linear = GlmFit { coefficients: vec![1.0, 2.0], intercept: true, family: Family::Linear, ..flat };
        assert_eq!(predict(&linear, &[3.0]).unwrap(), 7.0);
        assert!(matches!(predict(&linear, &[3.0, 1.0]), Err(Error::Dimension { expected: 1, got: 2 })));
    }

    #[test]
    fn linear_least_squares() {
        let design = Matrix::from_rows(&[[1.0, 0.0], [1.0, 1.0], [1.0, 2.0], [1.0, 3.0]]).unwrap();
        let fit = fit_glm(&design, &[1.0, 3.1, 4.9, 7.0], Family::Linear).unwrap();
        assert!(fit.converged);
        assert!((fit.coefficients[0] - 1.03).abs() < 1e-12);
        assert!((fit.coefficients[1] - 1.98).abs() < 1e-12);
    }

    #[test]
    fn separated_data_pushes_probabilities_to_bounds() {
        let design = Matrix::from_rows(&[[1.0, -2.0], [1.0, -1.0], [1.0, 1.0], [1.0, 2.0]]).unwrap();
        let fit = fit_glm(&design, &[0.0, 0.0, 1.0, 1.0], Family::Logistic).unwrap();
        assert!(fit.coefficients[1] > 10.0);
        let fit = GlmFit { intercept: true, ..fit };
        assert!(predict(&fit, &[-1.0]).unwrap() < 1e-6);
        assert!(predict(&fit, &[1.0]).unwrap() > 1.0 - 1e-6);
    }

    #[test]
    fn collinear_design_is_singular_or_jittered() {
        let design = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]).unwrap();
        // the ridge jitter makes the exact-collinear Gram matrix factorable
        let fit = fit_glm(&design, &[1.0, 2.0, 3.0], Family::Linear).unwrap();
        assert!((fit.coefficients[0] + fit.coefficients[1] - 2.0).abs() < 1e-6);
        let zero = Matrix::from_rows(&[[0.0], [0.0]]).unwrap();
        assert_eq!(fit_glm(&zero, &[1.0, 2.0], Family::Linear), Err(Error::Singular));
    }

    #[test]
    fn logistic_rejects_non_binary_response() {
        assert!(matches!(fit_glm(&column(&[1.0, 1.0]), &[0.0, 0.5], Family::Logistic), Err(Error::Parameter(_))));
    }
}
