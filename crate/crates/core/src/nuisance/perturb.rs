//! Oracle nuisances with a controlled `O(n^-r)` error.
//!
//! One shift `ε ~ N(n^-r, n^-2r)` is drawn per function, so the L2 error of
//! the perturbed function is `h·|ε|` on the link scale.

use alloc::format;
use alloc::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::NuisanceFn;
use crate::error::{Error, Result};
use crate::math::{expit, logit};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbKind {
    /// `expit(logit(truth) + hε)`
    Probability,
    /// `truth + hε`
    Mean,
    /// Truth is an odds `(1 - t)/t`; `t` is perturbed on the logit scale,
    /// which gives `truth · exp(-hε)`.
    Odds,
}

/// Perturbs `truth` by a fixed shift `epsilon`.
pub fn perturb_with_epsilon(truth: NuisanceFn, kind: PerturbKind, h: f64, epsilon: f64) -> NuisanceFn {
    let shift = h * epsilon;
    if shift == 0.0 {
        return truth;
    }
    match kind {
        PerturbKind::Probability => Arc::new(move |x: &[f64]| expit(logit(truth(x)) + shift)),
        PerturbKind::Mean => Arc::new(move |x: &[f64]| truth(x) + shift),
        PerturbKind::Odds => {
            let factor = libm::exp(-shift);
            Arc::new(move |x: &[f64]| truth(x) * factor)
        }
    }
}

/// Draws one `ε ~ N(n^-r, n^-2r)` and perturbs `truth` with it.
pub fn make_perturbed_oracle<R: Rng + ?Sized>(
    truth: NuisanceFn,
    kind: PerturbKind,
    h: f64,
    r: f64,
    n: usize,
    rng: &mut R,
) -> Result<NuisanceFn> {
    if !(r > 0.0 && r <= 0.5) {
        return Err(Error::Parameter(format!("rate exponent r must lie in (0, 0.5], got {r}")));
    }
    if !(h >= 0.0) {
        return Err(Error::Parameter(format!("noise scale h must be nonnegative, got {h}")));
    }
    if n == 0 {
        return Err(Error::Parameter(format!("n must be positive")));
    }
    let epsilon = draw_epsilon(r, n, rng);
    Ok(perturb_with_epsilon(truth, kind, h, epsilon))
}

/// `ε ~ N(n^-r, n^-2r)`.
pub fn draw_epsilon<R: Rng + ?Sized>(r: f64, n: usize, rng: &mut R) -> f64 {
    let scale = libm::pow(n as f64, -r);
    let z: f64 = StandardNormal.sample(rng);
    scale + scale * z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nuisance::nuisance_fn;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_noise_is_identity() {
        let truth = nuisance_fn(|x| 0.2 + x[0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = make_perturbed_oracle(truth.clone(), PerturbKind::Probability, 0.0, 0.3, 100, &mut rng).unwrap();
        for x in [0.0, 0.3, 0.7] {
            assert_eq!(f(&[x]), truth(&[x]));
        }
    }

    #[test]
    fn probability_kind_shift() {
        let f = perturb_with_epsilon(nuisance_fn(|_| 0.5), PerturbKind::Probability, 1.0, 0.3);
        assert!((f(&[0.0]) - 0.574442516811659).abs() < 1e-12);
        assert!((f(&[9.0]) - expit(0.3)).abs() < 1e-15);
    }

    #[test]
    fn odds_kind_matches_perturbed_membership() {
        let t = 0.3;
        let odds = nuisance_fn(move |_| (1.0 - t) / t);
        let f = perturb_with_epsilon(odds, PerturbKind::Odds, 2.2, 0.17);
        let t_hat = expit(logit(t) + 2.2 * 0.17);
        assert!((f(&[0.0]) - (1.0 - t_hat) / t_hat).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for r in [0.0, 0.51, -1.0] {
            assert!(make_perturbed_oracle(nuisance_fn(|_| 1.0), PerturbKind::Mean, 1.0, r, 10, &mut rng).is_err());
        }
    }
}
