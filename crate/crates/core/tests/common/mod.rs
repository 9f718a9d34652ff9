#![allow(dead_code)]

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use transport_core::math::expit;
use transport_core::{Dataset, Observation, Scenario};

/// Synthetic two-covariate data with continuous outcomes.
///
/// Target units are all controls in scenario 1, both arms otherwise; every
/// target row carries one `w` in scenario 3.
pub fn synthetic(n: usize, scenario: Scenario, seed: u64) -> Dataset {
    let mut rng = SmallRng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let x = vec![rng.random::<f64>(), rng.random::<f64>()];
        // alternate sources so tiny samples still populate every stratum
        let s = if i < 8 { i % 2 == 0 } else { rng.random::<f64>() < expit(0.3 + 0.5 * x[0] - 0.4 * x[1]) };
        let w = rng.random::<f64>();
        let a = if s {
            if i < 8 { i % 4 == 0 } else { rng.random::<f64>() < 0.5 }
        } else if scenario == Scenario::One {
            false
        } else if i < 8 {
            i % 4 == 1
        } else {
            rng.random::<f64>() < expit(-0.2 + 0.6 * x[0] + 0.5 * w)
        };
        let base = 3.0 + x[0] - 0.5 * x[1] + if s { 0.3 * x[1] } else { 0.4 * w };
        let y = base * if a { 1.2 + 0.2 * x[0] } else { 1.0 } + 0.3 * (rng.random::<f64>() - 0.5);
        let mut obs = Observation::new(y, s, a, x);
        if scenario == Scenario::Three && !s {
            obs = obs.with_w(vec![w]);
        }
        rows.push(obs);
    }
    Dataset::new(rows).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
