mod common;

use common::max_abs_diff;
use proptest::prelude::*;
use transport_core::crossfit::{crossfit_predictions, make_folds, predict_in_sample, NuisancePredictions};
use transport_core::estimators::{
    estimate, estimate_scenario1, estimate_scenario2, estimate_scenario3, estimate_trial_target, influence_contributions,
    IfVectors, Method, TargetEstimates,
};
use transport_core::inference::{standard_error, wald_inference};
use transport_core::nuisance::{Nuisance, NuisanceSpec};
use transport_core::{Dataset, Observation, Scenario};

fn obs(y: f64, s: u8, a: u8) -> Observation {
    Observation::new(y, s == 1, a == 1, vec![])
}

fn fitted(data: &Dataset, scenario: Scenario, trial_target: bool, seed: u64) -> NuisancePredictions {
    let spec = NuisanceSpec::glm_default(data, scenario, trial_target);
    let folds = make_folds(data, 2, seed).unwrap();
    crossfit_predictions(data, &spec, &folds, scenario).unwrap()
}

fn check_identities(points: &TargetEstimates, ifs: &IfVectors) {
    for v in [&ifs.alpha, &ifs.beta, &ifs.psi] {
        assert!(common::mean(v).abs() <= 1e-10, "IF mean {}", common::mean(v));
    }
    let diff: Vec<f64> = ifs.alpha.iter().zip(&ifs.beta).map(|(a, b)| a - b).collect();
    assert!(max_abs_diff(&ifs.psi, &diff) <= 1e-12);
    let phi = points.phi.unwrap();
    let ratio: Vec<f64> = ifs.alpha.iter().zip(&ifs.beta).map(|(a, b)| (a - phi * b) / points.beta).collect();
    let got = ifs.phi.as_ref().unwrap();
    assert!(common::mean(got).abs() <= 1e-10);
    assert!(max_abs_diff(got, &ratio) <= 1e-12);
    assert_eq!(points.psi, points.alpha - points.beta);
    assert_eq!(phi, points.alpha / points.beta);
}

#[test]
fn influence_identities_hold_for_every_method() {
    let s1 = common::synthetic(500, Scenario::One, 1);
    let preds = fitted(&s1, Scenario::One, false, 3);
    for method in [Method::If, Method::A4Star] {
        let (points, ifs) = estimate_scenario1(&s1, &preds, method).unwrap();
        let ifs = ifs.unwrap();
        check_identities(&points, &ifs);
        let again = influence_contributions(Scenario::One, method, &s1, &preds, &points).unwrap();
        assert_eq!(again, ifs);
    }
    let s2 = common::synthetic(600, Scenario::Two, 2);
    let preds = fitted(&s2, Scenario::Two, false, 4);
    let (points, ifs) = estimate_scenario2(&s2, &preds).unwrap();
    check_identities(&points, &ifs);
    let preds = fitted(&s2, Scenario::Two, true, 4);
    let (points, ifs) = estimate_trial_target(&s2, &preds).unwrap();
    check_identities(&points, &ifs);
    let s3 = common::synthetic(600, Scenario::Three, 3);
    let preds = fitted(&s3, Scenario::Three, false, 5);
    let (points, ifs) = estimate_scenario3(&s3, &preds).unwrap();
    check_identities(&points, &ifs);
}

#[test]
fn zero_residual_collapse() {
    // trial outcomes equal their arm means, target outcomes equal mu00
    let rows = vec![obs(2.0, 1, 1), obs(1.0, 1, 0), obs(2.0, 1, 1), obs(1.0, 1, 0), obs(1.5, 0, 0), obs(1.5, 0, 0)];
    let data = Dataset::new(rows).unwrap();
    let preds = NuisancePredictions::new(6, 3.0)
        .with_constant(Nuisance::Mu11, 2.0)
        .with_constant(Nuisance::Mu10, 1.0)
        .with_constant(Nuisance::Mu00, 1.5)
        .with_constant(Nuisance::Q, 0.5)
        .with_constant(Nuisance::Tau, 0.5);
    let (aipw, _) = estimate_scenario1(&data, &preds, Method::If).unwrap();
    let (or, _) = estimate_scenario1(&data, &preds, Method::Or).unwrap();
    assert_eq!(aipw.alpha, or.alpha);
    assert_eq!(aipw.alpha, 3.0);
}

#[test]
fn scenario2_treated_target_outcomes_carry_no_residual_weight() {
    let rows =
        vec![obs(2.0, 1, 1), obs(1.0, 1, 0), obs(0.4, 0, 0), obs(0.7, 0, 0), obs(0.9, 0, 1), obs(1.3, 0, 1)];
    let preds = NuisancePredictions::new(6, 1.5)
        .with_constant(Nuisance::Mu11, 2.0)
        .with_constant(Nuisance::Mu10, 1.0)
        .with_constant(Nuisance::Mu00, 0.5)
        .with_constant(Nuisance::Q, 0.5)
        .with_constant(Nuisance::Tau, 2.0)
        .with_constant(Nuisance::Pi, 0.5);
    let data = Dataset::new(rows.clone()).unwrap();
    let (before, _) = estimate_scenario2(&data, &preds).unwrap();
    let mut flipped = rows;
    flipped[4].y = -7.0;
    let (after, _) = estimate_scenario2(&Dataset::new(flipped).unwrap(), &preds).unwrap();
    assert_eq!(before.beta, after.beta);
    assert_eq!(before.alpha, after.alpha);
}

#[test]
fn scenario3_examples() {
    let rows = vec![
        obs(3.0, 1, 1),
        obs(1.0, 1, 0),
        obs(1.0, 0, 0).with_w(vec![0.0]),
        obs(1.0, 0, 0).with_w(vec![1.0]),
    ];
    let data = Dataset::new(rows).unwrap();
    let nan = f64::NAN;
    let preds = NuisancePredictions::new(4, 2.0)
        .with_constant(Nuisance::Mu11, 3.0)
        .with_constant(Nuisance::Mu10, 1.0)
        .with_constant(Nuisance::MNested, 1.0)
        .with(Nuisance::Mu00W, vec![nan, nan, 1.0, 1.0])
        .with(Nuisance::PiW, vec![nan, nan, 1.0, 1.0])
        .with_constant(Nuisance::Q, 0.5)
        .with_constant(Nuisance::Tau, 1.0);
    let (points, _) = estimate_scenario3(&data, &preds).unwrap();
    assert_eq!((points.alpha, points.beta), (3.0, 1.0));
}

#[test]
fn degenerate_w_collapses_to_scenario2() {
    let base = common::synthetic(400, Scenario::Two, 9);
    let rows: Vec<Observation> =
        base.rows().iter().map(|r| if r.s { r.clone() } else { r.clone().with_w(vec![1.0]) }).collect();
    let data = Dataset::new(rows).unwrap();
    let s2 = fitted(&base, Scenario::Two, false, 1);
    let m = s2.get(Nuisance::Mu00).unwrap().to_vec();
    let pi = s2.get(Nuisance::Pi).unwrap().to_vec();
    let mut s3 = NuisancePredictions::new(data.len(), 1.0)
        .with_kappa(s2.kappa().to_vec())
        .with(Nuisance::MNested, m.clone())
        .with(Nuisance::Mu00W, m)
        .with(Nuisance::PiW, pi);
    for n in [Nuisance::Mu11, Nuisance::Mu10, Nuisance::Q, Nuisance::Tau] {
        s3 = s3.with(n, s2.get(n).unwrap().to_vec());
    }
    let (a, _) = estimate_scenario2(&base, &s2).unwrap();
    let (b, _) = estimate_scenario3(&data, &s3).unwrap();
    assert!((a.alpha - b.alpha).abs() <= 1e-12 * a.alpha.abs());
    assert!((a.beta - b.beta).abs() <= 1e-12 * a.beta.abs());
}

#[test]
fn trial_target_examples() {
    let mut rows = vec![obs(9.0, 1, 1), obs(-4.0, 1, 0)];
    for (y, a) in [(0.15, 1), (0.31, 0), (0.15, 1), (0.31, 0)] {
        rows.push(obs(y, 0, a));
    }
    let data = Dataset::new(rows).unwrap();
    let preds = NuisancePredictions::new(6, 1.5)
        .with_constant(Nuisance::Mu01, 0.15)
        .with_constant(Nuisance::Mu00, 0.31)
        .with_constant(Nuisance::Pi, 0.5);
    let (points, _) = estimate_trial_target(&data, &preds).unwrap();
    assert!((points.alpha - 0.15).abs() < 1e-15);
    assert!((points.beta - 0.31).abs() < 1e-15);
    assert!((points.psi + 0.16).abs() < 1e-15);
}

#[test]
fn trial_target_matches_stratified_means_with_in_sample_fits() {
    // target treated y = 1, 2, 6 (mean 3); target control y = 0, 1 (mean 0.5)
    let rows = vec![
        obs(10.0, 1, 1),
        obs(-3.0, 1, 0),
        obs(1.0, 0, 1),
        obs(0.0, 0, 0),
        obs(2.0, 0, 1),
        obs(1.0, 0, 0),
        obs(6.0, 0, 1),
        obs(10.0, 1, 1),
    ];
    let data = Dataset::new(rows).unwrap();
    let spec = NuisanceSpec::glm_default(&data, Scenario::Two, true);
    let preds = predict_in_sample(&data, &spec, Scenario::Two).unwrap();
    assert!((preds.get(Nuisance::Pi).unwrap()[0] - 0.4).abs() < 1e-10);
    let (points, _) = estimate_trial_target(&data, &preds).unwrap();
    assert!((points.alpha - 3.0).abs() < 1e-9, "{}", points.alpha);
    assert!((points.beta - 0.5).abs() < 1e-9, "{}", points.beta);
    assert!((points.phi.unwrap() - 6.0).abs() < 1e-8);
}

#[test]
fn duplicating_trial_rows_leaves_trial_target_estimates_unchanged() {
    let data = common::synthetic(300, Scenario::Two, 21);
    let spec = NuisanceSpec::glm_default(&data, Scenario::Two, true);
    let preds = predict_in_sample(&data, &spec, Scenario::Two).unwrap();
    let (a, _) = estimate_trial_target(&data, &preds).unwrap();
    let mut rows = data.rows().to_vec();
    rows.extend(data.rows().iter().filter(|r| r.s).cloned());
    let doubled = Dataset::new(rows).unwrap();
    let preds = predict_in_sample(&doubled, &spec, Scenario::Two).unwrap();
    let (b, _) = estimate_trial_target(&doubled, &preds).unwrap();
    for (x, y) in [(a.alpha, b.alpha), (a.beta, b.beta), (a.psi, b.psi), (a.phi.unwrap(), b.phi.unwrap())] {
        assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "{x} vs {y}");
    }
}

#[test]
fn trial_target_ignores_trial_rows_in_dispatch() {
    let data = common::synthetic(200, Scenario::Two, 4);
    let preds = fitted(&data, Scenario::Two, true, 2);
    let (a, _) = estimate(Scenario::One, Method::TrialTarget, &data, &preds).unwrap();
    let (b, _) = estimate_trial_target(&data, &preds).unwrap();
    assert_eq!(a, b);
}

fn rescaled(data: &Dataset, c: f64) -> Dataset {
    let y: Vec<f64> = data.rows().iter().map(|r| c * r.y).collect();
    data.with_outcomes(&y).unwrap()
}

fn perturb_trial(data: &Dataset, shift: f64) -> Dataset {
    let y: Vec<f64> = data.rows().iter().map(|r| if r.s { r.y + shift } else { r.y }).collect();
    data.with_outcomes(&y).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scale_equivariance(seed in 0u64..1000, c in 0.1f64..10.0) {
        let data = common::synthetic(300, Scenario::One, seed);
        let scaled = rescaled(&data, c);
        let (a, _) = estimate_scenario1(&data, &fitted(&data, Scenario::One, false, seed), Method::If).unwrap();
        let (b, _) = estimate_scenario1(&scaled, &fitted(&scaled, Scenario::One, false, seed), Method::If).unwrap();
        for (x, y) in [(a.alpha, b.alpha), (a.beta, b.beta), (a.psi, b.psi)] {
            prop_assert!((c * x - y).abs() <= 1e-9 * y.abs().max(1.0), "{} vs {}", c * x, y);
        }
        prop_assert!((a.phi.unwrap() - b.phi.unwrap()).abs() <= 1e-9 * a.phi.unwrap().abs());
    }

    #[test]
    fn trial_outcomes_do_not_move_target_only_quantities(seed in 0u64..1000, shift in -5.0f64..5.0) {
        let d1 = common::synthetic(300, Scenario::One, seed);
        let e1 = perturb_trial(&d1, shift);
        let (a, _) = estimate_scenario1(&d1, &fitted(&d1, Scenario::One, false, 1), Method::If).unwrap();
        let (b, _) = estimate_scenario1(&e1, &fitted(&e1, Scenario::One, false, 1), Method::If).unwrap();
        prop_assert_eq!(a.beta, b.beta);

        let d2 = common::synthetic(300, Scenario::Two, seed);
        let e2 = perturb_trial(&d2, shift);
        let (a, _) = estimate_scenario2(&d2, &fitted(&d2, Scenario::Two, false, 1)).unwrap();
        let (b, _) = estimate_scenario2(&e2, &fitted(&e2, Scenario::Two, false, 1)).unwrap();
        prop_assert_eq!(a.beta, b.beta);
        let (a, _) = estimate_trial_target(&d2, &fitted(&d2, Scenario::Two, true, 1)).unwrap();
        let (b, _) = estimate_trial_target(&e2, &fitted(&e2, Scenario::Two, true, 1)).unwrap();
        prop_assert_eq!(a.alpha, b.alpha);
        prop_assert_eq!(a.beta, b.beta);

        let d3 = common::synthetic(300, Scenario::Three, seed);
        let e3 = perturb_trial(&d3, shift);
        let (a, _) = estimate_scenario3(&d3, &fitted(&d3, Scenario::Three, false, 1)).unwrap();
        let (b, _) = estimate_scenario3(&e3, &fitted(&e3, Scenario::Three, false, 1)).unwrap();
        prop_assert_eq!(a.beta, b.beta);
    }

    #[test]
    fn se_is_permutation_invariant(v in prop::collection::vec(-10.0f64..10.0, 2..200), rot in 0usize..200) {
        let m = common::mean(&v);
        let centred: Vec<f64> = v.iter().map(|x| x - m).collect();
        let mut permuted = centred.clone();
        permuted.reverse();
        let k = rot % permuted.len();
        permuted.rotate_left(k);
        let a = standard_error("alpha", &centred).unwrap();
        let b = standard_error("alpha", &permuted).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
    }

    #[test]
    fn wider_level_contains_narrower(seed in 0u64..1000) {
        let data = common::synthetic(200, Scenario::One, seed);
        let (points, ifs) = estimate_scenario1(&data, &fitted(&data, Scenario::One, false, 0), Method::If).unwrap();
        let ifs = ifs.unwrap();
        let narrow = wald_inference(&points, &ifs, 0.95).unwrap();
        let wide = wald_inference(&points, &ifs, 0.99).unwrap();
        for (n, w) in [(narrow.ci_alpha, wide.ci_alpha), (narrow.ci_beta, wide.ci_beta), (narrow.ci_psi, wide.ci_psi)] {
            prop_assert!(w.lower <= n.lower && n.upper <= w.upper);
        }
        prop_assert!(narrow.ci_alpha.lower <= points.alpha && points.alpha <= narrow.ci_alpha.upper);
        let n = data.len() as f64;
        let direct = (ifs.alpha.iter().map(|v| v * v).sum::<f64>() / n).sqrt() / n.sqrt();
        prop_assert!((narrow.se_alpha - direct).abs() <= 1e-12 * direct);
    }
}
