use std::collections::BTreeMap;

use causal_kit::dsl::parse_scm;
use causal_kit::estimators::{
    estimate_did, estimate_dml, estimate_doubly_robust, estimate_ipw, estimate_matching, estimate_naive,
    estimate_regression_adjustment, fit_outcome_model, fit_propensity, Bootstrap, EffectSpec, MatchOptions,
    OutcomeKind, OutcomeModel, PropensityKind, PropensityModel, Selection, DEFAULT_CLIP,
};
use causal_kit::exact::ate_exact;
use causal_kit::fixtures;
use causal_kit::sampling::{ancestral_sample, Dataset, RngSpec};
use proptest::prelude::*;

const TABLE: PropensityKind = PropensityKind::Table { alpha: 0.0 };

fn vaccine_data(n: usize, seed: u64) -> Dataset {
    ancestral_sample(&fixtures::vaccine_toy(), n, &RngSpec::new(seed)).unwrap()
}

#[test]
fn adjusted_estimators_collapse_to_naive_under_randomization() {
    // assignment ignores x, so adjusting for it changes nothing in expectation
    let scm = parse_scm(fixtures::MARKER_EFFECT).unwrap();
    let truth = ate_exact(&scm, "a", "y", 1.0, 0.0, &BTreeMap::new()).unwrap();
    let ds = ancestral_sample(&scm, 100_000, &RngSpec::new(17)).unwrap();
    let spec = EffectSpec::new("a", "y").covariates(&["m"]);
    let prop = fit_propensity(&ds, "a", &["m"], TABLE, DEFAULT_CLIP).unwrap();
    let outcome = fit_outcome_model(&ds, "a", "y", &["m"], OutcomeKind::Table).unwrap();
    let estimates = [
        estimate_naive(&ds, &spec).unwrap().estimate,
        estimate_regression_adjustment(&ds, &spec, OutcomeKind::Table).unwrap().estimate,
        estimate_ipw(&ds, &spec, &prop).unwrap().estimate,
        estimate_doubly_robust(&ds, &spec, &outcome, &prop).unwrap().estimate,
    ];
    for e in estimates {
        assert!((e - truth).abs() < 0.015, "{e} vs {truth}");
        assert!((e - estimates[0]).abs() < 0.01);
    }
}

#[test]
fn doubly_robust_survives_one_wrong_model() {
    let ds = vaccine_data(100_000, 4);
    let spec = EffectSpec::new("a", "y").covariates(&["x"]);
    let good_prop = fit_propensity(&ds, "a", &["x"], TABLE, DEFAULT_CLIP).unwrap();
    let good_outcome = fit_outcome_model(&ds, "a", "y", &["x"], OutcomeKind::Table).unwrap();
    let bad_prop = PropensityModel::constant(0.5, DEFAULT_CLIP).unwrap();
    let bad_outcome = OutcomeModel::constant(0.0);

    let wrong_outcome = estimate_doubly_robust(&ds, &spec, &bad_outcome, &good_prop).unwrap();
    let wrong_prop = estimate_doubly_robust(&ds, &spec, &good_outcome, &bad_prop).unwrap();
    assert!((wrong_outcome.estimate - 0.3).abs() < 0.02, "{}", wrong_outcome.estimate);
    assert!((wrong_prop.estimate - 0.3).abs() < 0.02, "{}", wrong_prop.estimate);

    // IPW alone has no such protection
    let ipw = estimate_ipw(&ds, &spec, &bad_prop).unwrap();
    assert!((ipw.estimate - 0.6).abs() < 0.02, "{}", ipw.estimate);
}

#[test]
fn seeded_estimators_are_deterministic() {
    let ds = vaccine_data(5_000, 9);
    let spec = EffectSpec::new("a", "y").covariates(&["x"]);
    for selection in [Selection::Random, Selection::RoundRobin] {
        let opts = MatchOptions {
            selection,
            rng: RngSpec::new(1),
            ..MatchOptions::default()
        };
        let (d1, r1) = estimate_matching(&ds, &spec, &opts).unwrap();
        let (d2, r2) = estimate_matching(&ds, &spec, &opts).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(d1.to_csv_string(), d2.to_csv_string());
    }

    let iv = ancestral_sample(&fixtures::iv_linear(), 2_000, &RngSpec::new(2)).unwrap();
    let ivspec = EffectSpec::new("a", "y").covariates(&["x"]);
    let a = estimate_dml(&iv, &ivspec, 5, &RngSpec::new(3)).unwrap();
    let b = estimate_dml(&iv, &ivspec, 5, &RngSpec::new(3)).unwrap();
    assert_eq!(a, b);

    let boot = Bootstrap::new(50, RngSpec::new(6));
    let stat = |d: &Dataset, _: &RngSpec| Ok(estimate_naive(d, &spec)?.estimate);
    assert_eq!(boot.std_error(&ds, stat), boot.std_error(&ds, stat));
}

#[test]
fn did_matches_hand_computed_group_means() {
    let ds = ancestral_sample(&fixtures::did_model(), 2_000, &RngSpec::new(12)).unwrap();
    let (a, pre, post) = (
        ds.column("a").unwrap(),
        ds.column("y_pre").unwrap(),
        ds.column("y_post").unwrap(),
    );
    let change = |arm: f64| {
        let rows: Vec<usize> = (0..a.len()).filter(|&r| a[r] == arm).collect();
        rows.iter().map(|&r| post[r] - pre[r]).sum::<f64>() / rows.len() as f64
    };
    let r = estimate_did(&ds, "a", "y_pre", "y_post").unwrap();
    assert!((r.estimate - (change(1.0) - change(0.0))).abs() < 1e-9);
}

fn transformed(ds: &Dataset, scale: f64, shift: f64) -> Dataset {
    let mut out = ds.clone();
    let y: Vec<f64> = ds.column("y").unwrap().iter().map(|v| scale * v + shift).collect();
    out.set_column("y", y).unwrap();
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn estimates_are_affine_equivariant_in_the_outcome(
        seed in any::<u64>(),
        scale in prop::sample::select(vec![-3.0, 0.5, 2.0, 10.0]),
        shift in -5.0f64..5.0,
    ) {
        let ds = vaccine_data(400, seed);
        let moved = transformed(&ds, scale, shift);
        let spec = EffectSpec::new("a", "y").covariates(&["x"]);
        let prop = fit_propensity(&ds, "a", &["x"], TABLE, DEFAULT_CLIP).unwrap();
        let run = |d: &Dataset| -> Vec<f64> {
            let outcome = fit_outcome_model(d, "a", "y", &["x"], OutcomeKind::Linear).unwrap();
            vec![
                estimate_naive(d, &spec).unwrap().estimate,
                estimate_regression_adjustment(d, &spec, OutcomeKind::Table).unwrap().estimate,
                estimate_ipw(d, &spec, &prop).unwrap().estimate,
                estimate_doubly_robust(d, &spec, &outcome, &prop).unwrap().estimate,
            ]
        };
        for (before, after) in run(&ds).into_iter().zip(run(&moved)) {
            prop_assert!((scale * before - after).abs() < 1e-9, "{before} {after}");
        }
    }

    #[test]
    fn swapping_arm_labels_negates_the_estimate(seed in any::<u64>()) {
        let ds = vaccine_data(400, seed);
        let mut flipped = ds.clone();
        let a: Vec<f64> = ds.column("a").unwrap().iter().map(|v| 1.0 - v).collect();
        flipped.set_column("a", a).unwrap();
        let spec = EffectSpec::new("a", "y").covariates(&["x"]);
        let p1 = fit_propensity(&ds, "a", &["x"], TABLE, DEFAULT_CLIP).unwrap();
        let p2 = fit_propensity(&flipped, "a", &["x"], TABLE, DEFAULT_CLIP).unwrap();
        let e1 = estimate_ipw(&ds, &spec, &p1).unwrap().estimate;
        let e2 = estimate_ipw(&flipped, &spec, &p2).unwrap().estimate;
        prop_assert!((e1 + e2).abs() < 1e-9);
        let n1 = estimate_naive(&ds, &spec).unwrap().estimate;
        let n2 = estimate_naive(&flipped, &spec).unwrap().estimate;
        prop_assert!((n1 + n2).abs() < 1e-12);
    }
}
