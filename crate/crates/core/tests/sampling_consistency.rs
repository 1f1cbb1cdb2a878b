mod common;

use std::collections::BTreeMap;

use causal_kit::dsl::parse_scm;
use causal_kit::exact::{interventional_query, joint_table, Query};
use causal_kit::fixtures;
use causal_kit::sampling::{acceptance_rate, ancestral_sample, fit_table, rejection_condition, Predicate, RngSpec};

use common::{brute_joint, brute_prob};

#[test]
fn exact_joint_matches_brute_force_product() {
    let mut rng = RngSpec::new(5).stream(0, "models");
    for _ in 0..50 {
        let scm = fixtures::random_binary_scm(&mut rng, 6);
        let table = joint_table(&scm).unwrap();
        for (assign, p) in brute_joint(&scm) {
            let values: Vec<f64> = table.variables().iter().map(|v| assign[v]).collect();
            assert!((table.prob(&values).unwrap() - p).abs() < 1e-12);
        }
    }
}

#[test]
fn empirical_joint_is_close_to_exact() {
    let mut rng = RngSpec::new(11).stream(0, "models");
    for i in 0..5 {
        let scm = fixtures::random_binary_scm(&mut rng, 5);
        let exact = joint_table(&scm).unwrap();
        let ds = ancestral_sample(&scm, 100_000, &RngSpec::new(i)).unwrap();
        let vars: Vec<&str> = exact.variables().iter().map(String::as_str).collect();
        let empirical = fit_table(&ds, &vars, scm.domains(), 0.0).unwrap();
        let tv = exact.total_variation(&empirical).unwrap();
        assert!(tv <= 0.01, "model {i}: tv {tv}");
    }
}

#[test]
fn rejection_sampling_matches_exact_conditional() {
    let scm = fixtures::vaccine_toy();
    let evidence = BTreeMap::from([("y".to_string(), Predicate::Eq { value: 1.0 })]);
    let ds = rejection_condition(&scm, &evidence, 50_000, &RngSpec::new(3), 10_000_000).unwrap();
    let empirical = fit_table(&ds, &["x", "a"], scm.domains(), 0.0).unwrap();
    let exact = interventional_query(&scm, &Query::new(["x", "a"]).given("y", 1.0)).unwrap();
    assert!(exact.total_variation(&empirical).unwrap() <= 0.01);

    let joint = brute_joint(&scm);
    let p_y1 = brute_prob(&joint, &[("y", 1.0)], &[]);
    let rate = acceptance_rate(&ds).unwrap();
    assert!((rate - p_y1).abs() < 0.01, "{rate} vs {p_y1}");
}

#[test]
fn trivial_evidence_reproduces_ancestral_rows() {
    let scm = fixtures::vaccine_toy();
    let rng = RngSpec::new(8);
    let evidence = BTreeMap::from([(
        "y".to_string(),
        Predicate::Interval {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        },
    )]);
    let a = rejection_condition(&scm, &evidence, 500, &rng, 500).unwrap();
    let b = ancestral_sample(&scm, 500, &rng).unwrap();
    for r in 0..500 {
        assert_eq!(a.row(r), b.row(r));
    }
}

#[test]
fn same_seed_same_rows_and_intervention_keeps_upstream_draws() {
    let scm = parse_scm(fixtures::CONFOUNDED_ASSIGNMENT).unwrap();
    let rng = RngSpec::new(99);
    let a = ancestral_sample(&scm, 1000, &rng).unwrap();
    let b = ancestral_sample(&scm, 1000, &rng).unwrap();
    assert_eq!(a.column("y"), b.column("y"));
    let surged = ancestral_sample(&scm.intervene("a", 1.0).unwrap(), 1000, &rng).unwrap();
    assert_eq!(a.column("x"), surged.column("x"));
    assert!(surged.column("a").unwrap().iter().all(|v| *v == 1.0));
}

#[test]
fn shared_parent_covariance() {
    // u = 0.2 z + N(0, √1.04), v = 0.1 u − 0.5 z + N(0, 0.1), z ~ N(0, 1):
    // cov(u, v) = 0.1 Var(u) − 0.5 cov(u, z) = 0.1 · 1.08 − 0.1
    let ds = ancestral_sample(&fixtures::covariance_example(), 400_000, &RngSpec::new(1)).unwrap();
    let (u, v) = (ds.column("u").unwrap(), ds.column("v").unwrap());
    let n = u.len() as f64;
    let (mu, mv) = (u.iter().sum::<f64>() / n, v.iter().sum::<f64>() / n);
    let cov = u.iter().zip(v).map(|(a, b)| (a - mu) * (b - mv)).sum::<f64>() / (n - 1.0);
    assert!((cov - 0.008).abs() < 0.005, "{cov}");
}
