mod common;

use std::collections::BTreeSet;

use causal_kit::fixtures;
use causal_kit::sampling::RngSpec;
use causal_kit::scm::{classify_paths, d_separated, Dag};
use proptest::prelude::*;
use rand::Rng;

use common::{brute_joint, brute_prob};

/// Conditional independence of `u` and `v` given `observed`, checked on every
/// assignment with positive probability.
fn independent(scm: &causal_kit::scm::Scm, u: &str, v: &str, observed: &[String]) -> bool {
    let joint = brute_joint(scm);
    let n = observed.len();
    for mask in 0..(1u32 << n) {
        let ev: Vec<(&str, f64)> = observed
            .iter()
            .enumerate()
            .map(|(i, o)| (o.as_str(), f64::from((mask >> i) & 1)))
            .collect();
        for (x, y) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
            let pxy = brute_prob(&joint, &[(u, x), (v, y)], &ev);
            let px = brute_prob(&joint, &[(u, x)], &ev);
            let py = brute_prob(&joint, &[(v, y)], &ev);
            if (pxy - px * py).abs() > 1e-9 {
                return false;
            }
        }
    }
    true
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn verdict_matches_brute_force_independence(seed in any::<u64>()) {
        let mut rng = RngSpec::new(seed).stream(0, "dsep");
        let scm = fixtures::random_binary_scm(&mut rng, 5);
        let nodes = scm.nodes().to_vec();
        prop_assume!(nodes.len() >= 2);
        let i = rng.random_range(0..nodes.len());
        let j = (i + 1 + rng.random_range(0..nodes.len() - 1)) % nodes.len();
        let observed: Vec<String> = nodes
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != i && *k != j && rng.random_bool(0.4))
            .map(|(_, n)| n.clone())
            .collect();
        let set: BTreeSet<String> = observed.iter().cloned().collect();
        let verdict = d_separated(scm.dag(), &nodes[i], &nodes[j], &set).unwrap();
        prop_assert_eq!(verdict, independent(&scm, &nodes[i], &nodes[j], &observed));
        // symmetric in the pair
        prop_assert_eq!(verdict, d_separated(scm.dag(), &nodes[j], &nodes[i], &set).unwrap());
    }
}

#[test]
fn textbook_structures() {
    let obs = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
    let chain = Dag::from_edges(&["a", "b", "c"], &[("a", "b"), ("b", "c")]);
    assert!(!d_separated(&chain, "a", "c", &obs(&[])).unwrap());
    assert!(d_separated(&chain, "a", "c", &obs(&["b"])).unwrap());

    let fork = Dag::from_edges(&["a", "b", "c"], &[("b", "a"), ("b", "c")]);
    assert!(!d_separated(&fork, "a", "c", &obs(&[])).unwrap());
    assert!(d_separated(&fork, "a", "c", &obs(&["b"])).unwrap());

    // collider opens when it or a descendant is observed
    let collider = Dag::from_edges(&["a", "b", "c", "d"], &[("a", "b"), ("c", "b"), ("b", "d")]);
    assert!(d_separated(&collider, "a", "c", &obs(&[])).unwrap());
    assert!(!d_separated(&collider, "a", "c", &obs(&["b"])).unwrap());
    assert!(!d_separated(&collider, "a", "c", &obs(&["d"])).unwrap());

    let report = classify_paths(&collider, "a", "c", &obs(&["d"])).unwrap();
    assert_eq!(report.open_paths().count(), 1);
}
