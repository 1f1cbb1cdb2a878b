#![allow(dead_code)]

use std::collections::BTreeMap;

use causal_kit::scm::{Mechanism, Scm};

/// Joint pmf of a model whose mechanisms are all tables, by direct product of
/// CPT rows over every assignment. Kept separate from the library's
/// enumeration so the two can be compared.
pub fn brute_joint(scm: &Scm) -> Vec<(BTreeMap<String, f64>, f64)> {
    let order = scm.dag().topological_order().unwrap();
    let mut out = vec![(BTreeMap::new(), 1.0)];
    for node in &order {
        let Some(Mechanism::DiscreteCpt(cpt)) = scm.mechanism(node) else {
            panic!("brute_joint needs table mechanisms");
        };
        let values = scm.domain(node).unwrap().values().unwrap().to_vec();
        let mut next = Vec::with_capacity(out.len() * values.len());
        for (assign, p) in out {
            let parents: Vec<f64> = cpt.parents().iter().map(|q| assign[q]).collect();
            let row = cpt.row(&parents).unwrap();
            for (v, q) in values.iter().zip(row) {
                let mut a = assign.clone();
                a.insert(node.clone(), *v);
                next.push((a, p * q));
            }
        }
        out = next;
    }
    out
}

/// `p(vars = values | evidence)` by summing the brute-force joint.
pub fn brute_prob(joint: &[(BTreeMap<String, f64>, f64)], event: &[(&str, f64)], evidence: &[(&str, f64)]) -> f64 {
    let holds = |a: &BTreeMap<String, f64>, cs: &[(&str, f64)]| cs.iter().all(|(k, v)| a[*k] == *v);
    let den: f64 = joint.iter().filter(|(a, _)| holds(a, evidence)).map(|(_, p)| p).sum();
    let num: f64 = joint
        .iter()
        .filter(|(a, _)| holds(a, evidence) && holds(a, event))
        .map(|(_, p)| p)
        .sum();
    num / den
}
