//! Exact inference on discrete models by full enumeration of the joint.

mod sum;
mod table;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use thiserror::Error;

use crate::scm::{cross_product, Domain, Mechanism, Scm, ScmError, VALUE_TOLERANCE};

pub use sum::{compensated_sum, CompensatedSum};
pub use table::{DistTable, MAX_TABLE_ENTRIES};

use table::{table_size, Odometer};

#[derive(Debug, Error)]
pub enum ExactError {
    #[error(transparent)]
    Scm(#[from] ScmError),
    #[error("node `{0}` is continuous and cannot be enumerated")]
    ContinuousNode(String),
    #[error("node `{node}` cannot be enumerated: {reason}")]
    NotEnumerable { node: String, reason: String },
    #[error("assignment space exceeds {max} entries")]
    StateSpace { max: usize },
    #[error("evidence has probability zero: {0}")]
    ZeroProbability(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("value {value} is not in the domain of `{node}`")]
    OutOfDomain { node: String, value: f64 },
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("malformed table: {0}")]
    Shape(String),
}

/// `p(target | evidence; do(interventions))`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Query {
    pub target: Vec<String>,
    pub evidence: BTreeMap<String, f64>,
    pub interventions: BTreeMap<String, f64>,
}

impl Query {
    pub fn new<S: Into<String>>(target: impl IntoIterator<Item = S>) -> Self {
        Query {
            target: target.into_iter().map(Into::into).collect(),
            ..Query::default()
        }
    }

    pub fn given(mut self, node: &str, value: f64) -> Self {
        self.evidence.insert(node.to_string(), value);
        self
    }

    pub fn with_do(mut self, node: &str, value: f64) -> Self {
        self.interventions.insert(node.to_string(), value);
        self
    }
}

/// Joint distribution of every node, variables in topological order.
pub fn joint_table(scm: &Scm) -> Result<DistTable, ExactError> {
    let all: BTreeSet<String> = scm.nodes().iter().cloned().collect();
    joint_over(scm, &all)
}

/// `p(target | evidence)` from a joint table.
pub fn query(table: &DistTable, target: &[String], evidence: &BTreeMap<String, f64>) -> Result<DistTable, ExactError> {
    table.query(target, evidence)
}

/// Applies the interventions by surgery, then conditions the resulting joint.
/// Only ancestors of the target and evidence are enumerated; the others sum
/// out to one.
pub fn interventional_query(scm: &Scm, q: &Query) -> Result<DistTable, ExactError> {
    for name in q.target.iter().chain(q.evidence.keys()).chain(q.interventions.keys()) {
        if !scm.dag().contains(name) {
            return Err(ScmError::UnknownNode(name.clone()).into());
        }
    }
    let clash = q
        .target
        .iter()
        .chain(q.evidence.keys())
        .find(|n| q.interventions.contains_key(*n))
        .or_else(|| q.target.iter().find(|n| q.evidence.contains_key(*n)));
    if let Some(name) = clash {
        return Err(ExactError::InvalidQuery(format!(
            "`{name}` appears in more than one of target, evidence and interventions"
        )));
    }
    let surged = scm.do_surgery(&q.interventions)?;
    let mut relevant = BTreeSet::new();
    for n in q.target.iter().chain(q.evidence.keys()) {
        relevant.insert(n.clone());
        relevant.extend(surged.dag().ancestors(n));
    }
    joint_over(&surged, &relevant)?.query(&q.target, &q.evidence)
}

/// `E[y | do(a=treated), condition] − E[y | do(a=control), condition]`.
pub fn ate_exact(
    scm: &Scm,
    action: &str,
    outcome: &str,
    treated: f64,
    control: f64,
    condition: &BTreeMap<String, f64>,
) -> Result<f64, ExactError> {
    check_effect_args(scm, action, outcome, treated, control, condition)?;
    if treated == control {
        return Ok(0.0);
    }
    let mean = |value: f64| -> Result<f64, ExactError> {
        let mut q = Query::new([outcome]).with_do(action, value);
        q.evidence = condition.clone();
        interventional_query(scm, &q)?.expectation(outcome)
    };
    Ok(mean(treated)? - mean(control)?)
}

/// `E[y | a=treated] − E[y | a=control]` without intervening: the naive
/// contrast that confounding biases.
pub fn conditional_difference(
    scm: &Scm,
    action: &str,
    outcome: &str,
    treated: f64,
    control: f64,
) -> Result<f64, ExactError> {
    check_effect_args(scm, action, outcome, treated, control, &BTreeMap::new())?;
    let mean = |value: f64| -> Result<f64, ExactError> {
        interventional_query(scm, &Query::new([outcome]).given(action, value))?.expectation(outcome)
    };
    Ok(mean(treated)? - mean(control)?)
}

fn check_effect_args(
    scm: &Scm,
    action: &str,
    outcome: &str,
    treated: f64,
    control: f64,
    condition: &BTreeMap<String, f64>,
) -> Result<(), ExactError> {
    for n in [action, outcome] {
        if !scm.dag().contains(n) {
            return Err(ScmError::UnknownNode(n.to_string()).into());
        }
    }
    if action == outcome {
        return Err(ExactError::InvalidQuery("action and outcome must differ".into()));
    }
    if condition.contains_key(action) || condition.contains_key(outcome) {
        return Err(ExactError::InvalidQuery(
            "condition must not mention the action or the outcome".into(),
        ));
    }
    if matches!(scm.domain(outcome), Some(Domain::Continuous)) {
        return Err(ExactError::ContinuousNode(outcome.to_string()));
    }
    let domain = scm.domain(action).expect("validated node");
    for v in [treated, control] {
        if !domain.contains(v) {
            return Err(ExactError::OutOfDomain {
                node: action.to_string(),
                value: v,
            });
        }
    }
    Ok(())
}

/// Local conditional table of one node over (sorted parents, node).
struct Factor {
    /// Positions of the parents, then the node itself, in the joint's variable order.
    positions: Vec<usize>,
    strides: Vec<usize>,
    probs: Vec<f64>,
}

fn discrete_values<'a>(scm: &'a Scm, node: &str) -> Result<&'a [f64], ExactError> {
    scm.domain(node)
        .and_then(Domain::values)
        .ok_or_else(|| ExactError::ContinuousNode(node.to_string()))
}

/// pmf of `node` over its domain for one parent assignment.
fn local_pmf(scm: &Scm, node: &str, parents: &[String], pa: &[f64]) -> Result<Vec<f64>, ExactError> {
    let values = discrete_values(scm, node)?;
    let mut pmf = vec![0.0; values.len()];
    let place = |pmf: &mut Vec<f64>, value: f64, p: f64| -> Result<(), ExactError> {
        let i = values
            .iter()
            .position(|d| (d - value).abs() <= VALUE_TOLERANCE)
            .ok_or_else(|| ExactError::OutOfDomain {
                node: node.to_string(),
                value,
            })?;
        pmf[i] += p;
        Ok(())
    };
    let lookup = |name: &str| -> f64 {
        let i = parents.iter().position(|p| p == name).expect("parent listed");
        pa[i]
    };
    match scm.mechanism(node).expect("validated model") {
        Mechanism::DiscreteCpt(cpt) => {
            let row = cpt.row(pa).ok_or_else(|| ExactError::NotEnumerable {
                node: node.to_string(),
                reason: "missing CPT row".into(),
            })?;
            pmf.copy_from_slice(row);
        }
        Mechanism::Constant(c) => place(&mut pmf, *c, 1.0)?,
        Mechanism::LinearGaussian {
            weights,
            intercept,
            noise_std,
        } => {
            if *noise_std > 0.0 {
                return Err(ExactError::NotEnumerable {
                    node: node.to_string(),
                    reason: "Gaussian noise has no finite support".into(),
                });
            }
            let v = intercept + weights.iter().map(|(p, w)| w * lookup(p)).sum::<f64>();
            place(&mut pmf, v, 1.0)?;
        }
        Mechanism::Deterministic { expr, noise } => {
            let support = match noise {
                None => vec![(0.0, 1.0)],
                Some(spec) => spec.support().ok_or_else(|| ExactError::NotEnumerable {
                    node: node.to_string(),
                    reason: format!("noise {spec} has no finite support"),
                })?,
            };
            for (eps, p) in support {
                if p > 0.0 {
                    place(&mut pmf, expr.eval(&lookup, eps), p)?;
                }
            }
        }
    }
    Ok(pmf)
}

fn build_factor(scm: &Scm, node: &str, order: &[String], radix: &[usize]) -> Result<Factor, ExactError> {
    let parents: Vec<String> = scm.mechanism(node).expect("validated model").parents().into_iter().collect();
    let parent_domains: Vec<Vec<f64>> = parents
        .iter()
        .map(|p| discrete_values(scm, p).map(<[f64]>::to_vec))
        .collect::<Result<_, _>>()?;
    let mut probs = Vec::new();
    for pa in cross_product(&parent_domains) {
        probs.extend(local_pmf(scm, node, &parents, &pa)?);
    }
    let positions: Vec<usize> = parents
        .iter()
        .map(String::as_str)
        .chain(std::iter::once(node))
        .map(|n| order.iter().position(|o| o == n).expect("ancestrally closed"))
        .collect();
    let mut strides = vec![1; positions.len()];
    for i in (0..positions.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * radix[positions[i + 1]];
    }
    Ok(Factor {
        positions,
        strides,
        probs,
    })
}

/// Joint over an ancestrally closed node set, variables in topological order.
fn joint_over(scm: &Scm, nodes: &BTreeSet<String>) -> Result<DistTable, ExactError> {
    let errors = scm.validate();
    if !errors.is_empty() {
        return Err(ScmError::InvalidModel(errors).into());
    }
    let order: Vec<String> = scm
        .dag()
        .topological_order()?
        .into_iter()
        .filter(|n| nodes.contains(n))
        .collect();
    let domains: Vec<Vec<f64>> = order
        .iter()
        .map(|n| discrete_values(scm, n).map(<[f64]>::to_vec))
        .collect::<Result<_, _>>()?;
    let size = table_size(&domains)?;
    let radix: Vec<usize> = domains.iter().map(Vec::len).collect();
    let factors: Vec<Factor> = order
        .iter()
        .map(|n| build_factor(scm, n, &order, &radix))
        .collect::<Result<_, _>>()?;

    const CHUNK: usize = 1 << 14;
    let mut probs = vec![0.0; size];
    probs.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
        let mut odo = Odometer::starting_at(&radix, c * CHUNK);
        for (k, slot) in chunk.iter_mut().enumerate() {
            if k > 0 {
                odo.advance();
            }
            let mut p = 1.0;
            for f in &factors {
                let idx: usize = f.positions.iter().zip(&f.strides).map(|(&pos, s)| odo.digits[pos] * s).sum();
                p *= f.probs[idx];
                if p == 0.0 {
                    break;
                }
            }
            *slot = p;
        }
    });
    DistTable::new(order, domains, probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_scm;

    pub(crate) const VACCINE: &str = "
        var x: {0,1} ~ bernoulli(0.5);
        var a: {0,1} cpt | x=0 -> 0.8, 0.2 | x=1 -> 0.2, 0.8;
        var y: {0,1} cpt
          | a=0, x=0 -> 0.9, 0.1
          | a=0, x=1 -> 0.4, 0.6
          | a=1, x=0 -> 0.6, 0.4
          | a=1, x=1 -> 0.1, 0.9;";

    #[test]
    fn chain_joint_by_hand() {
        let scm = parse_scm("var u: {0,1} ~ bernoulli(0.3); var v: {0,1} := u;").unwrap();
        let t = joint_table(&scm).unwrap();
        assert_eq!(t.variables(), ["u", "v"]);
        assert_eq!(t.prob(&[1.0, 1.0]), Some(0.3));
        assert_eq!(t.prob(&[1.0, 0.0]), Some(0.0));
        assert_eq!(t.prob(&[0.0, 0.0]), Some(0.7));
    }

    #[test]
    fn vaccine_effects() {
        let scm = parse_scm(VACCINE).unwrap();
        let none = BTreeMap::new();
        let ate = ate_exact(&scm, "a", "y", 1.0, 0.0, &none).unwrap();
        assert!((ate - 0.30).abs() < 1e-12, "{ate}");
        let naive = conditional_difference(&scm, "a", "y", 1.0, 0.0).unwrap();
        assert!((naive - 0.60).abs() < 1e-12, "{naive}");
        let p = interventional_query(&scm, &Query::new(["y"]).with_do("a", 1.0)).unwrap();
        assert!((p.prob(&[1.0]).unwrap() - 0.65).abs() < 1e-12);
        assert_eq!(ate_exact(&scm, "a", "y", 1.0, 1.0, &none).unwrap(), 0.0);
        // CATE given x=1: (0.1+0.3+0.5) - (0.1+0.5)
        let cate = ate_exact(&scm, "a", "y", 1.0, 0.0, &BTreeMap::from([("x".into(), 1.0)])).unwrap();
        assert!((cate - 0.3).abs() < 1e-12);
    }

    #[test]
    fn unreachable_action_has_no_effect() {
        let scm = parse_scm("var a: {0,1} ~ bernoulli(0.5); var y: {0,1} ~ bernoulli(0.3);").unwrap();
        assert_eq!(ate_exact(&scm, "a", "y", 1.0, 0.0, &BTreeMap::new()).unwrap(), 0.0);
    }

    #[test]
    fn discrete_noise_paths_cancel() {
        let scm = parse_scm(
            "var u: {0,1} ~ bernoulli(0.5);
             var a: {-1,0,1} := -u + bernoulli(0.5);
             var b: {0,1,2} := u + bernoulli(0.5);
             var v: {-1,0,1,2,3,4} := a + b + bernoulli(0.5);",
        )
        .unwrap();
        let ate = ate_exact(&scm, "u", "v", 1.0, 0.0, &BTreeMap::new()).unwrap();
        assert!(ate.abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let scm = parse_scm(VACCINE).unwrap();
        let q = Query::new(["y"]).given("a", 1.0).with_do("a", 1.0);
        assert!(matches!(interventional_query(&scm, &q), Err(ExactError::InvalidQuery(_))));
        let q = Query::new(["y"]).given("x", 2.0);
        assert!(matches!(interventional_query(&scm, &q), Err(ExactError::OutOfDomain { .. })));
        let cont = parse_scm("var x ~ normal(0, 1); var y: {0,1} ~ bernoulli(0.5);").unwrap();
        assert!(matches!(joint_table(&cont), Err(ExactError::ContinuousNode(_))));
        // barren continuous nodes are never enumerated
        assert!(interventional_query(&cont, &Query::new(["y"])).is_ok());
        let zero = parse_scm("var u: {0,1} ~ bernoulli(0); var v: {0,1} := u;").unwrap();
        let q = Query::new(["v"]).given("u", 1.0);
        assert!(matches!(interventional_query(&zero, &q), Err(ExactError::ZeroProbability(_))));
    }
}
