//! Structural causal models: graphs, mechanisms, do-surgery and path analysis.

mod dag;
mod mechanism;
mod paths;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

pub use dag::{Dag, Structure};
pub use mechanism::{key, BinOp, Cpt, Expr, Func, LinearForm, Mechanism, NoiseSpec, ValueKey, VALUE_TOLERANCE};
pub use paths::{classify_paths, d_separated, MiddleRole, Path, PathReport, PathStatus, MAX_PATH_NODES};

/// Value space of a variable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Domain {
    Discrete(Vec<f64>),
    Continuous,
}

impl Domain {
    pub fn binary() -> Domain {
        Domain::Discrete(vec![0.0, 1.0])
    }

    pub fn values(&self) -> Option<&[f64]> {
        match self {
            Domain::Discrete(v) => Some(v),
            Domain::Continuous => None,
        }
    }

    /// Position of `value` in a discrete domain (within [`VALUE_TOLERANCE`]).
    pub fn index_of(&self, value: f64) -> Option<usize> {
        self.values()?
            .iter()
            .position(|v| (v - value).abs() <= VALUE_TOLERANCE)
    }

    pub fn contains(&self, value: f64) -> bool {
        match self {
            Domain::Continuous => value.is_finite(),
            Domain::Discrete(_) => self.index_of(value).is_some(),
        }
    }
}

/// Violation of a graph or model invariant, reported by `validate`.
#[derive(Debug, Clone, PartialEq, Error, Serialize)]
pub enum StructuralError {
    #[error("duplicate node `{node}`")]
    DuplicateNode { node: String },
    #[error("edge {from}->{to} references undeclared node `{missing}`")]
    UnknownEdgeEndpoint {
        from: String,
        to: String,
        missing: String,
    },
    #[error("self-loop on `{node}`")]
    SelfLoop { node: String },
    #[error("cycle through {}", .nodes.join(" -> "))]
    Cycle { nodes: Vec<String> },
    #[error("node `{node}` has no mechanism")]
    MissingMechanism { node: String },
    #[error("node `{node}` has no domain")]
    MissingDomain { node: String },
    #[error("mechanism given for undeclared node `{node}`")]
    OrphanMechanism { node: String },
    #[error("node `{node}`: mechanism parents {mechanism:?} differ from graph parents {graph:?}")]
    ParentMismatch {
        node: String,
        mechanism: Vec<String>,
        graph: Vec<String>,
    },
    #[error("node `{node}`: CPT requires a discrete domain")]
    CptNotDiscrete { node: String },
    #[error("node `{node}`: CPT parent `{parent}` is not discrete")]
    CptParentNotDiscrete { node: String, parent: String },
    #[error("node `{node}`: CPT is missing row {row}")]
    CptMissingRow { node: String, row: String },
    #[error("node `{node}`: CPT row {row} is not a valid parent assignment")]
    CptUnexpectedRow { node: String, row: String },
    #[error("node `{node}`: CPT row {row} has {got} entries, domain has {expected}")]
    CptRowLength {
        node: String,
        row: String,
        got: usize,
        expected: usize,
    },
    #[error("node `{node}`: CPT row {row} sums to {sum}")]
    CptRowSum { node: String, row: String, sum: f64 },
    #[error("node `{node}`: CPT row {row} has a negative or non-finite entry")]
    CptRowEntry { node: String, row: String },
    #[error("node `{node}`: {message}")]
    InvalidParameter { node: String, message: String },
    #[error("node `{node}`: constant {value} is outside its domain")]
    ConstantOutsideDomain { node: String, value: f64 },
    #[error("node `{node}`: Gaussian noise requires a continuous domain")]
    GaussianOnDiscrete { node: String },
    #[error("node `{node}`: expression contains {count} noise terms (at most one allowed)")]
    NoiseCount { node: String, count: usize },
    #[error("node `{node}`: discrete domain is empty or has duplicate/non-finite values")]
    BadDomain { node: String },
}

/// Errors from operations on models.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScmError {
    #[error("invalid graph: {}", join_errors(.0))]
    InvalidGraph(Vec<StructuralError>),
    #[error("invalid model: {}", join_errors(.0))]
    InvalidModel(Vec<StructuralError>),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("value {value} is outside the domain of `{node}`")]
    OutOfDomain { node: String, value: f64 },
    #[error("path enumeration is capped at {max} nodes, graph has {got}")]
    TooManyNodes { max: usize, got: usize },
    #[error("invalid path query: {0}")]
    InvalidQuery(String),
}

fn join_errors(errors: &[StructuralError]) -> String {
    errors
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// A DAG with one mechanism and one domain per node.
#[derive(Debug, Clone, Serialize)]
pub struct Scm {
    dag: Dag,
    mechanisms: BTreeMap<String, Mechanism>,
    domains: BTreeMap<String, Domain>,
}

impl Scm {
    /// Assembles a model without checking it; see [`Scm::validate`].
    pub fn from_parts(
        dag: Dag,
        mechanisms: BTreeMap<String, Mechanism>,
        domains: BTreeMap<String, Domain>,
    ) -> Self {
        Scm {
            dag,
            mechanisms,
            domains,
        }
    }

    /// Builds a model whose edges are read off the mechanisms' parent sets.
    pub fn from_nodes<I, S>(nodes: I) -> Result<Self, ScmError>
    where
        I: IntoIterator<Item = (S, Domain, Mechanism)>,
        S: Into<String>,
    {
        let mut names = Vec::new();
        let mut mechanisms = BTreeMap::new();
        let mut domains = BTreeMap::new();
        let mut edges = BTreeSet::new();
        for (name, domain, mech) in nodes {
            let name = name.into();
            for p in mech.parents() {
                edges.insert((p, name.clone()));
            }
            names.push(name.clone());
            domains.insert(name.clone(), domain);
            mechanisms.insert(name, mech);
        }
        let scm = Scm::from_parts(Dag::new(names, edges), mechanisms, domains);
        let errors = scm.validate();
        if errors.is_empty() {
            Ok(scm)
        } else {
            Err(ScmError::InvalidModel(errors))
        }
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn nodes(&self) -> &[String] {
        self.dag.nodes()
    }

    pub fn mechanism(&self, node: &str) -> Option<&Mechanism> {
        self.mechanisms.get(node)
    }

    pub fn mechanisms(&self) -> &BTreeMap<String, Mechanism> {
        &self.mechanisms
    }

    pub fn domain(&self, node: &str) -> Option<&Domain> {
        self.domains.get(node)
    }

    pub fn domains(&self) -> &BTreeMap<String, Domain> {
        &self.domains
    }

    pub fn is_discrete(&self) -> bool {
        self.domains.values().all(|d| matches!(d, Domain::Discrete(_)))
    }

    /// Every structural violation; empty when the model is well formed.
    pub fn validate(&self) -> Vec<StructuralError> {
        let mut errors = self.dag.validate();
        for node in self.dag.nodes() {
            let Some(mech) = self.mechanisms.get(node) else {
                errors.push(StructuralError::MissingMechanism { node: node.clone() });
                continue;
            };
            let Some(domain) = self.domains.get(node) else {
                errors.push(StructuralError::MissingDomain { node: node.clone() });
                continue;
            };
            if let Domain::Discrete(values) = domain {
                let mut sorted: Vec<f64> = values.clone();
                sorted.sort_by(f64::total_cmp);
                let dup = sorted.windows(2).any(|w| (w[1] - w[0]).abs() <= VALUE_TOLERANCE);
                if values.is_empty() || dup || values.iter().any(|v| !v.is_finite()) {
                    errors.push(StructuralError::BadDomain { node: node.clone() });
                    continue;
                }
            }
            let graph_parents = self.dag.parents(node);
            let mech_parents = mech.parents();
            if graph_parents != mech_parents {
                errors.push(StructuralError::ParentMismatch {
                    node: node.clone(),
                    mechanism: mech_parents.into_iter().collect(),
                    graph: graph_parents.into_iter().collect(),
                });
            }
            self.validate_mechanism(node, mech, domain, &mut errors);
        }
        for node in self.mechanisms.keys() {
            if !self.dag.contains(node) {
                errors.push(StructuralError::OrphanMechanism { node: node.clone() });
            }
        }
        errors
    }

    fn validate_mechanism(
        &self,
        node: &str,
        mech: &Mechanism,
        domain: &Domain,
        errors: &mut Vec<StructuralError>,
    ) {
        let node_s = node.to_string();
        match mech {
            Mechanism::DiscreteCpt(cpt) => {
                let Domain::Discrete(values) = domain else {
                    errors.push(StructuralError::CptNotDiscrete { node: node_s });
                    return;
                };
                let mut parent_domains = Vec::new();
                for p in cpt.parents() {
                    match self.domains.get(p) {
                        Some(Domain::Discrete(v)) => parent_domains.push(v.clone()),
                        Some(Domain::Continuous) => {
                            errors.push(StructuralError::CptParentNotDiscrete {
                                node: node_s.clone(),
                                parent: p.clone(),
                            });
                            return;
                        }
                        // reported as an unknown edge endpoint / mismatch
                        None => return,
                    }
                }
                let expected: BTreeSet<ValueKey> = cross_product(&parent_domains)
                    .into_iter()
                    .map(|k| key(&k))
                    .collect();
                for missing in expected.iter().filter(|k| !cpt.rows().contains_key(*k)) {
                    errors.push(StructuralError::CptMissingRow {
                        node: node_s.clone(),
                        row: format_row(cpt.parents(), missing),
                    });
                }
                for (row, pmf) in cpt.rows() {
                    let label = format_row(cpt.parents(), row);
                    if !expected.contains(row) {
                        errors.push(StructuralError::CptUnexpectedRow {
                            node: node_s.clone(),
                            row: label.clone(),
                        });
                    }
                    if pmf.len() != values.len() {
                        errors.push(StructuralError::CptRowLength {
                            node: node_s.clone(),
                            row: label,
                            got: pmf.len(),
                            expected: values.len(),
                        });
                        continue;
                    }
                    if pmf.iter().any(|p| !p.is_finite() || *p < 0.0) {
                        errors.push(StructuralError::CptRowEntry {
                            node: node_s.clone(),
                            row: label.clone(),
                        });
                    }
                    let sum: f64 = pmf.iter().sum();
                    if (sum - 1.0).abs() > 1e-9 {
                        errors.push(StructuralError::CptRowSum {
                            node: node_s.clone(),
                            row: label,
                            sum,
                        });
                    }
                }
            }
            Mechanism::LinearGaussian {
                weights,
                intercept,
                noise_std,
            } => {
                if !noise_std.is_finite() || *noise_std < 0.0 {
                    errors.push(StructuralError::InvalidParameter {
                        node: node_s.clone(),
                        message: format!("noise std must be finite and >= 0, got {noise_std}"),
                    });
                }
                if !intercept.is_finite() || weights.values().any(|w| !w.is_finite()) {
                    errors.push(StructuralError::InvalidParameter {
                        node: node_s.clone(),
                        message: "linear coefficients must be finite".into(),
                    });
                }
                if *noise_std > 0.0 && matches!(domain, Domain::Discrete(_)) {
                    errors.push(StructuralError::GaussianOnDiscrete { node: node_s });
                }
            }
            Mechanism::Deterministic { expr, noise } => {
                let count = expr.noise_count();
                if count > 1 || (count == 1) != noise.is_some() {
                    errors.push(StructuralError::NoiseCount {
                        node: node_s.clone(),
                        count,
                    });
                }
                if let Some(noise) = noise {
                    if let Some(message) = noise.parameter_error() {
                        errors.push(StructuralError::InvalidParameter {
                            node: node_s.clone(),
                            message,
                        });
                    } else if noise.support().is_none() && matches!(domain, Domain::Discrete(_)) {
                        errors.push(StructuralError::GaussianOnDiscrete { node: node_s });
                    }
                }
            }
            Mechanism::Constant(value) => {
                if !domain.contains(*value) {
                    errors.push(StructuralError::ConstantOutsideDomain {
                        node: node_s,
                        value: *value,
                    });
                }
            }
        }
    }

    /// Returns the model in which every intervened node is forced to its value:
    /// its mechanism becomes a constant and its incoming edges are removed.
    pub fn do_surgery(&self, interventions: &BTreeMap<String, f64>) -> Result<Scm, ScmError> {
        let mut out = self.clone();
        for (node, &value) in interventions {
            let domain = self
                .domains
                .get(node)
                .filter(|_| self.dag.contains(node))
                .ok_or_else(|| ScmError::UnknownNode(node.clone()))?;
            let value = match domain {
                Domain::Discrete(values) => domain
                    .index_of(value)
                    .map(|i| values[i])
                    .ok_or_else(|| ScmError::OutOfDomain {
                        node: node.clone(),
                        value,
                    })?,
                Domain::Continuous if value.is_finite() => value,
                Domain::Continuous => {
                    return Err(ScmError::OutOfDomain {
                        node: node.clone(),
                        value,
                    })
                }
            };
            out.mechanisms.insert(node.clone(), Mechanism::Constant(value));
            out.dag.sever_incoming(node);
        }
        Ok(out)
    }

    /// Convenience wrapper for a single intervention.
    pub fn intervene(&self, node: &str, value: f64) -> Result<Scm, ScmError> {
        self.do_surgery(&BTreeMap::from([(node.to_string(), value)]))
    }
}

/// Structural equality: same nodes, edges, mechanisms and domains, regardless
/// of declaration order.
impl PartialEq for Scm {
    fn eq(&self, other: &Self) -> bool {
        self.dag == other.dag && self.mechanisms == other.mechanisms && self.domains == other.domains
    }
}

/// All assignments of the given domains, last variable varying fastest.
pub fn cross_product(domains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for d in domains {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                d.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(*v);
                    p
                })
            })
            .collect();
    }
    out
}

fn format_row(parents: &[String], row: &[ordered_float::OrderedFloat<f64>]) -> String {
    if parents.is_empty() {
        return "(root)".into();
    }
    parents
        .iter()
        .zip(row)
        .map(|(p, v)| format!("{p}={}", v.0))
        .collect::<Vec<_>>()
        .join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> Scm {
        Scm::from_nodes([
            ("u", Domain::binary(), Mechanism::DiscreteCpt(Cpt::root(vec![0.7, 0.3]))),
            (
                "v",
                Domain::binary(),
                Mechanism::DiscreteCpt(Cpt::new(
                    vec!["u".into()],
                    vec![(vec![0.0], vec![1.0, 0.0]), (vec![1.0], vec![0.0, 1.0])],
                )),
            ),
        ])
        .unwrap()
    }

    pub(crate) fn confounder() -> Scm {
        let cpt = |parents: &[&str], rows: Vec<(Vec<f64>, f64)>| {
            Mechanism::DiscreteCpt(Cpt::new(
                parents.iter().map(|s| s.to_string()).collect(),
                rows.into_iter().map(|(k, p)| (k, vec![1.0 - p, p])).collect(),
            ))
        };
        Scm::from_nodes([
            ("x", Domain::binary(), cpt(&[], vec![(vec![], 0.5)])),
            ("a", Domain::binary(), cpt(&["x"], vec![(vec![0.0], 0.2), (vec![1.0], 0.8)])),
            (
                "y",
                Domain::binary(),
                cpt(
                    &["a", "x"],
                    vec![
                        (vec![0.0, 0.0], 0.1),
                        (vec![0.0, 1.0], 0.6),
                        (vec![1.0, 0.0], 0.4),
                        (vec![1.0, 1.0], 0.9),
                    ],
                ),
            ),
        ])
        .unwrap()
    }

    #[test]
    fn well_formed_chain_validates() {
        assert!(chain().validate().is_empty());
    }

    #[test]
    fn cpt_row_sum_error_names_the_row() {
        let bad = Scm::from_nodes([(
            "u",
            Domain::binary(),
            Mechanism::DiscreteCpt(Cpt::root(vec![0.5, 0.4])),
        )]);
        match bad {
            Err(ScmError::InvalidModel(errors)) => {
                assert!(matches!(&errors[..], [StructuralError::CptRowSum { row, .. }] if row == "(root)"));
            }
            other => panic!("expected row-sum error, got {other:?}"),
        }
    }

    #[test]
    fn missing_cpt_row_is_reported() {
        let bad = Scm::from_nodes([
            ("u", Domain::binary(), Mechanism::DiscreteCpt(Cpt::root(vec![0.5, 0.5]))),
            (
                "v",
                Domain::binary(),
                Mechanism::DiscreteCpt(Cpt::new(vec!["u".into()], vec![(vec![0.0], vec![0.5, 0.5])])),
            ),
        ]);
        let Err(ScmError::InvalidModel(errors)) = bad else {
            panic!("expected error")
        };
        assert!(errors
            .iter()
            .any(|e| matches!(e, StructuralError::CptMissingRow { row, .. } if row == "u=1")));
    }

    #[test]
    fn cyclic_model_is_rejected() {
        let m = |p: &str| Mechanism::from_expr(Expr::var(p), None);
        let scm = Scm::from_parts(
            Dag::from_edges(&["u", "v"], &[("u", "v"), ("v", "u")]),
            BTreeMap::from([("u".to_string(), m("v")), ("v".to_string(), m("u"))]),
            BTreeMap::from([
                ("u".to_string(), Domain::Continuous),
                ("v".to_string(), Domain::Continuous),
            ]),
        );
        let errors = scm.validate();
        assert!(errors.iter().any(|e| matches!(e, StructuralError::Cycle { nodes } if nodes.len() == 2)));
    }

    #[test]
    fn negative_std_rejected_at_validation() {
        let scm = Scm::from_nodes([(
            "u",
            Domain::Continuous,
            Mechanism::LinearGaussian {
                weights: BTreeMap::new(),
                intercept: 0.0,
                noise_std: -1.0,
            },
        )]);
        assert!(matches!(scm, Err(ScmError::InvalidModel(_))));
    }

    #[test]
    fn surgery_severs_incoming_edges() {
        let scm = confounder();
        let cut = scm.intervene("a", 1.0).unwrap();
        assert_eq!(cut.dag(), &Dag::from_edges(&["x", "a", "y"], &[("x", "y"), ("a", "y")]));
        assert_eq!(cut.mechanism("a"), Some(&Mechanism::Constant(1.0)));
        assert_eq!(cut.mechanism("y"), scm.mechanism("y"));
        assert!(cut.validate().is_empty());
        // input untouched
        assert!(scm.dag().has_edge("x", "a"));
    }

    #[test]
    fn surgery_on_root_keeps_edges() {
        let scm = confounder();
        let cut = scm.intervene("x", 0.0).unwrap();
        assert_eq!(cut.dag().edges(), scm.dag().edges());
        assert_eq!(cut.mechanism("x"), Some(&Mechanism::Constant(0.0)));
    }

    #[test]
    fn surgery_on_action_and_confounder() {
        let scm = confounder();
        let both = BTreeMap::from([("a".to_string(), 1.0), ("x".to_string(), 0.0)]);
        let cut = scm.do_surgery(&both).unwrap();
        let s = cut.dag().structure().unwrap();
        assert_eq!(s.parents["y"], scm.dag().parents("y"));
        assert!(s.parents["a"].is_empty());
        assert_eq!(cut.mechanism("x"), Some(&Mechanism::Constant(0.0)));
        assert_eq!(cut.mechanism("a"), Some(&Mechanism::Constant(1.0)));
    }

    #[test]
    fn surgery_errors() {
        let scm = confounder();
        assert_eq!(scm.intervene("q", 1.0), Err(ScmError::UnknownNode("q".into())));
        assert!(matches!(scm.intervene("a", 2.0), Err(ScmError::OutOfDomain { .. })));
    }

    #[test]
    fn surgery_is_idempotent_and_commutes() {
        let scm = confounder();
        let once = scm.intervene("a", 1.0).unwrap();
        assert_eq!(once.intervene("a", 1.0).unwrap(), once);
        let ax = once.intervene("x", 0.0).unwrap();
        let xa = scm.intervene("x", 0.0).unwrap().intervene("a", 1.0).unwrap();
        assert_eq!(ax, xa);
    }
}
