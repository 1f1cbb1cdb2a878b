use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{ScmError, StructuralError};

/// Directed graph over named variables.
///
/// Construction does not enforce acyclicity; call [`Dag::validate`] or any
/// order-dependent query, which reject cyclic input.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Dag {
    nodes: Vec<String>,
    edges: BTreeSet<(String, String)>,
}

/// Topological order plus parent/child adjacency for a validated DAG.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Structure {
    pub order: Vec<String>,
    pub parents: BTreeMap<String, BTreeSet<String>>,
    pub children: BTreeMap<String, BTreeSet<String>>,
}

impl Dag {
    pub fn new<N, E>(nodes: N, edges: E) -> Self
    where
        N: IntoIterator,
        N::Item: Into<String>,
        E: IntoIterator<Item = (String, String)>,
    {
        Dag {
            nodes: nodes.into_iter().map(Into::into).collect(),
            edges: edges.into_iter().collect(),
        }
    }

    /// Convenience constructor for tests and fixtures: `Dag::from_edges(&["x", "a"], &[("x", "a")])`.
    pub fn from_edges(nodes: &[&str], edges: &[(&str, &str)]) -> Self {
        Dag::new(
            nodes.iter().copied(),
            edges.iter().map(|(s, t)| (s.to_string(), t.to_string())),
        )
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeSet<(String, String)> {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, node: &str) -> bool {
        self.nodes.iter().any(|n| n == node)
    }

    pub fn has_edge(&self, source: &str, target: &str) -> bool {
        self.edges
            .contains(&(source.to_string(), target.to_string()))
    }

    pub fn parents(&self, node: &str) -> BTreeSet<String> {
        self.edges
            .iter()
            .filter(|(_, t)| t == node)
            .map(|(s, _)| s.clone())
            .collect()
    }

    pub fn children(&self, node: &str) -> BTreeSet<String> {
        self.edges
            .iter()
            .filter(|(s, _)| s == node)
            .map(|(_, t)| t.clone())
            .collect()
    }

    /// Strict descendants of `node`.
    pub fn descendants(&self, node: &str) -> BTreeSet<String> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![node.to_string()];
        while let Some(n) = stack.pop() {
            for c in self.children(&n) {
                if seen.insert(c.clone()) {
                    stack.push(c);
                }
            }
        }
        seen
    }

    /// Strict ancestors of `node`.
    pub fn ancestors(&self, node: &str) -> BTreeSet<String> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![node.to_string()];
        while let Some(n) = stack.pop() {
            for p in self.parents(&n) {
                if seen.insert(p.clone()) {
                    stack.push(p);
                }
            }
        }
        seen
    }

    /// Removes every edge pointing into `node`.
    pub(crate) fn sever_incoming(&mut self, node: &str) {
        self.edges.retain(|(_, t)| t != node);
    }

    /// Every violation of the DAG invariants.
    pub fn validate(&self) -> Vec<StructuralError> {
        let mut errors = Vec::new();
        let mut seen = BTreeSet::new();
        for n in &self.nodes {
            if !seen.insert(n.as_str()) {
                errors.push(StructuralError::DuplicateNode { node: n.clone() });
            }
        }
        for (s, t) in &self.edges {
            for end in [s, t] {
                if !seen.contains(end.as_str()) {
                    errors.push(StructuralError::UnknownEdgeEndpoint {
                        from: s.clone(),
                        to: t.clone(),
                        missing: end.clone(),
                    });
                }
            }
            if s == t {
                errors.push(StructuralError::SelfLoop { node: s.clone() });
            }
        }
        if let Some(cycle) = self.find_cycle() {
            errors.push(StructuralError::Cycle { nodes: cycle });
        }
        errors
    }

    /// Nodes of one directed cycle (self-loops excluded), if any exists.
    fn find_cycle(&self) -> Option<Vec<String>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            White,
            Grey,
            Black,
        }
        let mut mark: BTreeMap<&str, Mark> =
            self.nodes.iter().map(|n| (n.as_str(), Mark::White)).collect();
        let children: BTreeMap<&str, Vec<&str>> = self
            .nodes
            .iter()
            .map(|n| {
                let cs = self
                    .edges
                    .iter()
                    .filter(|(s, t)| s == n && t != n)
                    .map(|(_, t)| t.as_str())
                    .collect();
                (n.as_str(), cs)
            })
            .collect();

        let roots: Vec<&str> = self.nodes.iter().map(String::as_str).collect();
        for root in roots {
            if mark.get(root) != Some(&Mark::White) {
                continue;
            }
            // iterative DFS keeping the grey path
            let mut path: Vec<(&str, usize)> = vec![(root, 0)];
            mark.insert(root, Mark::Grey);
            while let Some(&mut (node, ref mut next)) = path.last_mut() {
                let cs = children.get(node).map(Vec::as_slice).unwrap_or(&[]);
                if *next < cs.len() {
                    let child = cs[*next];
                    *next += 1;
                    match mark.get(child).copied() {
                        Some(Mark::White) => {
                            mark.insert(child, Mark::Grey);
                            path.push((child, 0));
                        }
                        Some(Mark::Grey) => {
                            let start = path.iter().position(|(n, _)| *n == child).unwrap();
                            return Some(path[start..].iter().map(|(n, _)| n.to_string()).collect());
                        }
                        _ => {}
                    }
                } else {
                    mark.insert(node, Mark::Black);
                    path.pop();
                }
            }
        }
        None
    }

    /// Kahn's algorithm; ties are broken by node name so the order does not
    /// depend on insertion order.
    pub fn topological_order(&self) -> Result<Vec<String>, ScmError> {
        let errors = self.validate();
        if !errors.is_empty() {
            return Err(ScmError::InvalidGraph(errors));
        }
        let mut indegree: BTreeMap<&str, usize> =
            self.nodes.iter().map(|n| (n.as_str(), 0)).collect();
        for (_, t) in &self.edges {
            *indegree.get_mut(t.as_str()).unwrap() += 1;
        }
        let mut ready: BTreeSet<&str> = indegree
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(n, _)| *n)
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(n) = ready.pop_first() {
            order.push(n.to_string());
            for (s, t) in &self.edges {
                if s == n {
                    let d = indegree.get_mut(t.as_str()).unwrap();
                    *d -= 1;
                    if *d == 0 {
                        ready.insert(t.as_str());
                    }
                }
            }
        }
        Ok(order)
    }

    pub fn structure(&self) -> Result<Structure, ScmError> {
        let order = self.topological_order()?;
        let parents = self
            .nodes
            .iter()
            .map(|n| (n.clone(), self.parents(n)))
            .collect();
        let children = self
            .nodes
            .iter()
            .map(|n| (n.clone(), self.children(n)))
            .collect();
        Ok(Structure {
            order,
            parents,
            children,
        })
    }
}

/// Graphs are equal when they have the same node set and edge set.
impl PartialEq for Dag {
    fn eq(&self, other: &Self) -> bool {
        let a: BTreeSet<&String> = self.nodes.iter().collect();
        let b: BTreeSet<&String> = other.nodes.iter().collect();
        a == b && self.edges == other.edges
    }
}

impl Eq for Dag {}
