use std::collections::BTreeSet;

use serde::Serialize;

use super::{Dag, ScmError};

/// Path enumeration is exponential in graph size.
pub const MAX_PATH_NODES: usize = 16;

/// Role of an interior node on an undirected path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MiddleRole {
    /// `p → w → n` or `p ← w ← n`
    ChainMediator,
    /// `p ← w → n`
    ForkConfounder,
    /// `p → w ← n`
    Collider,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PathStatus {
    Open,
    Blocked,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Path {
    pub nodes: Vec<String>,
    /// `forward[i]` is true when the i-th edge points from `nodes[i]` to `nodes[i+1]`.
    pub forward: Vec<bool>,
    /// Classification of `nodes[1..len-1]`, in order.
    pub roles: Vec<MiddleRole>,
    pub status: PathStatus,
    /// Interior nodes that block the path.
    pub blocked_by: Vec<String>,
    pub causal: bool,
}

impl Path {
    /// Arrow notation, e.g. `a <- x -> y`.
    pub fn render(&self) -> String {
        let mut s = self.nodes[0].clone();
        for (n, fwd) in self.nodes[1..].iter().zip(&self.forward) {
            s.push_str(if *fwd { " -> " } else { " <- " });
            s.push_str(n);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PathReport {
    pub paths: Vec<Path>,
    pub d_separated: bool,
}

impl PathReport {
    pub fn open_paths(&self) -> impl Iterator<Item = &Path> {
        self.paths.iter().filter(|p| p.status == PathStatus::Open)
    }
}

/// Enumerates every simple undirected path between `u` and `v` and decides
/// whether each is blocked given the `observed` set.
///
/// A chain or fork node blocks when observed; a collider blocks unless it or
/// one of its descendants is observed.
pub fn classify_paths(
    dag: &Dag,
    u: &str,
    v: &str,
    observed: &BTreeSet<String>,
) -> Result<PathReport, ScmError> {
    if dag.len() > MAX_PATH_NODES {
        return Err(ScmError::TooManyNodes {
            max: MAX_PATH_NODES,
            got: dag.len(),
        });
    }
    let errors = dag.validate();
    if !errors.is_empty() {
        return Err(ScmError::InvalidGraph(errors));
    }
    for n in std::iter::once(u).chain(std::iter::once(v)).chain(observed.iter().map(String::as_str)) {
        if !dag.contains(n) {
            return Err(ScmError::UnknownNode(n.to_string()));
        }
    }
    if u == v {
        return Err(ScmError::InvalidQuery("endpoints must differ".into()));
    }
    if observed.contains(u) || observed.contains(v) {
        return Err(ScmError::InvalidQuery("endpoints must not be observed".into()));
    }

    let mut raw = Vec::new();
    let mut stack = vec![u.to_string()];
    let mut dirs = Vec::new();
    walk(dag, v, &mut stack, &mut dirs, &mut raw);

    let paths: Vec<Path> = raw
        .into_iter()
        .map(|(nodes, forward)| classify(dag, nodes, forward, observed))
        .collect();
    let d_separated = paths.iter().all(|p| p.status == PathStatus::Blocked);
    Ok(PathReport { paths, d_separated })
}

pub fn d_separated(dag: &Dag, u: &str, v: &str, observed: &BTreeSet<String>) -> Result<bool, ScmError> {
    classify_paths(dag, u, v, observed).map(|r| r.d_separated)
}

fn walk(
    dag: &Dag,
    target: &str,
    stack: &mut Vec<String>,
    dirs: &mut Vec<bool>,
    out: &mut Vec<(Vec<String>, Vec<bool>)>,
) {
    let here = stack.last().unwrap().clone();
    if here == target {
        out.push((stack.clone(), dirs.clone()));
        return;
    }
    let steps = dag
        .children(&here)
        .into_iter()
        .map(|c| (c, true))
        .chain(dag.parents(&here).into_iter().map(|p| (p, false)));
    for (next, fwd) in steps {
        if stack.contains(&next) {
            continue;
        }
        stack.push(next);
        dirs.push(fwd);
        walk(dag, target, stack, dirs, out);
        stack.pop();
        dirs.pop();
    }
}

fn classify(dag: &Dag, nodes: Vec<String>, forward: Vec<bool>, observed: &BTreeSet<String>) -> Path {
    let mut roles = Vec::new();
    let mut blocked_by = Vec::new();
    for i in 1..nodes.len() - 1 {
        let w = &nodes[i];
        let into_w_from_prev = forward[i - 1];
        let into_w_from_next = !forward[i];
        let role = match (into_w_from_prev, into_w_from_next) {
            (true, true) => MiddleRole::Collider,
            (false, false) => MiddleRole::ForkConfounder,
            _ => MiddleRole::ChainMediator,
        };
        let blocks = match role {
            MiddleRole::Collider => {
                !observed.contains(w) && dag.descendants(w).is_disjoint(observed)
            }
            _ => observed.contains(w),
        };
        if blocks {
            blocked_by.push(w.clone());
        }
        roles.push(role);
    }
    let status = if blocked_by.is_empty() {
        PathStatus::Open
    } else {
        PathStatus::Blocked
    };
    let causal = status == PathStatus::Open && forward.iter().all(|f| *f);
    Path {
        nodes,
        forward,
        roles,
        status,
        blocked_by,
        causal,
    }
}
