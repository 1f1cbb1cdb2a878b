//! Forward sampling from a model, rejection conditioning and empirical tables.

mod dataset;
mod rng;

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dsl::serialize_scm;
use crate::exact::DistTable;
use crate::scm::{Domain, Mechanism, NoiseSpec, Scm, ScmError, VALUE_TOLERANCE};

pub use dataset::{DataError, Dataset};
pub use rng::{RngSpec, DEFAULT_SEED, RNG_ALGORITHM};

pub(crate) use rng::fnv1a;

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error(transparent)]
    Scm(#[from] ScmError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("node `{node}` produced {value}, which is outside its domain")]
    OutOfDomain { node: String, value: f64 },
    #[error("accepted {accepted} of {requested} rows after {draws} draws; the evidence may have probability zero")]
    BudgetExhausted {
        accepted: usize,
        requested: usize,
        draws: usize,
    },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` is continuous")]
    ContinuousVariable(String),
    #[error("{0}")]
    Table(String),
    #[error("invalid smoothing pseudo-count {0}")]
    BadSmoothing(f64),
}

/// Pre-validated model in topological order, ready to draw rows from.
#[derive(Debug, Clone)]
pub struct Sampler {
    order: Vec<String>,
    nodes: Vec<NodePlan>,
}

#[derive(Debug, Clone)]
struct NodePlan {
    mechanism: Mechanism,
    domain: Domain,
    /// Positions of the mechanism's parents in `order`, aligned with `parents`.
    parent_pos: Vec<usize>,
    parents: Vec<String>,
}

impl Sampler {
    pub fn new(scm: &Scm) -> Result<Self, SamplingError> {
        let errors = scm.validate();
        if !errors.is_empty() {
            return Err(ScmError::InvalidModel(errors).into());
        }
        let order = scm.dag().topological_order()?;
        let nodes = order
            .iter()
            .map(|n| {
                let mechanism = scm.mechanism(n).expect("validated").clone();
                let parents: Vec<String> = mechanism.parents().into_iter().collect();
                let parent_pos = parents
                    .iter()
                    .map(|p| order.iter().position(|o| o == p).expect("validated"))
                    .collect();
                NodePlan {
                    mechanism,
                    domain: scm.domain(n).expect("validated").clone(),
                    parent_pos,
                    parents,
                }
            })
            .collect();
        Ok(Sampler { order, nodes })
    }

    /// Node names in sampling order; also the column order of sampled rows.
    pub fn order(&self) -> &[String] {
        &self.order
    }

    /// Draws row `row` of the stream defined by `rng`. Every node uses its own
    /// derived generator, keyed by (seed, row, node name).
    pub fn sample_row(&self, rng: &RngSpec, row: u64) -> Result<Vec<f64>, SamplingError> {
        let mut values = Vec::with_capacity(self.order.len());
        for (name, plan) in self.order.iter().zip(&self.nodes) {
            let mut r = rng.stream(row, name);
            let pa: Vec<f64> = plan.parent_pos.iter().map(|&i| values[i]).collect();
            let v = draw(plan, &pa, &mut r);
            let v = snap(&plan.domain, v).ok_or_else(|| SamplingError::OutOfDomain {
                node: name.clone(),
                value: v,
            })?;
            values.push(v);
        }
        Ok(values)
    }

    fn rows(&self, rng: &RngSpec, range: std::ops::Range<u64>) -> Result<Vec<Vec<f64>>, SamplingError> {
        range
            .into_par_iter()
            .map(|r| self.sample_row(rng, r))
            .collect()
    }
}

fn draw<R: Rng>(plan: &NodePlan, pa: &[f64], rng: &mut R) -> f64 {
    match &plan.mechanism {
        Mechanism::DiscreteCpt(cpt) => {
            let pmf = cpt.row(pa).expect("validated CPT covers all parent rows");
            let values = plan.domain.values().expect("validated discrete");
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (v, p) in values.iter().zip(pmf) {
                acc += p;
                if u < acc {
                    return *v;
                }
            }
            // u fell in the rounding gap above the cumulative sum
            let last = pmf.iter().rposition(|p| *p > 0.0).unwrap_or(values.len() - 1);
            values[last]
        }
        Mechanism::LinearGaussian {
            weights,
            intercept,
            noise_std,
        } => {
            let mean = intercept
                + weights
                    .values()
                    .zip(pa)
                    .map(|(w, x)| w * x)
                    .sum::<f64>();
            if *noise_std > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                mean + noise_std * z
            } else {
                mean
            }
        }
        Mechanism::Deterministic { expr, noise } => {
            let eps = noise.as_ref().map_or(0.0, |n| draw_noise(n, rng));
            let lookup = |name: &str| {
                let i = plan.parents.iter().position(|p| p == name).expect("parent listed");
                pa[i]
            };
            expr.eval(&lookup, eps)
        }
        Mechanism::Constant(c) => *c,
    }
}

fn draw_noise<R: Rng>(spec: &NoiseSpec, rng: &mut R) -> f64 {
    match spec {
        NoiseSpec::Normal { mean, std } => {
            let z: f64 = rng.sample(StandardNormal);
            mean + std * z
        }
        NoiseSpec::Bernoulli { p } => {
            if rng.random::<f64>() < *p {
                1.0
            } else {
                0.0
            }
        }
        NoiseSpec::Uniform { values } => values[rng.random_range(0..values.len())],
        NoiseSpec::Point { value } => *value,
    }
}

/// Maps a computed value onto the exact domain element it matches.
fn snap(domain: &Domain, v: f64) -> Option<f64> {
    match domain {
        Domain::Continuous => v.is_finite().then_some(v),
        Domain::Discrete(values) => domain.index_of(v).map(|i| values[i]),
    }
}

/// Short stable fingerprint of a model's canonical text.
pub fn model_hash(scm: &Scm) -> String {
    format!("{:016x}", fnv1a(serialize_scm(scm).as_bytes()))
}

/// `n` independent rows drawn parent-first. Columns are in topological order.
pub fn ancestral_sample(scm: &Scm, n: usize, rng: &RngSpec) -> Result<Dataset, SamplingError> {
    let sampler = Sampler::new(scm)?;
    let rows = sampler.rows(rng, 0..n as u64)?;
    let mut ds = Dataset::new(sampler.order().iter().cloned())?;
    for r in &rows {
        ds.push_row(r)?;
    }
    ds.add_provenance(format!(
        "ancestral n={n} seed={} rng={} model={}",
        rng.seed,
        rng.algorithm,
        model_hash(scm)
    ));
    Ok(ds)
}

/// Evidence test applied to one sampled value.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Predicate {
    /// Equal within the domain tolerance.
    Eq { value: f64 },
    /// `lo <= v <= hi`; either bound may be infinite.
    Interval { lo: f64, hi: f64 },
}

impl Predicate {
    pub fn holds(&self, v: f64) -> bool {
        match self {
            Predicate::Eq { value } => (v - value).abs() <= VALUE_TOLERANCE,
            Predicate::Interval { lo, hi } => *lo <= v && v <= *hi,
        }
    }
}

impl std::fmt::Display for Predicate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Predicate::Eq { value } => write!(f, "={value}"),
            Predicate::Interval { lo, hi } => write!(f, " in [{lo}, {hi}]"),
        }
    }
}

/// Keeps drawing rows of the ancestral stream and retains those satisfying all
/// of `evidence`, until `n_accepted` rows are kept or `max_draws` are spent.
/// When every row is accepted the output equals [`ancestral_sample`].
pub fn rejection_condition(
    scm: &Scm,
    evidence: &BTreeMap<String, Predicate>,
    n_accepted: usize,
    rng: &RngSpec,
    max_draws: usize,
) -> Result<Dataset, SamplingError> {
    let sampler = Sampler::new(scm)?;
    let checks: Vec<(usize, &Predicate)> = evidence
        .iter()
        .map(|(k, p)| {
            sampler
                .order()
                .iter()
                .position(|o| o == k)
                .map(|i| (i, p))
                .ok_or_else(|| SamplingError::UnknownVariable(k.clone()))
        })
        .collect::<Result<_, _>>()?;
    let mut ds = Dataset::new(sampler.order().iter().cloned())?;
    let mut draws = 0usize;
    const BATCH: usize = 8192;
    while ds.n_rows() < n_accepted && draws < max_draws {
        let end = (draws + BATCH).min(max_draws);
        let batch = sampler.rows(rng, draws as u64..end as u64)?;
        for row in batch {
            draws += 1;
            if checks.iter().all(|(i, p)| p.holds(row[*i])) {
                ds.push_row(&row)?;
                if ds.n_rows() == n_accepted {
                    break;
                }
            }
        }
    }
    if ds.n_rows() < n_accepted {
        return Err(SamplingError::BudgetExhausted {
            accepted: ds.n_rows(),
            requested: n_accepted,
            draws,
        });
    }
    let shown: Vec<String> = evidence.iter().map(|(k, p)| format!("{k}{p}")).collect();
    let rate = if draws == 0 { 1.0 } else { n_accepted as f64 / draws as f64 };
    ds.add_provenance(format!(
        "rejection n={n_accepted} draws={draws} acceptance_rate={rate} evidence=[{}] seed={} rng={} model={}",
        shown.join("; "),
        rng.seed,
        rng.algorithm,
        model_hash(scm)
    ));
    Ok(ds)
}

/// Acceptance rate recorded by [`rejection_condition`], if present.
pub fn acceptance_rate(ds: &Dataset) -> Option<f64> {
    ds.provenance().iter().find_map(|p| {
        p.split_whitespace()
            .find_map(|w| w.strip_prefix("acceptance_rate="))
            .and_then(|v| v.parse().ok())
    })
}

/// Smoothed frequency table: `(count(c) + α) / (N + α·K)` where K is the
/// number of joint assignments. With α = 0 this is the maximum-likelihood table.
pub fn fit_table(
    data: &Dataset,
    variables: &[&str],
    domains: &BTreeMap<String, Domain>,
    alpha: f64,
) -> Result<DistTable, SamplingError> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(SamplingError::BadSmoothing(alpha));
    }
    let mut cols = Vec::new();
    let mut doms = Vec::new();
    for v in variables {
        let col = data
            .column(v)
            .ok_or_else(|| SamplingError::UnknownVariable(v.to_string()))?;
        let dom = match domains.get(*v) {
            Some(d @ Domain::Discrete(values)) => (d, values.clone()),
            Some(Domain::Continuous) => return Err(SamplingError::ContinuousVariable(v.to_string())),
            None => return Err(SamplingError::UnknownVariable(v.to_string())),
        };
        cols.push(col);
        doms.push(dom);
    }
    let size: usize = doms.iter().map(|(_, v)| v.len()).product();
    let mut counts = vec![0u64; size];
    for r in 0..data.n_rows() {
        let mut idx = 0;
        for (k, (col, (dom, values))) in cols.iter().zip(&doms).enumerate() {
            let i = dom.index_of(col[r]).ok_or_else(|| SamplingError::OutOfDomain {
                node: variables[k].to_string(),
                value: col[r],
            })?;
            idx = idx * values.len() + i;
        }
        counts[idx] += 1;
    }
    let denom = data.n_rows() as f64 + alpha * size as f64;
    let probs = if denom > 0.0 {
        counts.iter().map(|c| (*c as f64 + alpha) / denom).collect()
    } else {
        // no rows and no prior mass: fall back to uniform
        vec![1.0 / size as f64; size]
    };
    DistTable::new(
        variables.iter().map(|s| s.to_string()).collect(),
        doms.into_iter().map(|(_, v)| v).collect(),
        probs,
    )
    .map_err(|e| SamplingError::Table(e.to_string()))
}
