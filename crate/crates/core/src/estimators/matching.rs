use std::borrow::Cow;
use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::Rng;

use super::{cell_key, complete_rows, covariate_columns, format_cell, require_binary, EffectSpec, EstimateError, EstimateReport, Method};
use crate::sampling::{Dataset, RngSpec};
use crate::scm::ValueKey;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distance {
    Euclidean,
    Manhattan,
    Chebyshev,
}

impl Distance {
    pub fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        let d = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match self {
            Distance::Euclidean => d.map(|v| v * v).sum::<f64>().sqrt(),
            Distance::Manhattan => d.sum(),
            Distance::Chebyshev => d.fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatchMode {
    /// Candidates share the query row's covariate values exactly.
    Exact,
    /// Candidates lie strictly within `epsilon` of the query row.
    Epsilon { distance: Distance, epsilon: f64 },
}

/// How candidates are drawn from a pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    /// Uniformly at random; without replacement within one pick when the pool
    /// is large enough.
    Random,
    /// Cycle through the pool (ordered by distance, then row index), keeping
    /// one cursor per covariate cell and arm.
    RoundRobin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchOptions {
    /// Rows drawn per query row for the treated and control arm.
    pub ratio: (usize, usize),
    pub mode: MatchMode,
    pub selection: Selection,
    pub rng: RngSpec,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions {
            ratio: (1, 1),
            mode: MatchMode::Exact,
            selection: Selection::Random,
            rng: RngSpec::default(),
        }
    }
}

const MAX_LISTED_CELLS: usize = 20;

/// Rebalances the data so every covariate value carries the target arm ratio,
/// then contrasts the simple arm means of the rebalanced rows.
///
/// For each row, `ratio.0` treated and `ratio.1` control rows are drawn from
/// the rows matching its covariates. The covariate distribution of the output
/// therefore equals that of the input, and the action is independent of it.
pub fn estimate_matching(
    data: &Dataset,
    spec: &EffectSpec,
    opts: &MatchOptions,
) -> Result<(Dataset, EstimateReport), EstimateError> {
    if opts.ratio.0 == 0 || opts.ratio.1 == 0 {
        return Err(EstimateError::InvalidArgument("matching ratio must be at least 1 per arm".into()));
    }
    if let MatchMode::Epsilon { epsilon, .. } = opts.mode {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(EstimateError::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
        }
    }
    let a = data.require(&spec.action)?;
    let y = data.require(&spec.outcome)?;
    let cols = covariate_columns(data, &spec.covariates)?;
    let mut all = cols.clone();
    all.extend([a, y]);
    let rows = complete_rows(&all);
    require_binary(&spec.action, &rows.iter().map(|&r| a[r]).collect::<Vec<_>>())?;
    let x_of = |r: usize| -> Vec<f64> { cols.iter().map(|c| c[r]).collect() };

    // pools per arm; for exact mode grouped by cell, for epsilon mode sorted by
    // the first covariate to bound the search window
    let mut cells: [BTreeMap<ValueKey, Vec<usize>>; 2] = Default::default();
    let mut sorted: [Vec<usize>; 2] = Default::default();
    for &r in &rows {
        let arm = a[r] as usize;
        cells[arm].entry(cell_key(&cols, r)).or_default().push(r);
        sorted[arm].push(r);
    }
    if !cols.is_empty() {
        for s in &mut sorted {
            s.sort_by(|&i, &j| cols[0][i].total_cmp(&cols[0][j]).then(i.cmp(&j)));
        }
    }
    let candidates = |arm: usize, q: usize| -> Cow<'_, [usize]> {
        match opts.mode {
            MatchMode::Exact => cells[arm]
                .get(&cell_key(&cols, q))
                .map_or(Cow::Owned(Vec::new()), |v| Cow::Borrowed(v.as_slice())),
            MatchMode::Epsilon { distance, epsilon } => {
                let pool = &sorted[arm];
                let (lo, hi) = if cols.is_empty() {
                    (0, pool.len())
                } else {
                    let x0 = cols[0][q];
                    (
                        pool.partition_point(|&r| cols[0][r] <= x0 - epsilon),
                        pool.partition_point(|&r| cols[0][r] < x0 + epsilon),
                    )
                };
                let xq = x_of(q);
                let mut found: Vec<(f64, usize)> = pool[lo..hi]
                    .iter()
                    .map(|&r| (distance.eval(&xq, &x_of(r)), r))
                    .filter(|(d, _)| *d < epsilon)
                    .collect();
                found.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
                Cow::Owned(found.into_iter().map(|(_, r)| r).collect())
            }
        }
    };

    let targets = [opts.ratio.1, opts.ratio.0];
    let mut picked: Vec<usize> = Vec::with_capacity(rows.len() * (targets[0] + targets[1]));
    let mut cursors: BTreeMap<(ValueKey, usize), usize> = BTreeMap::new();
    let mut uses: BTreeMap<usize, usize> = BTreeMap::new();
    let mut unmatched: BTreeMap<ValueKey, ()> = BTreeMap::new();
    let mut short_pool = false;
    for &q in &rows {
        for arm in [1usize, 0] {
            let k = targets[arm];
            let cand = candidates(arm, q);
            if cand.is_empty() {
                unmatched.insert(cell_key(&cols, q), ());
                continue;
            }
            short_pool |= cand.len() < k;
            let chosen: Vec<usize> = match opts.selection {
                Selection::Random => {
                    let mut rng = opts.rng.stream(q as u64, if arm == 1 { "match-treated" } else { "match-control" });
                    if cand.len() >= k {
                        sample(&mut rng, cand.len(), k).into_iter().map(|i| cand[i]).collect()
                    } else {
                        (0..k).map(|_| cand[rng.random_range(0..cand.len())]).collect()
                    }
                }
                Selection::RoundRobin => {
                    let c = cursors.entry((cell_key(&cols, q), arm)).or_insert(0);
                    let out = (0..k).map(|i| cand[(*c + i) % cand.len()]).collect();
                    *c += k;
                    out
                }
            };
            for r in &chosen {
                *uses.entry(*r).or_default() += 1;
            }
            picked.extend(chosen);
        }
    }
    if !unmatched.is_empty() {
        let mut listed: Vec<String> = unmatched
            .keys()
            .take(MAX_LISTED_CELLS)
            .map(|k| format_cell(&spec.covariates, k))
            .collect();
        if unmatched.len() > MAX_LISTED_CELLS {
            listed.push(format!("and {} more", unmatched.len() - MAX_LISTED_CELLS));
        }
        return Err(EstimateError::UnmatchedCells(listed));
    }
    if rows.is_empty() {
        return Err(EstimateError::InsufficientData("no complete rows to match".into()));
    }

    let mut rebalanced = data.select_rows(&picked);
    rebalanced.add_provenance(format!(
        "matched ratio={}:{} rows={} source_rows={}",
        opts.ratio.0,
        opts.ratio.1,
        picked.len(),
        rows.len()
    ));
    let (mut s, mut n) = ([0.0; 2], [0usize; 2]);
    for &r in &picked {
        let arm = a[r] as usize;
        s[arm] += y[r];
        n[arm] += 1;
    }
    let (m1, m0) = (s[1] / n[1] as f64, s[0] / n[0] as f64);
    let reused = uses.values().filter(|u| **u > 1).count();
    let mut report = EstimateReport::new(Method::Matching, m1 - m0, rows.len())
        .diag("mean_treated", m1)
        .diag("mean_control", m0)
        .diag("rebalanced_rows", picked.len())
        .diag("distinct_rows_used", uses.len())
        .diag("matched_fraction", uses.len() as f64 / rows.len() as f64);
    if reused > 0 || short_pool {
        report.warn(format!("{reused} rows were drawn more than once; matching sampled with replacement"));
    }
    Ok((rebalanced, report))
}
