use std::collections::BTreeMap;

use ordered_float::OrderedFloat;

use super::{cell_key, complete_rows, covariate_columns, fit_columns, EstimateError, LinearModel};
use crate::sampling::Dataset;
use crate::scm::{key, ValueKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeKind {
    /// Mean outcome per (covariate cell, action).
    Table,
    /// One least-squares fit on the covariates per action value.
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeFit {
    Table(BTreeMap<(ValueKey, OrderedFloat<f64>), f64>),
    Linear(BTreeMap<OrderedFloat<f64>, LinearModel>),
    Constant(f64),
}

/// Predicts `E[y | a, x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeModel {
    pub covariates: Vec<String>,
    pub fit: OutcomeFit,
}

impl OutcomeModel {
    pub fn constant(value: f64) -> Self {
        OutcomeModel {
            covariates: Vec::new(),
            fit: OutcomeFit::Constant(value),
        }
    }

    /// Known means, one entry per (covariate values, action, mean outcome).
    pub fn from_table<S: AsRef<str>>(covariates: &[S], entries: &[(Vec<f64>, f64, f64)]) -> Self {
        OutcomeModel {
            covariates: covariates.iter().map(|s| s.as_ref().to_string()).collect(),
            fit: OutcomeFit::Table(
                entries
                    .iter()
                    .map(|(x, a, y)| ((key(x), OrderedFloat(*a)), *y))
                    .collect(),
            ),
        }
    }

    /// `None` when the (cell, action) pair was never observed.
    pub fn predict(&self, arm: f64, x: &[f64]) -> Option<f64> {
        match &self.fit {
            OutcomeFit::Constant(c) => Some(*c),
            OutcomeFit::Table(t) => t.get(&(key(x), OrderedFloat(arm))).copied(),
            OutcomeFit::Linear(m) => m.get(&OrderedFloat(arm)).map(|m| m.predict(x)),
        }
    }
}

/// Fits the outcome model on rows where action, outcome and covariates are present.
pub fn fit_outcome_model<S: AsRef<str>>(
    data: &Dataset,
    action: &str,
    outcome: &str,
    covariates: &[S],
    kind: OutcomeKind,
) -> Result<OutcomeModel, EstimateError> {
    let names: Vec<String> = covariates.iter().map(|s| s.as_ref().to_string()).collect();
    let a = data.require(action)?;
    let y = data.require(outcome)?;
    let cols = covariate_columns(data, &names)?;
    let mut all = cols.clone();
    all.push(a);
    all.push(y);
    let rows = complete_rows(&all);
    let fit = match kind {
        OutcomeKind::Table => {
            let mut sums: BTreeMap<(ValueKey, OrderedFloat<f64>), (f64, usize)> = BTreeMap::new();
            for &r in &rows {
                let e = sums.entry((cell_key(&cols, r), OrderedFloat(a[r]))).or_default();
                e.0 += y[r];
                e.1 += 1;
            }
            OutcomeFit::Table(sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect())
        }
        OutcomeKind::Linear => {
            let mut by_arm: BTreeMap<OrderedFloat<f64>, Vec<usize>> = BTreeMap::new();
            for &r in &rows {
                by_arm.entry(OrderedFloat(a[r])).or_default().push(r);
            }
            let mut models = BTreeMap::new();
            for (arm, idx) in by_arm {
                let xs: Vec<Vec<f64>> = cols.iter().map(|c| idx.iter().map(|&r| c[r]).collect()).collect();
                let ys: Vec<f64> = idx.iter().map(|&r| y[r]).collect();
                models.insert(arm, fit_columns(&names, &xs, &ys, 0.0)?);
            }
            OutcomeFit::Linear(models)
        }
    };
    Ok(OutcomeModel { covariates: names, fit })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_and_linear() {
        let ds = Dataset::from_columns([
            ("x", vec![0.0, 0.0, 1.0, 1.0, 0.0, 1.0]),
            ("a", vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]),
            ("y", vec![1.0, 3.0, 5.0, 7.0, 4.0, 9.0]),
        ])
        .unwrap();
        let t = fit_outcome_model(&ds, "a", "y", &["x"], OutcomeKind::Table).unwrap();
        assert_eq!(t.predict(0.0, &[0.0]), Some(2.0));
        assert_eq!(t.predict(1.0, &[1.0]), Some(8.0));
        assert_eq!(t.predict(1.0, &[2.0]), None);
        let l = fit_outcome_model(&ds, "a", "y", &["x"], OutcomeKind::Linear).unwrap();
        // arm 0: points (0,1),(0,3),(1,5) → slope 3, intercept 2
        assert!((l.predict(0.0, &[1.0]).unwrap() - 5.0).abs() < 1e-12);
        assert!((l.predict(0.0, &[0.0]).unwrap() - 2.0).abs() < 1e-12);
        let none: [&str; 0] = [];
        let m = fit_outcome_model(&ds, "a", "y", &none, OutcomeKind::Linear).unwrap();
        assert!((m.predict(1.0, &[]).unwrap() - 20.0 / 3.0).abs() < 1e-12);
    }
}
