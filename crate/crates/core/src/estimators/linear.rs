use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{complete_rows, EstimateError};
use crate::sampling::Dataset;

/// Name used for the constant column in rank-deficiency reports.
pub const INTERCEPT: &str = "(intercept)";

/// `y ≈ intercept + Σ weights[f]·f`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearModel {
    pub features: Vec<String>,
    pub weights: BTreeMap<String, f64>,
    pub intercept: f64,
}

impl LinearModel {
    /// Prediction from feature values given in `features` order.
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept
            + self
                .features
                .iter()
                .zip(x)
                .map(|(f, v)| self.weights[f] * v)
                .sum::<f64>()
    }

    pub fn weight(&self, feature: &str) -> f64 {
        self.weights.get(feature).copied().unwrap_or(0.0)
    }

    /// Predictions for every row of `data`.
    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<f64>, EstimateError> {
        let cols: Vec<&[f64]> = self
            .features
            .iter()
            .map(|f| data.require(f))
            .collect::<Result<_, _>>()?;
        Ok((0..data.n_rows())
            .map(|r| {
                let x: Vec<f64> = cols.iter().map(|c| c[r]).collect();
                self.predict(&x)
            })
            .collect())
    }
}

/// Ridge-penalized least squares with an unpenalized intercept, on the rows of
/// `data` where target and features are all present.
pub fn fit_least_squares(
    data: &Dataset,
    target: &str,
    features: &[&str],
    ridge: f64,
) -> Result<LinearModel, EstimateError> {
    let y = data.require(target)?;
    let cols: Vec<&[f64]> = features.iter().map(|f| data.require(f)).collect::<Result<_, _>>()?;
    let mut all = cols.clone();
    all.push(y);
    let rows = complete_rows(&all);
    let pick = |c: &[f64]| -> Vec<f64> { rows.iter().map(|&r| c[r]).collect() };
    let xs: Vec<Vec<f64>> = cols.iter().map(|c| pick(c)).collect();
    let names: Vec<String> = features.iter().map(|s| s.to_string()).collect();
    fit_columns(&names, &xs, &pick(y), ridge)
}

/// Least squares on explicit columns. The fit is done on centered data, which
/// is equivalent to including an unpenalized intercept column.
pub fn fit_columns(names: &[String], xs: &[Vec<f64>], y: &[f64], ridge: f64) -> Result<LinearModel, EstimateError> {
    if !(ridge.is_finite() && ridge >= 0.0) {
        return Err(EstimateError::InvalidArgument(format!("ridge penalty must be >= 0, got {ridge}")));
    }
    let n = y.len();
    if n == 0 {
        return Err(EstimateError::InsufficientData("least squares needs at least one row".into()));
    }
    for (name, c) in names.iter().zip(xs) {
        if c.len() != n {
            return Err(EstimateError::InvalidArgument(format!("column `{name}` has the wrong length")));
        }
    }
    if let Some((name, _)) = names
        .iter()
        .zip(xs)
        .find(|(_, c)| c.iter().any(|v| !v.is_finite()))
    {
        return Err(EstimateError::NonFinite(name.clone()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(EstimateError::NonFinite("target".into()));
    }

    let p = names.len();
    let mean = |c: &[f64]| c.iter().sum::<f64>() / n as f64;
    let x_mean: Vec<f64> = xs.iter().map(|c| mean(c)).collect();
    let y_mean = mean(y);
    if p == 0 {
        return Ok(LinearModel {
            features: Vec::new(),
            weights: BTreeMap::new(),
            intercept: y_mean,
        });
    }
    let xc = DMatrix::from_fn(n, p, |r, j| xs[j][r] - x_mean[j]);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let mut gram = xc.transpose() * &xc;
    let rhs = xc.transpose() * yc;

    if ridge == 0.0 {
        let raw_sq: Vec<f64> = xs.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();
        if let Some(cols) = collinear_columns(&gram, &raw_sq, names) {
            return Err(EstimateError::RankDeficient(cols));
        }
    }
    for j in 0..p {
        gram[(j, j)] += ridge;
    }
    let w = gram
        .clone()
        .cholesky()
        .map(|c| c.solve(&rhs))
        .or_else(|| gram.lu().solve(&rhs))
        .ok_or_else(|| EstimateError::RankDeficient(names.to_vec()))?;
    if w.iter().any(|v| !v.is_finite()) {
        return Err(EstimateError::RankDeficient(names.to_vec()));
    }
    let intercept = y_mean - w.iter().zip(&x_mean).map(|(a, b)| a * b).sum::<f64>();
    Ok(LinearModel {
        features: names.to_vec(),
        weights: names.iter().cloned().zip(w.iter().copied()).collect(),
        intercept,
    })
}

/// Finds the first column that is (numerically) a linear combination of the
/// intercept and earlier columns, via an incremental Cholesky of the centered
/// Gram matrix. Returns that column and the columns it depends on.
fn collinear_columns(gram: &DMatrix<f64>, raw_sq: &[f64], names: &[String]) -> Option<Vec<String>> {
    const REL_TOL: f64 = 1e-10;
    let p = gram.nrows();
    let mut basis: Vec<usize> = Vec::new();
    for j in 0..p {
        let gjj = gram[(j, j)];
        if gjj <= 1e-20 * raw_sq[j].max(f64::MIN_POSITIVE) || gjj <= 0.0 {
            return Some(vec![names[j].clone(), INTERCEPT.to_string()]);
        }
        if !basis.is_empty() {
            let k = basis.len();
            let g_bb = DMatrix::from_fn(k, k, |r, c| gram[(basis[r], basis[c])]);
            let g_bj = DVector::from_fn(k, |r, _| gram[(basis[r], j)]);
            if let Some(coef) = g_bb.cholesky().map(|c| c.solve(&g_bj)) {
                let explained = g_bj.dot(&coef);
                if gjj - explained <= REL_TOL * gjj {
                    let mut cols = vec![names[j].clone()];
                    let scale = gjj.sqrt();
                    for (i, &b) in basis.iter().enumerate() {
                        if (coef[i] * gram[(b, b)].sqrt()).abs() > 1e-6 * scale {
                            cols.push(names[b].clone());
                        }
                    }
                    cols.sort();
                    return Some(cols);
                }
            }
        }
        basis.push(j);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn exact_fits() {
        let x = vec![0.0, 1.0, 2.0, 3.0];
        let m = fit_columns(&names(&["x"]), std::slice::from_ref(&x), &[0.0, 2.0, 4.0, 6.0], 0.0).unwrap();
        assert!((m.weight("x") - 2.0).abs() < 1e-12);
        assert!(m.intercept.abs() < 1e-12);
        let m = fit_columns(&names(&["x"]), &[x], &[3.0; 4], 0.0).unwrap();
        assert!(m.weight("x").abs() < 1e-12);
        assert!((m.intercept - 3.0).abs() < 1e-12);
    }

    #[test]
    fn duplicated_column_is_rank_deficient() {
        let x = vec![0.0, 1.0, 1.0, 0.0, 1.0];
        let err = fit_columns(&names(&["x1", "x2"]), &[x.clone(), x.clone()], &[1.0, 2.0, 3.0, 4.0, 5.0], 0.0).unwrap_err();
        match err {
            EstimateError::RankDeficient(cols) => assert_eq!(cols, names(&["x1", "x2"])),
            e => panic!("{e}"),
        }
        // a constant column duplicates the intercept
        let err = fit_columns(&names(&["c"]), &[vec![2.0; 5]], &[1.0, 2.0, 3.0, 4.0, 5.0], 0.0).unwrap_err();
        assert!(matches!(err, EstimateError::RankDeficient(ref c) if c.contains(&INTERCEPT.to_string())));
        // ridge makes it solvable
        assert!(fit_columns(&names(&["x1", "x2"]), &[x.clone(), x], &[1.0, 2.0, 3.0, 4.0, 5.0], 0.1).is_ok());
    }

    #[test]
    fn combination_of_two_columns() {
        let a = vec![0.0, 1.0, 0.0, 1.0, 2.0];
        let b = vec![1.0, 0.0, 0.0, 1.0, 3.0];
        let c: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + 2.0 * y + 1.0).collect();
        let err = fit_columns(&names(&["a", "b", "c"]), &[a, b, c], &[1.0; 5], 0.0).unwrap_err();
        assert!(matches!(err, EstimateError::RankDeficient(ref cols) if cols == &names(&["a", "b", "c"])));
    }

    #[test]
    fn ridge_shrinks_slope_not_intercept() {
        let x = vec![-1.0, 1.0];
        let m = fit_columns(&names(&["x"]), &[x], &[9.0, 11.0], 2.0).unwrap();
        // centered gram 2, rhs 2: w = 2 / (2 + 2)
        assert!((m.weight("x") - 0.5).abs() < 1e-12);
        assert!((m.intercept - 10.0).abs() < 1e-12);
    }
}
