use rand::seq::SliceRandom;

use super::{complete_rows, covariate_columns, fit_columns, EffectSpec, EstimateError, EstimateReport, Method};
use crate::sampling::{Dataset, RngSpec};

/// Relative size of the action residuals below which the action is treated
/// as fully determined by the covariates.
const DEGENERATE_RATIO: f64 = 1e-10;

/// Cross-fitted partialling-out. For each of `folds` random folds, the action
/// and the outcome are regressed on the covariates using the other folds,
/// and residuals are taken on the held-out fold. The effect is the slope of
/// the outcome residuals on the action residuals.
pub fn estimate_dml(data: &Dataset, spec: &EffectSpec, folds: usize, rng: &RngSpec) -> Result<EstimateReport, EstimateError> {
    let a = data.require(&spec.action)?;
    let y = data.require(&spec.outcome)?;
    let cols = covariate_columns(data, &spec.covariates)?;
    let mut all = cols.clone();
    all.extend([a, y]);
    let rows = complete_rows(&all);
    let n = rows.len();
    if folds < 2 {
        return Err(EstimateError::InvalidArgument(format!("need at least 2 folds, got {folds}")));
    }
    if folds * 10 > n {
        return Err(EstimateError::InsufficientData(format!(
            "{folds} folds need at least {} complete rows, got {n}",
            folds * 10
        )));
    }
    let mut perm = rows.clone();
    perm.shuffle(&mut rng.stream(0, "dml-folds"));
    let fold_of = |i: usize| i % folds;

    let mut a_res = vec![0.0; n];
    let mut y_res = vec![0.0; n];
    for k in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of(i) != k).map(|i| perm[i]).collect();
        let xs: Vec<Vec<f64>> = cols.iter().map(|c| train.iter().map(|&r| c[r]).collect()).collect();
        let ta: Vec<f64> = train.iter().map(|&r| a[r]).collect();
        let ty: Vec<f64> = train.iter().map(|&r| y[r]).collect();
        let g_a = fit_columns(&spec.covariates, &xs, &ta, 0.0)?;
        let g_y = fit_columns(&spec.covariates, &xs, &ty, 0.0)?;
        for i in (0..n).filter(|&i| fold_of(i) == k) {
            let r = perm[i];
            let x: Vec<f64> = cols.iter().map(|c| c[r]).collect();
            a_res[i] = a[r] - g_a.predict(&x);
            y_res[i] = y[r] - g_y.predict(&x);
        }
    }
    let saa: f64 = a_res.iter().map(|v| v * v).sum();
    let say: f64 = a_res.iter().zip(&y_res).map(|(p, q)| p * q).sum();
    let a_mean = rows.iter().map(|&r| a[r]).sum::<f64>() / n as f64;
    let a_var: f64 = rows.iter().map(|&r| (a[r] - a_mean).powi(2)).sum();
    if !(saa > DEGENERATE_RATIO * a_var) || a_var == 0.0 {
        return Err(EstimateError::DegenerateVariance(format!(
            "`{}` has no variation left after regressing on the covariates",
            spec.action
        )));
    }
    Ok(EstimateReport::new(Method::Dml, say / saa, n)
        .diag("folds", folds)
        .diag("residual_action_variance", saa / n as f64)
        .diag("residual_action_share", saa / a_var))
}
