use std::collections::BTreeSet;

use super::{
    complete_rows, covariate_columns, fit_columns, fit_outcome_model, format_cell, mean, require_binary, EffectSpec,
    EstimateError, EstimateReport, Method, OutcomeKind, OutcomeModel, PropensityModel,
};
use crate::sampling::Dataset;
use crate::scm::key;

fn arm_mean(a: &[f64], y: &[f64], rows: &[usize], arm: f64, column: &str) -> Result<(f64, usize), EstimateError> {
    let vals: Vec<f64> = rows.iter().filter(|&&r| a[r] == arm).map(|&r| y[r]).collect();
    let m = mean(vals.iter().copied()).ok_or_else(|| EstimateError::EmptyArm {
        column: column.to_string(),
        value: arm,
    })?;
    Ok((m, vals.len()))
}

/// Difference of outcome means between the two arms, ignoring covariates.
pub fn estimate_naive(data: &Dataset, spec: &EffectSpec) -> Result<EstimateReport, EstimateError> {
    let a = data.require(&spec.action)?;
    let y = data.require(&spec.outcome)?;
    let rows = complete_rows(&[a, y]);
    let (m1, n1) = arm_mean(a, y, &rows, spec.treated, &spec.action)?;
    let (m0, n0) = arm_mean(a, y, &rows, spec.control, &spec.action)?;
    Ok(EstimateReport::new(Method::Naive, m1 - m0, n1 + n0)
        .diag("mean_treated", m1)
        .diag("mean_control", m0)
        .diag("n_treated", n1)
        .diag("n_control", n0))
}

/// Coefficient of the action in a least-squares fit of the outcome on the
/// action and covariates.
pub fn estimate_ols(data: &Dataset, spec: &EffectSpec) -> Result<EstimateReport, EstimateError> {
    let mut names = vec![spec.action.clone()];
    names.extend(spec.covariates.iter().cloned());
    let cols = covariate_columns(data, &names)?;
    let y = data.require(&spec.outcome)?;
    let mut all = cols.clone();
    all.push(y);
    let rows = complete_rows(&all);
    let xs: Vec<Vec<f64>> = cols.iter().map(|c| rows.iter().map(|&r| c[r]).collect()).collect();
    let ys: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
    let m = fit_columns(&names, &xs, &ys, 0.0)?;
    Ok(EstimateReport::new(Method::Ols, m.weight(&spec.action), rows.len()).diag("intercept", m.intercept))
}

/// Fits an outcome model per arm and averages the predicted contrast over the
/// empirical covariate distribution. Rows whose cell lacks an arm are dropped
/// with a positivity warning.
pub fn estimate_regression_adjustment(
    data: &Dataset,
    spec: &EffectSpec,
    kind: OutcomeKind,
) -> Result<EstimateReport, EstimateError> {
    let a = data.require(&spec.action)?;
    let y = data.require(&spec.outcome)?;
    let cols = covariate_columns(data, &spec.covariates)?;
    let mut all = cols.clone();
    all.extend([a, y]);
    let rows = complete_rows(&all);
    let used = data.select_rows(&rows);
    let model = fit_outcome_model(&used, &spec.action, &spec.outcome, &spec.covariates, kind)?;

    let mut diffs = Vec::with_capacity(rows.len());
    let mut missing = BTreeSet::new();
    for &r in &rows {
        let x: Vec<f64> = cols.iter().map(|c| c[r]).collect();
        match (model.predict(spec.treated, &x), model.predict(spec.control, &x)) {
            (Some(t), Some(c)) => diffs.push(t - c),
            _ => {
                missing.insert(key(&x));
            }
        }
    }
    let missing: Vec<String> = missing.iter().map(|k| format_cell(&spec.covariates, k)).collect();
    let estimate = mean(diffs.iter().copied()).ok_or_else(|| EstimateError::Positivity(missing.clone()))?;
    let mut report = EstimateReport::new(Method::Regression, estimate, diffs.len())
        .diag("outcome_model", if kind == OutcomeKind::Table { "table" } else { "linear" });
    if !missing.is_empty() {
        report.warn(format!(
            "positivity: no rows for one arm in {}; those rows were excluded",
            missing.join("; ")
        ));
    }
    Ok(report)
}

/// Inverse probability weighting with self-normalized weights per arm:
/// `Σ 1(a=â) y / p̂(â|x)  /  Σ 1(a=â) / p̂(â|x)`.
///
/// Rows with a missing outcome are skipped, so the propensity model may be fit
/// on a larger set of rows than those with outcomes.
pub fn estimate_ipw(
    data: &Dataset,
    spec: &EffectSpec,
    propensity: &PropensityModel,
) -> Result<EstimateReport, EstimateError> {
    let a = data.require(&spec.action)?;
    let y = data.require(&spec.outcome)?;
    let cols = covariate_columns(data, &propensity.covariates)?;
    let mut all = cols.clone();
    all.push(a);
    let with_action = complete_rows(&all);
    all.push(y);
    let rows = complete_rows(&all);
    require_binary(&spec.action, &rows.iter().map(|&r| a[r]).collect::<Vec<_>>())?;

    let mut num = [0.0; 2];
    let mut den = [0.0; 2];
    let mut counts = [0usize; 2];
    let (mut w_min, mut w_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut clipped = 0usize;
    for &r in &rows {
        let x: Vec<f64> = cols.iter().map(|c| c[r]).collect();
        let raw = propensity.raw(&x)?;
        if raw < propensity.clip || raw > 1.0 - propensity.clip {
            clipped += 1;
        }
        let arm = a[r] as usize;
        let w = 1.0 / propensity.prob(a[r], &x)?;
        num[arm] += w * y[r];
        den[arm] += w;
        counts[arm] += 1;
        w_min = w_min.min(w);
        w_max = w_max.max(w);
    }
    for arm in [0usize, 1] {
        if counts[arm] == 0 {
            return Err(EstimateError::EmptyArm {
                column: spec.action.clone(),
                value: arm as f64,
            });
        }
    }
    let (m1, m0) = (num[1] / den[1], num[0] / den[0]);
    let frac = clipped as f64 / rows.len() as f64;
    let mut report = EstimateReport::new(Method::Ipw, m1 - m0, rows.len())
        .diag("mean_treated", m1)
        .diag("mean_control", m0)
        .diag("min_weight", w_min)
        .diag("max_weight", w_max)
        .diag("clipped_fraction", frac)
        .diag("clip", propensity.clip);
    report.warnings.extend(propensity.warnings.iter().cloned());
    if frac > 0.05 {
        report.warn(format!(
            "{:.1}% of rows have propensity at the clip boundary; the estimate may have high variance",
            100.0 * frac
        ));
    }
    let skipped = with_action.len() - rows.len();
    if skipped > 0 {
        report.warn(format!("{skipped} rows with a missing outcome were skipped"));
    }
    Ok(report)
}

/// Augmented IPW: per arm, `(1/N) Σ [ỹ(â,x) + 1(a=â)(y − ỹ(â,x)) / p̂(â|x)]`.
/// Consistent when either the outcome model or the propensity is correct.
pub fn estimate_doubly_robust(
    data: &Dataset,
    spec: &EffectSpec,
    outcome: &OutcomeModel,
    propensity: &PropensityModel,
) -> Result<EstimateReport, EstimateError> {
    let a = data.require(&spec.action)?;
    let y = data.require(&spec.outcome)?;
    let ocols = covariate_columns(data, &outcome.covariates)?;
    let pcols = covariate_columns(data, &propensity.covariates)?;
    let mut all: Vec<&[f64]> = ocols.iter().chain(&pcols).copied().collect();
    all.extend([a, y]);
    let rows = complete_rows(&all);
    require_binary(&spec.action, &rows.iter().map(|&r| a[r]).collect::<Vec<_>>())?;

    let mut sums = [0.0; 2];
    let mut used = 0usize;
    let mut counts = [0usize; 2];
    let mut missing = BTreeSet::new();
    for &r in &rows {
        let xo: Vec<f64> = ocols.iter().map(|c| c[r]).collect();
        let xp: Vec<f64> = pcols.iter().map(|c| c[r]).collect();
        let (Some(f1), Some(f0)) = (outcome.predict(1.0, &xo), outcome.predict(0.0, &xo)) else {
            missing.insert(key(&xo));
            continue;
        };
        let arm = a[r] as usize;
        let fitted = if arm == 1 { f1 } else { f0 };
        let correction = (y[r] - fitted) / propensity.prob(a[r], &xp)?;
        sums[1] += f1;
        sums[0] += f0;
        sums[arm] += correction;
        counts[arm] += 1;
        used += 1;
    }
    let missing: Vec<String> = missing.iter().map(|k| format_cell(&outcome.covariates, k)).collect();
    if used == 0 {
        return Err(EstimateError::Positivity(missing));
    }
    for arm in [0usize, 1] {
        if counts[arm] == 0 {
            return Err(EstimateError::EmptyArm {
                column: spec.action.clone(),
                value: arm as f64,
            });
        }
    }
    let n = used as f64;
    let (m1, m0) = (sums[1] / n, sums[0] / n);
    let mut report = EstimateReport::new(Method::Dr, m1 - m0, used)
        .diag("mean_treated", m1)
        .diag("mean_control", m0);
    report.warnings.extend(propensity.warnings.iter().cloned());
    if !missing.is_empty() {
        report.warn(format!(
            "positivity: outcome model has no prediction for one arm in {}; those rows were excluded",
            missing.join("; ")
        ));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{fit_propensity, PropensityKind};

    fn randomized() -> Dataset {
        // a independent of x in every cell (2 treated, 2 control per cell)
        Dataset::from_columns([
            ("x", vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]),
            ("a", vec![1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]),
            ("y", vec![3.0, 1.0, 0.0, 1.0, 5.0, 4.0, 2.0, 3.0]),
        ])
        .unwrap()
    }

    #[test]
    fn ipw_with_constant_rate_equals_naive() {
        let ds = randomized();
        let spec = EffectSpec::new("a", "y").covariates(&["x"]);
        let naive = estimate_naive(&ds, &spec).unwrap();
        let p = PropensityModel::constant(0.5, 0.01).unwrap();
        let ipw = estimate_ipw(&ds, &spec, &p).unwrap();
        assert!((naive.estimate - ipw.estimate).abs() < 1e-12);
        assert!((naive.estimate - 1.75).abs() < 1e-12);
    }

    #[test]
    fn regression_adjustment_positivity() {
        let ds = Dataset::from_columns([("x", vec![0.0, 0.0, 1.0]), ("a", vec![1.0, 1.0, 1.0]), ("y", vec![1.0, 2.0, 3.0])])
            .unwrap();
        let spec = EffectSpec::new("a", "y").covariates(&["x"]);
        let err = estimate_regression_adjustment(&ds, &spec, OutcomeKind::Table).unwrap_err();
        assert!(matches!(err, EstimateError::Positivity(ref c) if c.len() == 2), "{err}");

        let mut ds = randomized();
        ds.push_row(&[2.0, 1.0, 7.0]).unwrap();
        let r = estimate_regression_adjustment(&ds, &spec, OutcomeKind::Table).unwrap();
        assert_eq!(r.n_used, 8);
        assert!(r.warnings[0].contains("x=2"));
    }

    #[test]
    fn doubly_robust_with_exact_pieces() {
        let ds = randomized();
        let spec = EffectSpec::new("a", "y").covariates(&["x"]);
        let om = fit_outcome_model(&ds, "a", "y", &["x"], OutcomeKind::Table).unwrap();
        let pm = fit_propensity(&ds, "a", &["x"], PropensityKind::Table { alpha: 0.0 }, 0.01).unwrap();
        let dr = estimate_doubly_robust(&ds, &spec, &om, &pm).unwrap();
        let ra = estimate_regression_adjustment(&ds, &spec, OutcomeKind::Table).unwrap();
        assert!((dr.estimate - ra.estimate).abs() < 1e-12);
        let zero = OutcomeModel::constant(0.0);
        let dr0 = estimate_doubly_robust(&ds, &spec, &zero, &pm).unwrap();
        // y/p summed over arms, divided by N: (3+1+5+4)/0.5/8 - (0+1+2+3)/0.5/8
        assert!((dr0.estimate - (26.0 - 12.0) / 8.0).abs() < 1e-12);
    }

    #[test]
    fn ipw_skips_missing_outcomes() {
        let mut ds = randomized();
        ds.push_row(&[0.0, 1.0, f64::NAN]).unwrap();
        let spec = EffectSpec::new("a", "y");
        let p = PropensityModel::constant(0.5, 0.01).unwrap();
        let r = estimate_ipw(&ds, &spec, &p).unwrap();
        assert_eq!(r.n_used, 8);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn ols_slope() {
        let ds = randomized();
        let r = estimate_ols(&ds, &EffectSpec::new("a", "y").covariates(&["x"])).unwrap();
        assert!((r.estimate - 1.75).abs() < 1e-12);
    }
}
