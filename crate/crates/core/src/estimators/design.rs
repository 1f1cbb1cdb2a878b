use super::{complete_rows, fit_columns, mean, require_binary, EstimateError, EstimateReport, Method};
use crate::sampling::Dataset;

/// Difference in mean outcome change (post − pre) between the treated and the
/// control group. Anything that shifts a group's outcome equally in both
/// periods cancels.
pub fn estimate_did(data: &Dataset, action: &str, y_pre: &str, y_post: &str) -> Result<EstimateReport, EstimateError> {
    let a = data.require(action)?;
    let pre = data.require(y_pre)?;
    let post = data.require(y_post)?;
    let rows = complete_rows(&[a, pre, post]);
    require_binary(action, &rows.iter().map(|&r| a[r]).collect::<Vec<_>>())?;
    let arm = |v: f64| -> Result<(f64, f64, usize), EstimateError> {
        let sel: Vec<usize> = rows.iter().copied().filter(|&r| a[r] == v).collect();
        let change = mean(sel.iter().map(|&r| post[r] - pre[r])).ok_or_else(|| EstimateError::EmptyArm {
            column: action.to_string(),
            value: v,
        })?;
        let post_mean = mean(sel.iter().map(|&r| post[r])).expect("non-empty");
        Ok((change, post_mean, sel.len()))
    };
    let (d1, p1, n1) = arm(1.0)?;
    let (d0, p0, n0) = arm(0.0)?;
    Ok(EstimateReport::new(Method::Did, d1 - d0, n1 + n0)
        .diag("change_treated", d1)
        .diag("change_control", d0)
        .diag("naive_post", p1 - p0)
        .diag("n_treated", n1)
        .diag("n_control", n0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RddOptions {
    pub threshold: f64,
    /// Half-width of the window around the threshold; rows with
    /// `|x − threshold| ≤ bandwidth` are used.
    pub bandwidth: f64,
    /// Polynomial degree per side, 1 or 2.
    pub degree: usize,
}

impl Default for RddOptions {
    fn default() -> Self {
        RddOptions {
            threshold: 0.0,
            bandwidth: f64::INFINITY,
            degree: 1,
        }
    }
}

/// Sharp regression discontinuity: the treated side is `x ≥ threshold`. Fits
/// a polynomial in `x − threshold` on each side and returns the gap between
/// the two fitted limits at the threshold.
pub fn estimate_rdd(data: &Dataset, running: &str, outcome: &str, opts: &RddOptions) -> Result<EstimateReport, EstimateError> {
    if !(1..=2).contains(&opts.degree) {
        return Err(EstimateError::InvalidArgument(format!("degree must be 1 or 2, got {}", opts.degree)));
    }
    if !(opts.bandwidth > 0.0) || !opts.threshold.is_finite() {
        return Err(EstimateError::InvalidArgument(
            "bandwidth must be positive and the threshold finite".into(),
        ));
    }
    let x = data.require(running)?;
    let y = data.require(outcome)?;
    let rows: Vec<usize> = complete_rows(&[x, y])
        .into_iter()
        .filter(|&r| (x[r] - opts.threshold).abs() <= opts.bandwidth)
        .collect();
    let names: Vec<String> = (1..=opts.degree).map(|k| format!("dx^{k}")).collect();
    let limit = |right: bool| -> Result<(f64, usize), EstimateError> {
        let side: Vec<usize> = rows.iter().copied().filter(|&r| (x[r] >= opts.threshold) == right).collect();
        if side.len() < opts.degree + 2 {
            return Err(EstimateError::InsufficientData(format!(
                "{} {} side of {} within bandwidth; need at least {}",
                side.len(),
                if right { "rows on the right" } else { "rows on the left" },
                opts.threshold,
                opts.degree + 2
            )));
        }
        let xs: Vec<Vec<f64>> = (1..=opts.degree as i32)
            .map(|k| side.iter().map(|&r| (x[r] - opts.threshold).powi(k)).collect())
            .collect();
        let ys: Vec<f64> = side.iter().map(|&r| y[r]).collect();
        Ok((fit_columns(&names, &xs, &ys, 0.0)?.intercept, side.len()))
    };
    let (right, n_right) = limit(true)?;
    let (left, n_left) = limit(false)?;
    Ok(EstimateReport::new(Method::Rdd, right - left, n_left + n_right)
        .diag("limit_right", right)
        .diag("limit_left", left)
        .diag("n_right", n_right)
        .diag("n_left", n_left))
}
