use super::{complete_rows, fit_columns, EstimateError, EstimateReport, Method};
use crate::sampling::Dataset;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IvOptions {
    /// First-stage R² below this flags the instrument as weak.
    pub r2_floor: f64,
    /// Use rows that lack the instrument too, imputing it from a regression of
    /// the instrument on the action.
    pub impute_instrument: bool,
}

impl Default for IvOptions {
    fn default() -> Self {
        IvOptions {
            r2_floor: 0.01,
            impute_instrument: false,
        }
    }
}

fn r_squared(fitted: &[f64], target: &[f64]) -> f64 {
    let m = target.iter().sum::<f64>() / target.len() as f64;
    let tss: f64 = target.iter().map(|v| (v - m).powi(2)).sum();
    let rss: f64 = fitted.iter().zip(target).map(|(f, t)| (t - f).powi(2)).sum();
    if tss > 0.0 {
        1.0 - rss / tss
    } else {
        0.0
    }
}

/// Two-stage least squares: regress the action on the instrument, then the
/// outcome on the fitted action. The estimate is the second-stage slope.
///
/// A weak instrument is not an error. The report then carries a warning, a
/// NaN estimate and `unreliable: true`.
pub fn estimate_iv_2sls(
    data: &Dataset,
    action: &str,
    outcome: &str,
    instrument: &str,
    opts: &IvOptions,
) -> Result<EstimateReport, EstimateError> {
    let a = data.require(action)?;
    let y = data.require(outcome)?;
    let z = data.require(instrument)?;
    let observed = complete_rows(&[a, y, z]);
    if observed.len() < 3 {
        return Err(EstimateError::InsufficientData(format!(
            "two-stage least squares needs at least 3 complete rows, got {}",
            observed.len()
        )));
    }
    let pick = |c: &[f64], rows: &[usize]| -> Vec<f64> { rows.iter().map(|&r| c[r]).collect() };
    let (a_obs, z_obs) = (pick(a, &observed), pick(z, &observed));

    let unreliable = |report: EstimateReport, msg: String| {
        let mut report = report.diag("unreliable", true);
        report.estimate = f64::NAN;
        report.warn(msg);
        report
    };

    let z_name = vec![instrument.to_string()];
    let stage1 = match fit_columns(&z_name, std::slice::from_ref(&z_obs), &a_obs, 0.0) {
        Ok(m) => m,
        Err(EstimateError::RankDeficient(_)) => {
            let report = EstimateReport::new(Method::Iv, f64::NAN, observed.len()).diag("first_stage_r2", 0.0);
            return Ok(unreliable(report, format!("instrument `{instrument}` is constant; the first stage is undefined")));
        }
        Err(e) => return Err(e),
    };
    let psi = stage1.weight(instrument);
    let fitted: Vec<f64> = z_obs.iter().map(|v| stage1.predict(&[*v])).collect();
    let r2 = r_squared(&fitted, &a_obs);

    let mut rows = observed.clone();
    let mut a_hat = fitted;
    let mut imputed = 0usize;
    if opts.impute_instrument {
        let a_name = vec![action.to_string()];
        let g_z = fit_columns(&a_name, std::slice::from_ref(&a_obs), &z_obs, 0.0)?;
        for r in complete_rows(&[a, y]) {
            if z[r].is_nan() {
                rows.push(r);
                a_hat.push(stage1.predict(&[g_z.predict(&[a[r]])]));
                imputed += 1;
            }
        }
    }
    let y_used = pick(y, &rows);

    let mut report = EstimateReport::new(Method::Iv, f64::NAN, rows.len())
        .diag("first_stage_r2", r2)
        .diag("first_stage_slope", psi)
        .diag("unreliable", false);
    if opts.impute_instrument {
        report = report.diag("imputed_rows", imputed);
    }
    if r2 < opts.r2_floor {
        return Ok(unreliable(
            report,
            format!("weak instrument: first-stage R² {r2:.4} is below {}", opts.r2_floor),
        ));
    }
    let hat_name = vec![format!("{action}_hat")];
    let stage2 = fit_columns(&hat_name, &[a_hat], &y_used, 0.0)?;
    report.estimate = stage2.weight(&hat_name[0]);
    Ok(report.diag("second_stage_intercept", stage2.intercept))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_data() -> Dataset {
        // z drives a; x confounds a and y; y = 2a + 3x exactly
        let z = [-1.0, 0.0, 1.0, 2.0, -2.0, 0.5, 1.5, -0.5];
        let x = [0.3, -0.2, 0.1, -0.4, 0.2, 0.0, -0.1, 0.4];
        let a: Vec<f64> = z.iter().zip(&x).map(|(z, x)| z + x).collect();
        let y: Vec<f64> = a.iter().zip(&x).map(|(a, x)| 2.0 * a + 3.0 * x).collect();
        Dataset::from_columns([("z", z.to_vec()), ("x", x.to_vec()), ("a", a), ("y", y)]).unwrap()
    }

    #[test]
    fn instrument_equal_to_action_is_ols() {
        let ds = linear_data();
        let mut with_copy = ds.clone();
        with_copy.set_column("a2", ds.column("a").unwrap().to_vec()).unwrap();
        let iv = estimate_iv_2sls(&with_copy, "a", "y", "a2", &IvOptions::default()).unwrap();
        let ols = fit_columns(&["a".into()], &[ds.column("a").unwrap().to_vec()], ds.column("y").unwrap(), 0.0).unwrap();
        assert!((iv.estimate - ols.weight("a")).abs() < 1e-9);
        assert_eq!(iv.diagnostic("first_stage_r2"), Some(1.0));
    }

    #[test]
    fn constant_instrument_is_flagged() {
        let mut ds = linear_data();
        ds.set_column("z", vec![1.0; 8]).unwrap();
        let r = estimate_iv_2sls(&ds, "a", "y", "z", &IvOptions::default()).unwrap();
        assert!(r.estimate.is_nan());
        assert_eq!(r.diagnostics["unreliable"], true);
        assert!(!r.warnings.is_empty());
    }

    #[test]
    fn imputation_uses_rows_without_instrument() {
        let mut ds = linear_data();
        let mut z = ds.column("z").unwrap().to_vec();
        z[0] = f64::NAN;
        ds.set_column("z", z).unwrap();
        let plain = estimate_iv_2sls(&ds, "a", "y", "z", &IvOptions::default()).unwrap();
        assert_eq!(plain.n_used, 7);
        let opts = IvOptions {
            impute_instrument: true,
            ..IvOptions::default()
        };
        let r = estimate_iv_2sls(&ds, "a", "y", "z", &opts).unwrap();
        assert_eq!(r.n_used, 8);
        assert_eq!(r.diagnostic("imputed_rows"), Some(1.0));
        assert!(r.estimate.is_finite());
    }
}
