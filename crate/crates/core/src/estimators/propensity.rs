use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{cell_key, complete_rows, covariate_columns, format_cell, require_binary, EstimateError, LinearModel};
use crate::sampling::Dataset;
use crate::scm::{key, ValueKey};

pub const DEFAULT_CLIP: f64 = 0.01;
const MAX_IRLS_ITERS: usize = 100;
const GRAD_TOL: f64 = 1e-8;
const DAMPING: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PropensityKind {
    /// Smoothed treated fraction per covariate cell: `(n₁ + α) / (n + 2α)`.
    Table { alpha: f64 },
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropensityFit {
    Table {
        #[serde(serialize_with = "serialize_cells")]
        cells: BTreeMap<ValueKey, f64>,
        alpha: f64,
    },
    Logistic(LinearModel),
    Constant(f64),
}

fn serialize_cells<S: serde::Serializer>(cells: &BTreeMap<ValueKey, f64>, s: S) -> Result<S::Ok, S::Error> {
    let v: Vec<(Vec<f64>, f64)> = cells.iter().map(|(k, p)| (k.iter().map(|x| x.0).collect(), *p)).collect();
    v.serialize(s)
}

/// Model of `p(a=1 | x)` whose outputs are clipped to `[clip, 1 − clip]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropensityModel {
    pub covariates: Vec<String>,
    pub fit: PropensityFit,
    pub clip: f64,
    /// Issues found while fitting (separation, single-arm cells).
    pub warnings: Vec<String>,
}

fn check_clip(clip: f64) -> Result<(), EstimateError> {
    if clip > 0.0 && clip < 0.5 {
        Ok(())
    } else {
        Err(EstimateError::InvalidArgument(format!("clip must lie in (0, 0.5), got {clip}")))
    }
}

impl PropensityModel {
    /// The same propensity for every row.
    pub fn constant(p: f64, clip: f64) -> Result<Self, EstimateError> {
        check_clip(clip)?;
        if !(0.0..=1.0).contains(&p) {
            return Err(EstimateError::InvalidArgument(format!("propensity {p} outside [0, 1]")));
        }
        Ok(PropensityModel {
            covariates: Vec::new(),
            fit: PropensityFit::Constant(p),
            clip,
            warnings: Vec::new(),
        })
    }

    /// Known propensities per covariate cell, e.g. the true mechanism.
    pub fn from_cells<S: AsRef<str>>(covariates: &[S], cells: &[(Vec<f64>, f64)], clip: f64) -> Result<Self, EstimateError> {
        check_clip(clip)?;
        Ok(PropensityModel {
            covariates: covariates.iter().map(|s| s.as_ref().to_string()).collect(),
            fit: PropensityFit::Table {
                cells: cells.iter().map(|(k, p)| (key(k), *p)).collect(),
                alpha: 0.0,
            },
            clip,
            warnings: Vec::new(),
        })
    }

    /// Unclipped `p(a=1 | x)`, `x` in `covariates` order.
    pub fn raw(&self, x: &[f64]) -> Result<f64, EstimateError> {
        match &self.fit {
            PropensityFit::Constant(p) => Ok(*p),
            PropensityFit::Logistic(m) => Ok(sigmoid(m.predict(x))),
            PropensityFit::Table { cells, alpha } => match cells.get(&key(x)) {
                Some(p) => Ok(*p),
                None if *alpha > 0.0 => Ok(0.5),
                None => Err(EstimateError::UnseenCell(format_cell(&self.covariates, &key(x)))),
            },
        }
    }

    /// Clipped `p(a=1 | x)`.
    pub fn treated(&self, x: &[f64]) -> Result<f64, EstimateError> {
        Ok(self.raw(x)?.clamp(self.clip, 1.0 - self.clip))
    }

    /// Clipped `p(arm | x)` for a binary arm.
    pub fn prob(&self, arm: f64, x: &[f64]) -> Result<f64, EstimateError> {
        let p = self.treated(x)?;
        Ok(if arm == 1.0 { p } else { 1.0 - p })
    }

    /// `(raw, clipped)` treated propensity for each row of `data`; rows with
    /// missing covariates get NaN.
    pub fn per_row(&self, data: &Dataset) -> Result<Vec<(f64, f64)>, EstimateError> {
        let cols = covariate_columns(data, &self.covariates)?;
        (0..data.n_rows())
            .map(|r| {
                let x: Vec<f64> = cols.iter().map(|c| c[r]).collect();
                if x.iter().any(|v| v.is_nan()) {
                    return Ok((f64::NAN, f64::NAN));
                }
                let raw = self.raw(&x)?;
                Ok((raw, raw.clamp(self.clip, 1.0 - self.clip)))
            })
            .collect()
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Fits `p(a=1 | x)` on the rows where the action and covariates are present;
/// outcomes are not needed, so rows with missing outcomes still contribute.
pub fn fit_propensity<S: AsRef<str>>(
    data: &Dataset,
    action: &str,
    covariates: &[S],
    kind: PropensityKind,
    clip: f64,
) -> Result<PropensityModel, EstimateError> {
    check_clip(clip)?;
    let names: Vec<String> = covariates.iter().map(|s| s.as_ref().to_string()).collect();
    let a = data.require(action)?;
    let cols = covariate_columns(data, &names)?;
    let mut all = cols.clone();
    all.push(a);
    let rows = complete_rows(&all);
    if rows.is_empty() {
        return Err(EstimateError::InsufficientData("no complete rows for the propensity model".into()));
    }
    let a_used: Vec<f64> = rows.iter().map(|&r| a[r]).collect();
    require_binary(action, &a_used)?;

    let mut warnings = Vec::new();
    let fit = match kind {
        PropensityKind::Table { alpha } => {
            if !(alpha.is_finite() && alpha >= 0.0) {
                return Err(EstimateError::InvalidArgument(format!("alpha must be >= 0, got {alpha}")));
            }
            let mut counts: BTreeMap<ValueKey, (f64, f64)> = BTreeMap::new();
            for &r in &rows {
                let c = counts.entry(cell_key(&cols, r)).or_default();
                c.0 += a[r];
                c.1 += 1.0;
            }
            let mut single = Vec::new();
            let cells = counts
                .into_iter()
                .map(|(k, (n1, n))| {
                    if alpha == 0.0 && (n1 == 0.0 || n1 == n) {
                        single.push(format_cell(&names, &k));
                    }
                    (k, (n1 + alpha) / (n + 2.0 * alpha))
                })
                .collect();
            if !single.is_empty() {
                warnings.push(format!(
                    "only one action observed in cell(s) {}; propensity clipped to [{clip}, {}]",
                    single.join("; "),
                    1.0 - clip
                ));
            }
            PropensityFit::Table { cells, alpha }
        }
        PropensityKind::Logistic => {
            let xs: Vec<Vec<f64>> = cols.iter().map(|c| rows.iter().map(|&r| c[r]).collect()).collect();
            let (model, converged) = fit_logistic(&names, &xs, &a_used);
            if !converged {
                warnings.push(format!("logistic fit did not converge in {MAX_IRLS_ITERS} iterations"));
            }
            let probs: Vec<f64> = (0..a_used.len())
                .map(|i| {
                    let x: Vec<f64> = xs.iter().map(|c| c[i]).collect();
                    sigmoid(model.predict(&x))
                })
                .collect();
            let separated = probs.iter().zip(&a_used).all(|(p, y)| (p - y).abs() < 1e-3);
            if separated {
                warnings.push("actions are perfectly separated by the covariates; propensities clipped".into());
            }
            let clipped = probs.iter().filter(|p| **p < clip || **p > 1.0 - clip).count();
            if clipped > 0 && !separated {
                warnings.push(format!("{clipped} fitted propensities fall outside [{clip}, {}]", 1.0 - clip));
            }
            PropensityFit::Logistic(model)
        }
    };
    Ok(PropensityModel {
        covariates: names,
        fit,
        clip,
        warnings,
    })
}

/// Maximum-likelihood logistic regression by damped Newton (IRLS) steps with
/// backtracking. Returns the model and whether the gradient tolerance was met.
fn fit_logistic(names: &[String], xs: &[Vec<f64>], y: &[f64]) -> (LinearModel, bool) {
    let n = y.len();
    let p = names.len() + 1;
    let x = DMatrix::from_fn(n, p, |r, j| if j == 0 { 1.0 } else { xs[j - 1][r] });
    let yv = DVector::from_column_slice(y);
    let loglik = |beta: &DVector<f64>| -> f64 {
        let eta = &x * beta;
        eta.iter().zip(y).map(|(e, t)| t * e - softplus(*e)).sum::<f64>() / n as f64
    };
    let mut beta = DVector::zeros(p);
    let mut current = loglik(&beta);
    let mut converged = false;
    for _ in 0..MAX_IRLS_ITERS {
        let eta = &x * &beta;
        let mu = eta.map(sigmoid);
        let grad = x.transpose() * (&yv - &mu) / n as f64;
        if grad.norm() < GRAD_TOL {
            converged = true;
            break;
        }
        let w = mu.map(|m| m * (1.0 - m));
        let xw = DMatrix::from_fn(n, p, |r, j| x[(r, j)] * w[r]);
        let mut h = x.transpose() * xw / n as f64;
        for j in 0..p {
            h[(j, j)] += DAMPING;
        }
        let Some(step) = h.clone().cholesky().map(|c| c.solve(&grad)).or_else(|| h.lu().solve(&grad)) else {
            break;
        };
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-10 {
            let cand = &beta + &step * t;
            let ll = loglik(&cand);
            if ll >= current {
                beta = cand;
                current = ll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if !converged {
        let mu = (&x * &beta).map(sigmoid);
        converged = (x.transpose() * (&yv - &mu) / n as f64).norm() < GRAD_TOL;
    }
    let model = LinearModel {
        features: names.to_vec(),
        weights: names.iter().cloned().zip(beta.iter().skip(1).copied()).collect(),
        intercept: beta[0],
    };
    (model, converged)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_recovers_known_coefficients() {
        // deterministic design with exact class frequencies matching sigmoid(-1 + 2x)
        let mut x = Vec::new();
        let mut a = Vec::new();
        for (xv, p) in [(0.0, sigmoid(-1.0)), (1.0, sigmoid(1.0))] {
            let n = 10_000;
            let ones = (p * n as f64).round() as usize;
            for i in 0..n {
                x.push(xv);
                a.push(if i < ones { 1.0 } else { 0.0 });
            }
        }
        let ds = Dataset::from_columns([("x", x), ("a", a)]).unwrap();
        let m = fit_propensity(&ds, "a", &["x"], PropensityKind::Logistic, DEFAULT_CLIP).unwrap();
        let PropensityFit::Logistic(lm) = &m.fit else { panic!() };
        assert!((lm.intercept + 1.0).abs() < 1e-3, "{lm:?}");
        assert!((lm.weight("x") - 2.0).abs() < 1e-3);
        assert!(m.warnings.is_empty(), "{:?}", m.warnings);
    }

    #[test]
    fn separated_data_stays_finite_and_clips() {
        let x: Vec<f64> = (0..40).map(|i| i as f64 / 10.0 - 2.0).collect();
        let a: Vec<f64> = x.iter().map(|v| if *v > 0.0 { 1.0 } else { 0.0 }).collect();
        let ds = Dataset::from_columns([("x", x), ("a", a)]).unwrap();
        let m = fit_propensity(&ds, "a", &["x"], PropensityKind::Logistic, 0.05).unwrap();
        let PropensityFit::Logistic(lm) = &m.fit else { panic!() };
        assert!(lm.intercept.is_finite() && lm.weight("x").is_finite());
        assert!(!m.warnings.is_empty());
        assert_eq!(m.treated(&[2.0]).unwrap(), 0.95);
        assert_eq!(m.treated(&[-2.0]).unwrap(), 0.05);
    }

    #[test]
    fn table_propensity_and_unseen_cells() {
        let ds = Dataset::from_columns([("x", vec![0.0, 0.0, 1.0, 1.0]), ("a", vec![0.0, 1.0, 1.0, 1.0])]).unwrap();
        let m = fit_propensity(&ds, "a", &["x"], PropensityKind::Table { alpha: 0.0 }, 0.01).unwrap();
        assert_eq!(m.raw(&[0.0]).unwrap(), 0.5);
        assert_eq!(m.treated(&[1.0]).unwrap(), 0.99);
        assert_eq!(m.warnings.len(), 1);
        assert!(matches!(m.raw(&[5.0]), Err(EstimateError::UnseenCell(_))));
        let s = fit_propensity(&ds, "a", &["x"], PropensityKind::Table { alpha: 1.0 }, 0.01).unwrap();
        assert_eq!(s.raw(&[1.0]).unwrap(), 0.75);
        assert_eq!(s.raw(&[5.0]).unwrap(), 0.5);
    }

    #[test]
    fn rejects_bad_inputs() {
        let ds = Dataset::from_columns([("x", vec![0.0, 1.0]), ("a", vec![0.0, 2.0])]).unwrap();
        assert!(matches!(
            fit_propensity(&ds, "a", &["x"], PropensityKind::Logistic, 0.01),
            Err(EstimateError::NonBinaryAction { .. })
        ));
        assert!(PropensityModel::constant(0.5, 0.5).is_err());
    }
}
