use std::collections::BTreeMap;

use ordered_float::OrderedFloat;

use crate::estimators::{complete_rows, fit_columns, EstimateError, LinearModel};
use crate::sampling::Dataset;

/// Which linear outcome model to fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContextMode<'a> {
    /// One model per action value, `ŷ(a|x') = θ(a)·x' + b(a)`.
    Covariate { action: &'a str, covariates: &'a [&'a str] },
    /// One shared model over columns describing the chosen action,
    /// `ŷ(a) = θ·c(a) + b`.
    ActionContext { features: &'a [&'a str] },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ContextualModel {
    PerArm(BTreeMap<OrderedFloat<f64>, LinearModel>),
    Shared(LinearModel),
}

impl ContextualModel {
    /// Predicted outcome of `action` at covariates `x`. `None` for an action
    /// that had no model, or for a shared model.
    pub fn predict_arm(&self, action: f64, x: &[f64]) -> Option<f64> {
        match self {
            ContextualModel::PerArm(models) => models.get(&OrderedFloat(action)).map(|m| m.predict(x)),
            ContextualModel::Shared(_) => None,
        }
    }

    /// Predicted outcome of an action with context vector `c`.
    pub fn predict_context(&self, c: &[f64]) -> Option<f64> {
        match self {
            ContextualModel::Shared(m) => Some(m.predict(c)),
            ContextualModel::PerArm(_) => None,
        }
    }
}

/// Least-squares outcome models on the complete rows of `data`. Linear models
/// extrapolate to covariate or context combinations never observed together.
pub fn fit_contextual(data: &Dataset, outcome: &str, mode: ContextMode<'_>) -> Result<ContextualModel, EstimateError> {
    let y = data.require(outcome)?;
    match mode {
        ContextMode::Covariate { action, covariates } => {
            let a = data.require(action)?;
            let cols: Vec<&[f64]> = covariates.iter().map(|c| data.require(c)).collect::<Result<_, _>>()?;
            let mut all = cols.clone();
            all.extend([a, y]);
            let rows = complete_rows(&all);
            let mut by_arm: BTreeMap<OrderedFloat<f64>, Vec<usize>> = BTreeMap::new();
            for r in rows {
                by_arm.entry(OrderedFloat(a[r])).or_default().push(r);
            }
            if by_arm.is_empty() {
                return Err(EstimateError::InsufficientData("no complete rows".into()));
            }
            let names: Vec<String> = covariates.iter().map(|s| s.to_string()).collect();
            let mut models = BTreeMap::new();
            for (arm, rows) in by_arm {
                models.insert(arm, fit_rows(&names, &cols, y, &rows, &format!("{action}={}", arm.0))?);
            }
            Ok(ContextualModel::PerArm(models))
        }
        ContextMode::ActionContext { features } => {
            let cols: Vec<&[f64]> = features.iter().map(|c| data.require(c)).collect::<Result<_, _>>()?;
            let mut all = cols.clone();
            all.push(y);
            let rows = complete_rows(&all);
            let names: Vec<String> = features.iter().map(|s| s.to_string()).collect();
            Ok(ContextualModel::Shared(fit_rows(&names, &cols, y, &rows, "shared model")?))
        }
    }
}

fn fit_rows(names: &[String], cols: &[&[f64]], y: &[f64], rows: &[usize], what: &str) -> Result<LinearModel, EstimateError> {
    if rows.len() < names.len() + 1 {
        return Err(EstimateError::InsufficientData(format!(
            "{what}: {} rows for {} coefficients",
            rows.len(),
            names.len() + 1
        )));
    }
    let xs: Vec<Vec<f64>> = cols.iter().map(|c| rows.iter().map(|&r| c[r]).collect()).collect();
    let ys: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
    fit_columns(names, &xs, &ys, 0.0)
}
