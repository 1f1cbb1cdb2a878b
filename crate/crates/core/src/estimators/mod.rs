//! Effect estimators over a [`Dataset`], each producing an [`EstimateReport`].

mod adjustment;
mod design;
mod dml;
mod iv;
mod linear;
mod matching;
mod outcome;
mod propensity;

use std::collections::BTreeMap;

use ordered_float::OrderedFloat;
use rand::Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;

use crate::sampling::{DataError, Dataset, RngSpec};
use crate::scm::ValueKey;

pub use adjustment::{estimate_doubly_robust, estimate_ipw, estimate_naive, estimate_ols, estimate_regression_adjustment};
pub use design::{estimate_did, estimate_rdd, RddOptions};
pub use dml::estimate_dml;
pub use iv::{estimate_iv_2sls, IvOptions};
pub use linear::{fit_columns, fit_least_squares, LinearModel, INTERCEPT};
pub use matching::{estimate_matching, Distance, MatchMode, MatchOptions, Selection};
pub use outcome::{fit_outcome_model, OutcomeFit, OutcomeKind, OutcomeModel};
pub use propensity::{fit_propensity, PropensityFit, PropensityKind, PropensityModel, DEFAULT_CLIP};

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("column `{column}` must be binary (0/1); found {value}")]
    NonBinaryAction { column: String, value: f64 },
    #[error("column `{0}` contains non-finite values")]
    NonFinite(String),
    #[error("rank-deficient design; collinear columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),
    #[error("positivity violated; no rows for one arm in: {}", .0.join("; "))]
    Positivity(Vec<String>),
    #[error("unmatched covariate cells (an arm has no candidates): {}", .0.join("; "))]
    UnmatchedCells(Vec<String>),
    #[error("no rows with {column}={value}")]
    EmptyArm { column: String, value: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),
    #[error("covariate cell {0} was not seen when fitting")]
    UnseenCell(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Estimator identifiers; the serialized names double as CLI method names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Regression,
    Naive,
    Ols,
    Ipw,
    Dr,
    Matching,
    Iv,
    Did,
    Rdd,
    Dml,
}

impl Method {
    pub const ALL: [Method; 10] = [
        Method::Regression,
        Method::Naive,
        Method::Ols,
        Method::Ipw,
        Method::Dr,
        Method::Matching,
        Method::Iv,
        Method::Did,
        Method::Rdd,
        Method::Dml,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Regression => "regression",
            Method::Naive => "naive",
            Method::Ols => "ols",
            Method::Ipw => "ipw",
            Method::Dr => "dr",
            Method::Matching => "matching",
            Method::Iv => "iv",
            Method::Did => "did",
            Method::Rdd => "rdd",
            Method::Dml => "dml",
        }
    }

    pub fn from_name(name: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == name)
    }
}

/// Uniform estimator output. A NaN estimate (flagged unreliable) serializes as null.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub method: Method,
    #[serde(serialize_with = "nan_as_null")]
    pub estimate: f64,
    /// Bootstrap standard error; `None` when no replicates were requested.
    pub std_error: Option<f64>,
    pub n_used: usize,
    pub diagnostics: BTreeMap<String, Value>,
    pub warnings: Vec<String>,
}

fn nan_as_null<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

impl EstimateReport {
    pub fn new(method: Method, estimate: f64, n_used: usize) -> Self {
        EstimateReport {
            method,
            estimate,
            std_error: None,
            n_used,
            diagnostics: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    pub fn diag(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.diagnostics.insert(key.to_string(), value.into());
        self
    }

    pub fn diagnostic(&self, key: &str) -> Option<f64> {
        self.diagnostics.get(key).and_then(Value::as_f64)
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Which columns play which role, and the two action values to contrast.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectSpec {
    pub action: String,
    pub outcome: String,
    pub covariates: Vec<String>,
    pub treated: f64,
    pub control: f64,
}

impl EffectSpec {
    pub fn new(action: &str, outcome: &str) -> Self {
        EffectSpec {
            action: action.to_string(),
            outcome: outcome.to_string(),
            covariates: Vec::new(),
            treated: 1.0,
            control: 0.0,
        }
    }

    pub fn covariates(mut self, covariates: &[&str]) -> Self {
        self.covariates = covariates.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn arms(mut self, treated: f64, control: f64) -> Self {
        self.treated = treated;
        self.control = control;
        self
    }
}

/// Nonparametric bootstrap over rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Bootstrap {
    pub reps: usize,
    pub rng: RngSpec,
}

impl Bootstrap {
    pub const DEFAULT_REPS: usize = 200;

    pub fn new(reps: usize, rng: RngSpec) -> Self {
        Bootstrap { reps, rng }
    }

    pub fn none() -> Self {
        Bootstrap::new(0, RngSpec::default())
    }

    /// Standard deviation of the statistic over resampled datasets. Replicates
    /// are independent (one derived stream each), so they run in parallel and
    /// the result does not depend on scheduling. Failed replicates are skipped
    /// and counted.
    pub fn std_error<F>(&self, data: &Dataset, stat: F) -> (Option<f64>, usize)
    where
        F: Fn(&Dataset, &RngSpec) -> Result<f64, EstimateError> + Sync,
    {
        if self.reps == 0 {
            return (None, 0);
        }
        let n = data.n_rows();
        let values: Vec<Option<f64>> = (0..self.reps as u64)
            .into_par_iter()
            .map(|rep| {
                let mut rng = self.rng.stream(rep, "bootstrap");
                let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n.max(1))).collect();
                let sample = data.select_rows(if n == 0 { &[] } else { &rows });
                stat(&sample, &self.rng.child(rep, "bootstrap-inner"))
                    .ok()
                    .filter(|v| v.is_finite())
            })
            .collect();
        let ok: Vec<f64> = values.iter().flatten().copied().collect();
        let failed = values.len() - ok.len();
        if ok.len() < 2 {
            return (None, failed);
        }
        let m = ok.iter().sum::<f64>() / ok.len() as f64;
        let var = ok.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (ok.len() - 1) as f64;
        (Some(var.sqrt()), failed)
    }

    /// Fills `report.std_error` (when replicates were requested) using `stat`
    /// re-run on each resample.
    pub fn attach<F>(&self, mut report: EstimateReport, data: &Dataset, stat: F) -> EstimateReport
    where
        F: Fn(&Dataset, &RngSpec) -> Result<f64, EstimateError> + Sync,
    {
        if self.reps == 0 {
            return report;
        }
        let (se, failed) = self.std_error(data, stat);
        report.std_error = se;
        report.diagnostics.insert("bootstrap_reps".into(), self.reps.into());
        if failed > 0 {
            report.warn(format!("{failed} of {} bootstrap replicates failed and were skipped", self.reps));
        }
        if se.is_none() {
            report.warn("too few successful bootstrap replicates for a standard error");
        }
        report
    }
}

/// Indices of rows where every given column is non-NaN.
pub fn complete_rows(cols: &[&[f64]]) -> Vec<usize> {
    let n = cols.first().map_or(0, |c| c.len());
    (0..n).filter(|&r| cols.iter().all(|c| !c[r].is_nan())).collect()
}

pub(crate) fn require_binary(column: &str, values: &[f64]) -> Result<(), EstimateError> {
    match values.iter().find(|v| **v != 0.0 && **v != 1.0) {
        Some(v) => Err(EstimateError::NonBinaryAction {
            column: column.to_string(),
            value: *v,
        }),
        None => Ok(()),
    }
}

pub(crate) fn cell_key(cols: &[&[f64]], row: usize) -> ValueKey {
    cols.iter().map(|c| OrderedFloat(c[row])).collect()
}

pub(crate) fn format_cell(names: &[String], key: &ValueKey) -> String {
    if names.is_empty() {
        return "(all rows)".into();
    }
    names
        .iter()
        .zip(key)
        .map(|(n, v)| format!("{n}={}", v.0))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Column views for the named covariates.
pub(crate) fn covariate_columns<'a>(data: &'a Dataset, names: &[String]) -> Result<Vec<&'a [f64]>, EstimateError> {
    names.iter().map(|n| Ok(data.require(n)?)).collect()
}

pub(crate) fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (s, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_json_shape() {
        let mut r = EstimateReport::new(Method::Ipw, f64::NAN, 3).diag("min_weight", 1.5);
        r.warn("w");
        let v: Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["method"], "ipw");
        assert!(v["estimate"].is_null());
        assert!(v["std_error"].is_null());
        assert_eq!(v["diagnostics"]["min_weight"], 1.5);
        assert_eq!(v["warnings"][0], "w");
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::from_name(m.name()), Some(m));
            assert_eq!(serde_json::to_value(m).unwrap(), m.name());
        }
    }

    #[test]
    fn bootstrap_is_deterministic_and_sized() {
        let ds = Dataset::from_columns([("y", (0..200).map(f64::from).collect())]).unwrap();
        let stat = |d: &Dataset, _: &RngSpec| Ok(mean(d.column("y").unwrap().iter().copied()).unwrap());
        let b = Bootstrap::new(100, RngSpec::new(3));
        let (a, fa) = b.std_error(&ds, stat);
        let (c, _) = b.std_error(&ds, stat);
        assert_eq!(a, c);
        assert_eq!(fa, 0);
        // sd of the mean of 200 uniform-ish values: 57.7 / sqrt(200) ≈ 4.1
        let se = a.unwrap();
        assert!((3.0..5.5).contains(&se), "{se}");
        assert_eq!(Bootstrap::none().std_error(&ds, stat), (None, 0));
    }
}
