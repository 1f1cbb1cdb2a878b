use super::TrialError;
use crate::sampling::{RngSpec, Sampler};
use crate::scm::{Scm, ScmError};

/// Something that reveals covariates for step `t` and answers an action with
/// an outcome. Implementations must be deterministic in `(t, rng)`.
pub trait Environment: Sync {
    fn actions(&self) -> &[f64];
    fn covariate_names(&self) -> &[String];
    fn observe(&self, t: u64, rng: &RngSpec) -> Result<Vec<f64>, TrialError>;
    fn respond(&self, t: u64, action: f64, covariates: &[f64], rng: &RngSpec) -> Result<f64, TrialError>;
}

/// Simulates a trial participant by sampling the model with the action node
/// set by surgery. Every node draws from its own stream keyed by step and
/// name, so the covariates of step `t` do not depend on which action is
/// chosen.
#[derive(Debug, Clone)]
pub struct ScmEnvironment {
    actions: Vec<f64>,
    covariates: Vec<String>,
    /// One sampler per action, the model surged at that action value.
    samplers: Vec<Sampler>,
    outcome_pos: usize,
    covariate_pos: Vec<usize>,
}

impl ScmEnvironment {
    pub fn new<S: AsRef<str>>(scm: &Scm, action: &str, outcome: &str, covariates: &[S]) -> Result<Self, TrialError> {
        let covariates: Vec<String> = covariates.iter().map(|c| c.as_ref().to_string()).collect();
        for n in covariates.iter().map(String::as_str).chain([action, outcome]) {
            if !scm.dag().contains(n) {
                return Err(ScmError::UnknownNode(n.to_string()).into());
            }
        }
        if action == outcome || covariates.iter().any(|c| c == action || c == outcome) {
            return Err(TrialError::Config("action, outcome and covariates must be distinct".into()));
        }
        let downstream = scm.dag().descendants(action);
        if let Some(c) = covariates.iter().find(|c| downstream.contains(*c)) {
            return Err(TrialError::Config(format!(
                "covariate `{c}` is affected by the action and cannot be observed before it"
            )));
        }
        let actions: Vec<f64> = scm
            .domain(action)
            .and_then(|d| d.values())
            .ok_or_else(|| TrialError::Config(format!("action `{action}` must have a discrete domain")))?
            .to_vec();
        let samplers: Vec<Sampler> = actions
            .iter()
            .map(|&v| Ok(Sampler::new(&scm.intervene(action, v)?)?))
            .collect::<Result<_, TrialError>>()?;
        let order = samplers[0].order();
        let pos = |n: &str| order.iter().position(|o| o == n).expect("node in model");
        Ok(ScmEnvironment {
            outcome_pos: pos(outcome),
            covariate_pos: covariates.iter().map(|c| pos(c)).collect(),
            actions,
            covariates,
            samplers,
        })
    }
}

impl Environment for ScmEnvironment {
    fn actions(&self) -> &[f64] {
        &self.actions
    }

    fn covariate_names(&self) -> &[String] {
        &self.covariates
    }

    fn observe(&self, t: u64, rng: &RngSpec) -> Result<Vec<f64>, TrialError> {
        if self.covariate_pos.is_empty() {
            return Ok(Vec::new());
        }
        let row = self.samplers[0].sample_row(rng, t)?;
        Ok(self.covariate_pos.iter().map(|&i| row[i]).collect())
    }

    fn respond(&self, t: u64, action: f64, _covariates: &[f64], rng: &RngSpec) -> Result<f64, TrialError> {
        let i = self
            .actions
            .iter()
            .position(|a| *a == action)
            .ok_or_else(|| TrialError::Config(format!("action {action} is not in the action domain")))?;
        Ok(self.samplers[i].sample_row(rng, t)?[self.outcome_pos])
    }
}

/// Behaves like `before` for steps `t < switch_at` and like `after` from then on.
#[derive(Debug, Clone)]
pub struct DriftingEnvironment<E> {
    pub before: E,
    pub after: E,
    pub switch_at: u64,
}

impl<E: Environment> DriftingEnvironment<E> {
    pub fn new(before: E, after: E, switch_at: u64) -> Result<Self, TrialError> {
        if before.actions() != after.actions() || before.covariate_names() != after.covariate_names() {
            return Err(TrialError::Config(
                "drifting environments must share actions and covariates".into(),
            ));
        }
        Ok(DriftingEnvironment { before, after, switch_at })
    }

    fn current(&self, t: u64) -> &E {
        if t < self.switch_at {
            &self.before
        } else {
            &self.after
        }
    }
}

impl<E: Environment> Environment for DriftingEnvironment<E> {
    fn actions(&self) -> &[f64] {
        self.before.actions()
    }

    fn covariate_names(&self) -> &[String] {
        self.before.covariate_names()
    }

    fn observe(&self, t: u64, rng: &RngSpec) -> Result<Vec<f64>, TrialError> {
        self.current(t).observe(t, rng)
    }

    fn respond(&self, t: u64, action: f64, covariates: &[f64], rng: &RngSpec) -> Result<f64, TrialError> {
        self.current(t).respond(t, action, covariates, rng)
    }
}
