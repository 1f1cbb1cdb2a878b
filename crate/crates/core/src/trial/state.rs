use std::collections::BTreeMap;

use ordered_float::OrderedFloat;
use serde::Serialize;

use super::TrialError;
use crate::sampling::Dataset;
use crate::scm::ValueKey;

/// How running estimates absorb a new outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "eta")]
pub enum UpdateMode {
    /// Mean of every outcome seen for the arm.
    RecursiveMean,
    /// `ŷ ← η·ŷ + (1−η)·y` on steps where the arm is chosen, starting from 0.
    Ema(f64),
}

impl UpdateMode {
    fn apply(self, estimate: f64, count_after: u64, y: f64) -> f64 {
        match self {
            UpdateMode::RecursiveMean => estimate + (y - estimate) / count_after as f64,
            UpdateMode::Ema(eta) => eta * estimate + (1.0 - eta) * y,
        }
    }
}

/// Running statistics for one action. `estimate` is ŷ over every step the
/// action was taken; `explore_estimate` is ỹ over exploration steps only.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ArmStats {
    pub count: u64,
    pub estimate: f64,
    pub explore_count: u64,
    pub explore_estimate: f64,
}

impl ArmStats {
    /// False until the arm has been taken at least once; `estimate` is then
    /// only its initial value.
    pub fn is_estimated(&self) -> bool {
        self.count > 0
    }

    fn update(&mut self, y: f64, explore: bool, mode: UpdateMode) {
        self.count += 1;
        self.estimate = mode.apply(self.estimate, self.count, y);
        if explore {
            self.explore_count += 1;
            self.explore_estimate = mode.apply(self.explore_estimate, self.explore_count, y);
        }
    }
}

/// One trial step: explore bit, action, outcome and observed covariates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogEntry {
    pub t: u64,
    pub explore: bool,
    pub action: f64,
    pub outcome: f64,
    pub covariates: Vec<f64>,
}

/// Per-arm squared gap between ŷ and ỹ, with how much exploration backs it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasCheck {
    /// `None` for arms without any exploration step.
    pub arms: Vec<Option<f64>>,
    /// Σ ε_t over the steps so far.
    pub effective_explore: f64,
    /// Fraction of the first t steps that explored.
    pub explore_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialState {
    actions: Vec<f64>,
    names: Vec<String>,
    covariate_names: Vec<String>,
    mode: UpdateMode,
    arms: Vec<ArmStats>,
    conditional: BTreeMap<ValueKey, Vec<ArmStats>>,
    t: u64,
    explore_steps: u64,
    epsilon_sum: f64,
    cumulative_outcome: f64,
    log: Vec<LogEntry>,
}

impl TrialState {
    pub fn new(actions: &[f64], covariate_names: &[String], mode: UpdateMode) -> Result<Self, TrialError> {
        if actions.is_empty() {
            return Err(TrialError::Config("a trial needs at least one action".into()));
        }
        let mut seen: Vec<f64> = actions.to_vec();
        seen.sort_by(f64::total_cmp);
        seen.dedup();
        if seen.len() != actions.len() || actions.iter().any(|a| !a.is_finite()) {
            return Err(TrialError::Config("actions must be distinct finite values".into()));
        }
        if let UpdateMode::Ema(eta) = mode {
            if !(0.0..1.0).contains(&eta) {
                return Err(TrialError::Config(format!("EMA rate must lie in [0, 1), got {eta}")));
            }
        }
        Ok(TrialState {
            actions: actions.to_vec(),
            names: actions.iter().map(|a| a.to_string()).collect(),
            covariate_names: covariate_names.to_vec(),
            mode,
            arms: vec![ArmStats::default(); actions.len()],
            conditional: BTreeMap::new(),
            t: 0,
            explore_steps: 0,
            epsilon_sum: 0.0,
            cumulative_outcome: 0.0,
            log: Vec::new(),
        })
    }

    /// Steps taken so far.
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn actions(&self) -> &[f64] {
        &self.actions
    }

    pub fn action_names(&self) -> &[String] {
        &self.names
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn mode(&self) -> UpdateMode {
        self.mode
    }

    pub fn arms(&self) -> &[ArmStats] {
        &self.arms
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn cumulative_outcome(&self) -> f64 {
        self.cumulative_outcome
    }

    pub fn epsilon_sum(&self) -> f64 {
        self.epsilon_sum
    }

    pub fn action_index(&self, action: f64) -> Option<usize> {
        self.actions.iter().position(|a| *a == action)
    }

    /// Applies one observed step. `epsilon` is the exploration rate that was in
    /// force, accumulated for the effective explore count.
    pub fn record(&mut self, explore: bool, action: f64, outcome: f64, covariates: Vec<f64>, epsilon: f64) -> Result<(), TrialError> {
        let i = self
            .action_index(action)
            .ok_or_else(|| TrialError::Config(format!("unknown action {action}")))?;
        if covariates.len() != self.covariate_names.len() {
            return Err(TrialError::Config("covariate vector has the wrong length".into()));
        }
        self.t += 1;
        self.arms[i].update(outcome, explore, self.mode);
        let key: ValueKey = covariates.iter().map(|v| OrderedFloat(*v)).collect();
        let k = self.actions.len();
        self.conditional.entry(key).or_insert_with(|| vec![ArmStats::default(); k])[i].update(outcome, explore, self.mode);
        self.explore_steps += u64::from(explore);
        self.epsilon_sum += epsilon;
        self.cumulative_outcome += outcome;
        self.log.push(LogEntry {
            t: self.t,
            explore,
            action,
            outcome,
            covariates,
        });
        Ok(())
    }

    /// Values the policy ranks: estimated arms use ŷ, unestimated arms are
    /// treated optimistically as the best current estimate. `covariates`
    /// switches to the estimates for that covariate cell.
    pub fn policy_values(&self, covariates: Option<&[f64]>) -> Vec<f64> {
        let fresh;
        let arms: &[ArmStats] = match covariates {
            None => &self.arms,
            Some(x) => match self.conditional_estimates(x) {
                Some(a) => a,
                None => {
                    fresh = vec![ArmStats::default(); self.actions.len()];
                    &fresh
                }
            },
        };
        let best = arms
            .iter()
            .filter(|a| a.is_estimated())
            .map(|a| a.estimate)
            .fold(f64::NEG_INFINITY, f64::max);
        let best = if best.is_finite() { best } else { 0.0 };
        arms.iter()
            .map(|a| if a.is_estimated() { a.estimate } else { best })
            .collect()
    }

    /// Estimates from the steps whose covariates equal `key`; `None` if that
    /// cell never occurred.
    pub fn conditional_estimates(&self, key: &[f64]) -> Option<&[ArmStats]> {
        let key: ValueKey = key.iter().map(|v| OrderedFloat(*v)).collect();
        self.conditional.get(&key).map(Vec::as_slice)
    }

    /// Recomputes the conditional estimates for `key` from the log alone.
    pub fn replay_conditional(&self, key: &[f64]) -> Option<Vec<ArmStats>> {
        let mut arms = vec![ArmStats::default(); self.actions.len()];
        let mut any = false;
        for e in self.log.iter().filter(|e| e.covariates == key) {
            let i = self.action_index(e.action).expect("logged action");
            arms[i].update(e.outcome, e.explore, self.mode);
            any = true;
        }
        any.then_some(arms)
    }

    pub fn bias_check(&self) -> BiasCheck {
        BiasCheck {
            arms: self
                .arms
                .iter()
                .map(|a| (a.explore_count > 0).then(|| (a.estimate - a.explore_estimate).powi(2)))
                .collect(),
            effective_explore: self.epsilon_sum,
            explore_fraction: if self.t == 0 {
                0.0
            } else {
                self.explore_steps as f64 / self.t as f64
            },
        }
    }

    /// The log as columns `t, e, a, y` followed by the covariates.
    pub fn log_dataset(&self, action: &str, outcome: &str) -> Result<Dataset, TrialError> {
        let mut cols: Vec<(String, Vec<f64>)> = vec![
            ("t".into(), self.log.iter().map(|e| e.t as f64).collect()),
            ("e".into(), self.log.iter().map(|e| f64::from(u8::from(e.explore))).collect()),
            (action.into(), self.log.iter().map(|e| e.action).collect()),
            (outcome.into(), self.log.iter().map(|e| e.outcome).collect()),
        ];
        for (j, name) in self.covariate_names.iter().enumerate() {
            cols.push((name.clone(), self.log.iter().map(|e| e.covariates[j]).collect()));
        }
        Ok(Dataset::from_columns(cols)?)
    }
}
