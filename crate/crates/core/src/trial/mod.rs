//! Sequential trials: a mixture of uniform exploration and Boltzmann
//! exploitation over running outcome estimates, with bias checking against
//! the exploration-only estimates.

mod contextual;
mod env;
mod policy;
mod schedule;
mod state;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::estimators::EstimateError;
use crate::sampling::{RngSpec, SamplingError};
use crate::scm::ScmError;

pub use contextual::{fit_contextual, ContextMode, ContextualModel};
pub use env::{DriftingEnvironment, Environment, ScmEnvironment};
pub use policy::policy_probs;
pub use schedule::Schedule;
pub use state::{ArmStats, BiasCheck, LogEntry, TrialState, UpdateMode};

#[derive(Debug, Error)]
pub enum TrialError {
    #[error(transparent)]
    Scm(#[from] ScmError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error("invalid schedule `{text}`: {reason}")]
    Schedule { text: String, reason: String },
    #[error("invalid trial configuration: {0}")]
    Config(String),
}

impl From<crate::sampling::DataError> for TrialError {
    fn from(e: crate::sampling::DataError) -> Self {
        TrialError::Sampling(e.into())
    }
}

/// Which estimates the exploitation branch ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyMode {
    /// Overall per-action estimates ŷ(a).
    Marginal,
    /// Estimates for the current step's covariate cell, ŷ(a|x').
    Conditional,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub steps: u64,
    pub epsilon: Schedule,
    pub beta: Schedule,
    pub mode: UpdateMode,
    pub policy: PolicyMode,
}

impl TrialConfig {
    /// A randomized controlled trial: always explore.
    pub fn rct(steps: u64) -> Self {
        TrialConfig {
            steps,
            epsilon: Schedule::Constant(1.0),
            beta: Schedule::Constant(f64::INFINITY),
            mode: UpdateMode::RecursiveMean,
            policy: PolicyMode::Marginal,
        }
    }

    fn check(&self) -> Result<(), TrialError> {
        if self.steps == 0 {
            return Err(TrialError::Config("a trial needs at least one step".into()));
        }
        self.epsilon.check_rate()?;
        self.beta.check_temperature()
    }
}

/// Takes step `state.t() + 1`: observe covariates, flip the explore coin with
/// rate ε_t, pick an action uniformly or from the Boltzmann distribution at
/// temperature β_t, then record the outcome.
pub fn step<E: Environment + ?Sized>(
    state: &mut TrialState,
    config: &TrialConfig,
    env: &E,
    rng: &RngSpec,
) -> Result<LogEntry, TrialError> {
    let t = state.t() + 1;
    let env_rng = rng.child(0, "environment");
    let x = env.observe(t, &env_rng)?;
    let eps = config.epsilon.value(t);
    let beta = config.beta.value(t);
    let mut r = rng.stream(t, "policy");
    let explore = r.random::<f64>() < eps;
    let k = state.actions().len();
    let i = if explore {
        r.random_range(0..k)
    } else {
        let values = state.policy_values(match config.policy {
            PolicyMode::Marginal => None,
            PolicyMode::Conditional => Some(&x),
        });
        let q = policy::boltzmann(&values, state.action_names(), beta);
        let u: f64 = r.random();
        let mut acc = 0.0;
        q.iter()
            .position(|p| {
                acc += p;
                u < acc
            })
            .unwrap_or_else(|| q.iter().rposition(|p| *p > 0.0).expect("pmf has mass"))
    };
    let action = state.actions()[i];
    let y = env.respond(t, action, &x, &env_rng)?;
    state.record(explore, action, y, x, eps)?;
    Ok(state.log().last().expect("just recorded").clone())
}

/// Per-action summary in a [`TrialReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmReport {
    pub action: f64,
    pub count: u64,
    pub estimate: f64,
    pub estimated: bool,
    pub explore_count: u64,
    pub explore_estimate: Option<f64>,
    /// `(ŷ − ỹ)²`, absent without exploration steps.
    pub bias: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialReport {
    pub steps: u64,
    pub update_mode: UpdateMode,
    pub arms: Vec<ArmReport>,
    pub cumulative_outcome: f64,
    pub mean_outcome: f64,
    pub effective_explore: f64,
    pub explore_fraction: f64,
    pub warnings: Vec<String>,
}

impl TrialReport {
    pub fn from_state(state: &TrialState) -> Self {
        let bias = state.bias_check();
        let arms: Vec<ArmReport> = state
            .arms()
            .iter()
            .zip(state.actions())
            .zip(&bias.arms)
            .map(|((a, &action), b)| ArmReport {
                action,
                count: a.count,
                estimate: a.estimate,
                estimated: a.is_estimated(),
                explore_count: a.explore_count,
                explore_estimate: (a.explore_count > 0).then_some(a.explore_estimate),
                bias: *b,
            })
            .collect();
        let warnings = arms
            .iter()
            .filter(|a| a.explore_count == 0)
            .map(|a| format!("action {} was never explored; its bias cannot be checked", a.action))
            .collect();
        TrialReport {
            steps: state.t(),
            update_mode: state.mode(),
            arms,
            cumulative_outcome: state.cumulative_outcome(),
            mean_outcome: state.cumulative_outcome() / state.t().max(1) as f64,
            effective_explore: bias.effective_explore,
            explore_fraction: bias.explore_fraction,
            warnings,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn run_trial<E: Environment + ?Sized>(
    env: &E,
    config: &TrialConfig,
    rng: &RngSpec,
) -> Result<(TrialState, TrialReport), TrialError> {
    config.check()?;
    let mut state = TrialState::new(env.actions(), env.covariate_names(), config.mode)?;
    for _ in 0..config.steps {
        step(&mut state, config, env, rng)?;
    }
    let report = TrialReport::from_state(&state);
    Ok((state, report))
}

/// Independent replications in parallel, replication `i` seeded by
/// `rng.child(i, "replication")`.
pub fn run_replications<E: Environment + ?Sized>(
    env: &E,
    config: &TrialConfig,
    rng: &RngSpec,
    reps: usize,
) -> Result<Vec<TrialState>, TrialError> {
    (0..reps as u64)
        .into_par_iter()
        .map(|i| run_trial(env, config, &rng.child(i, "replication")).map(|(s, _)| s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Outcome equals the action plus a coin flip.
    struct Coin;

    impl Environment for Coin {
        fn actions(&self) -> &[f64] {
            &[0.0, 1.0]
        }
        fn covariate_names(&self) -> &[String] {
            &[]
        }
        fn observe(&self, _: u64, _: &RngSpec) -> Result<Vec<f64>, TrialError> {
            Ok(Vec::new())
        }
        fn respond(&self, t: u64, a: f64, _: &[f64], rng: &RngSpec) -> Result<f64, TrialError> {
            Ok(a + f64::from(rng.stream(t, "coin").random::<bool>()))
        }
    }

    #[test]
    fn always_exploring_has_zero_bias() {
        let (state, report) = run_trial(&Coin, &TrialConfig::rct(500), &RngSpec::new(4)).unwrap();
        assert_eq!(state.t(), 500);
        assert!(report.arms.iter().all(|a| a.bias == Some(0.0)));
        assert_eq!(report.effective_explore, 500.0);
        assert_eq!(report.explore_fraction, 1.0);
    }

    #[test]
    fn replay_is_deterministic() {
        let config = TrialConfig {
            epsilon: "geom:1,0.99,0.05".parse().unwrap(),
            beta: "const:0.1".parse().unwrap(),
            ..TrialConfig::rct(300)
        };
        let (a, _) = run_trial(&Coin, &config, &RngSpec::new(9)).unwrap();
        let (b, _) = run_trial(&Coin, &config, &RngSpec::new(9)).unwrap();
        assert_eq!(a.log(), b.log());
        let (c, _) = run_trial(&Coin, &config, &RngSpec::new(10)).unwrap();
        assert_ne!(a.log(), c.log());
    }

    #[test]
    fn greedy_from_start_flags_unexplored_arms() {
        let config = TrialConfig {
            epsilon: Schedule::Constant(0.0),
            beta: Schedule::Constant(0.0),
            ..TrialConfig::rct(50)
        };
        let (state, report) = run_trial(&Coin, &config, &RngSpec::new(1)).unwrap();
        assert_eq!(report.warnings.len(), 2);
        assert!(report.arms.iter().all(|a| a.bias.is_none()));
        // without exploration an optimistic tie can lock onto the first arm
        assert_eq!(state.arms().iter().map(|a| a.count).sum::<u64>(), 50);
        assert!(state.arms().iter().any(|a| a.count >= 25));
    }

    #[test]
    fn bad_configs() {
        let bad = TrialConfig {
            epsilon: Schedule::Constant(2.0),
            ..TrialConfig::rct(1)
        };
        assert!(run_trial(&Coin, &bad, &RngSpec::new(0)).is_err());
        assert!(run_trial(&Coin, &TrialConfig::rct(0), &RngSpec::new(0)).is_err());
    }
}
