//! Causal inference toolkit: structural causal models, exact interventional
//! inference on discrete models, effect estimators and adaptive trials.

pub mod scm;
pub mod dsl;
pub mod exact;
pub mod sampling;
pub mod estimators;
pub mod trial;
pub mod fixtures;
pub mod experiments;
