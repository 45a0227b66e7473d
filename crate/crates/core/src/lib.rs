//! Active epistemic control for planning under partial observability.
//!
//! The controller keeps verified facts and predicted beliefs in separate
//! stores, spends a query budget on the predicates that discriminate between
//! candidate plans, and commits only to plans whose preconditions and goal
//! are certified by verified facts alone.

pub mod controller;
pub mod domain;
pub mod environment;
pub mod hypotheses;
pub mod predictor;
pub mod store;
pub mod trace;
pub mod verifier;

pub use controller::{run_episode, select_precondition, ControllerConfig, EpisodeOutcome, Mode};
pub use domain::{DomainSchema, GoalConstraints, GroundAction, Instance, RuleSet};
pub use environment::{sample_world, EnvInstanceConfig, Environment, HiddenWorld, OracleConfig, SimEnv};
pub use hypotheses::Hypothesis;
pub use predictor::{SyntheticPredictor, SyntheticPredictorConfig};
pub use store::{GroundedFact, GroundedStore, PredicateId, Provenance};
