//! Solver and simulator for symmetric transmission strategies on a slotted
//! multi-access channel.
//!
//! A team of `n` sensors shares one channel. Each sensor has a fixed private
//! mode (Designer, Aggressive, or Passive); a slot succeeds exactly when one
//! sensor transmits. All sensors run the same strategy, so planning happens
//! from the point of view of a coordinator that sees only the shared action
//! history: it tracks a belief over the joint mode profile and picks one
//! prescription (a map from mode to transmit probability) per slot.
//!
//! The crate provides:
//! - [`model`]: modes, joint actions, the per-slot cost, scenario files.
//! - [`belief`]: the coordinator belief, its Bayes update, canonical keys.
//! - [`prescription`]: quantized prescription spaces and their enumeration.
//! - [`solver`]: reachable-belief enumeration and backward induction.
//! - [`policies`]: decentralized execution of solved policies and the
//!   threshold baseline family.
//! - [`evaluation`]: exact and Monte-Carlo expected-cost evaluation.

pub mod belief;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod policies;
pub mod prescription;
pub mod solver;

pub use belief::{Belief, BeliefKey};
pub use error::{Error, Result};
pub use evaluation::{CostReport, EpisodeTrace, EvalMethod};
pub use model::{stage_cost, JointAction, Mode, ModeProfile, Scenario, SpaceVariant};
pub use policies::{AgentState, OptimalPolicy, Policy, ThresholdParams, ThresholdPolicy};
pub use prescription::{Prescription, PrescriptionSpace};
pub use solver::{solve, ReachableSets, SolvedPolicy};
