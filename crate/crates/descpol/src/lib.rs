//! Descriptive scheduling policies: learn on a fixed-shape binary summary
//! of the system state so one policy transfers across systems with
//! different item counts.
//!
//! The crate is organized around the two translations between the typical
//! (per-item) view and the descriptive (per-condition) view:
//!
//! - [`partition`] / [`descriptive`] define feature partitions, binary
//!   descriptive states, and descriptive actions;
//! - [`translate`] maps typical states/actions to and from descriptive ones;
//! - [`network`] and [`dqn`] implement the value network and the learner;
//! - [`lagrangian`] adds multiplier machinery for constrained objectives;
//! - [`env`] provides the item-sale and wireless simulators;
//! - [`agent`] wires a learner to an environment through the translations;
//! - [`tabular`] holds exact small-instance oracles;
//! - [`federated`] averages learners trained on separate systems;
//! - [`experiment`] drives full scenario runs and metric export.

pub mod agent;
pub mod descriptive;
pub mod dqn;
pub mod env;
pub mod error;
pub mod experiment;
pub mod federated;
pub mod lagrangian;
pub mod network;
pub mod partition;
pub mod tabular;
pub mod translate;

pub use agent::{ConventionalAgent, DescriptiveAgent, RandomPolicy};
pub use descriptive::{
    action_space_size, feasible_actions, feasible_mask, DescriptiveAction, DescriptiveState,
};
pub use dqn::{DqnConfig, DqnCore, EpsilonSchedule};
pub use env::{ItemSaleConfig, ItemSaleEnv, ScheduleEnv, StepOutcome, WirelessConfig, WirelessEnv};
pub use error::{Error, Result};
pub use lagrangian::{ConstraintDirection, MultiplierVector};
pub use network::{NetworkArchitecture, Objective, QNetworkParams};
pub use partition::{Condition, FeaturePartition, PartitionScheme};
pub use translate::{translate_action, translate_state, TypicalAction, TypicalState};
