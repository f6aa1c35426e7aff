//! Simulation environments exposing typical states and accepting typical
//! actions.

mod item_sale;
mod wireless;

pub use item_sale::{ItemSaleConfig, ItemSaleEnv, PriceDistribution};
pub use wireless::{channel_draw, shannon_rate, WirelessConfig, WirelessEnv, WirelessUser};

use crate::error::Result;
use crate::network::Objective;
use crate::translate::{TypicalAction, TypicalState};

/// What one environment step produced.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    /// The scalar the agent trains on (reward, or Lagrangian cost).
    pub utility: f64,
    /// The raw objective being tracked (reward; transmission power).
    pub objective_value: f64,
    /// Per-item constraint utilities (rates, in Mbps) when constrained;
    /// empty otherwise.
    pub per_item: Vec<f64>,
}

/// A dynamic scheduling system: one item served per timestep.
pub trait ScheduleEnv {
    fn num_items(&self) -> usize;
    /// Current typical state; continuous features already normalized to [0,1].
    fn state(&self) -> &TypicalState;
    /// Sizes of the auxiliary decision sets M_l (empty when L = 0).
    fn decision_sets(&self) -> &[usize];
    fn objective(&self) -> Objective;
    /// Serve the chosen item, emit the utility, advance the state.
    fn step(&mut self, action: &TypicalAction) -> Result<StepOutcome>;
    /// Current multiplier values, when the environment is constrained.
    fn multipliers(&self) -> &[f64] {
        &[]
    }
}
