//! Translation between the indexed (typical) formulation and the
//! descriptive one: d_s maps item feature vectors to a condition-occupancy
//! tensor, d_a maps a chosen condition back to a concrete item.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::descriptive::{DescriptiveAction, DescriptiveState};
use crate::error::{Error, Result};
use crate::partition::{Condition, PartitionScheme};

/// Ordered list of per-item feature vectors f_n = (f_{n,1}, ..., f_{n,K}).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypicalState {
    pub features: Vec<Vec<f64>>,
}

impl TypicalState {
    pub fn new(features: Vec<Vec<f64>>) -> Self {
        TypicalState { features }
    }

    pub fn num_items(&self) -> usize {
        self.features.len()
    }

    /// Item features concatenated in item order; the conventional-policy
    /// network input.
    pub fn flatten(&self) -> Vec<f64> {
        self.features.iter().flatten().copied().collect()
    }
}

/// Chosen item index (1-based) plus auxiliary decision indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypicalAction {
    pub item: usize,
    pub decisions: Vec<usize>,
}

/// State translation d_s: condition h is occupied iff some item bins to h
/// on every feature.
pub fn translate_state(state: &TypicalState, scheme: &PartitionScheme) -> Result<DescriptiveState> {
    let shape = scheme.shape();
    let mut out = DescriptiveState::zeros(shape);
    for item in &state.features {
        out.set(&bin_item(item, scheme)?, true);
    }
    Ok(out)
}

/// N(h): indices (1-based) of the items whose features bin exactly to h.
pub fn items_in_condition(
    state: &TypicalState,
    condition: &Condition,
    scheme: &PartitionScheme,
) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (i, item) in state.features.iter().enumerate() {
        if bin_item(item, scheme)? == *condition {
            out.push(i + 1);
        }
    }
    Ok(out)
}

/// Action translation d_a: pick an item uniformly at random from N(h) and
/// pass the auxiliary decisions through. Deterministic given the rng state.
pub fn translate_action<R: Rng>(
    action: &DescriptiveAction,
    state: &TypicalState,
    scheme: &PartitionScheme,
    rng: &mut R,
) -> Result<TypicalAction> {
    let candidates = items_in_condition(state, &action.condition, scheme)?;
    if candidates.is_empty() {
        return Err(Error::InfeasibleAction(action.condition.0.clone()));
    }
    let item = candidates[rng.random_range(0..candidates.len())];
    Ok(TypicalAction {
        item,
        decisions: action.decisions.clone(),
    })
}

fn bin_item(item: &[f64], scheme: &PartitionScheme) -> Result<Condition> {
    if item.len() != scheme.num_features() {
        return Err(Error::ShapeMismatch(format!(
            "item has {} features, scheme expects {}",
            item.len(),
            scheme.num_features()
        )));
    }
    let mut h = Vec::with_capacity(item.len());
    for (k, &v) in item.iter().enumerate() {
        h.push(scheme.bin_index(k, v)?);
    }
    Ok(Condition(h))
}
