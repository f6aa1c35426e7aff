//! Descriptive states and actions.
//!
//! A descriptive state is a binary tensor over conditions: element h is 1
//! iff some item currently sits in condition h. A descriptive action picks
//! an occupied condition plus any auxiliary scheduling decisions. Neither
//! depends on how many items the system has, which is what makes a policy
//! over them transferable across systems.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::Condition;

/// Binary tensor of shape H_1 x ... x H_K marking occupied conditions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptiveState {
    shape: Vec<usize>,
    bits: Vec<bool>,
}

impl DescriptiveState {
    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        DescriptiveState {
            shape,
            bits: vec![false; len],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, condition: &Condition) -> bool {
        self.bits[condition.flat_index(&self.shape)]
    }

    pub fn get_flat(&self, idx: usize) -> bool {
        self.bits[idx]
    }

    pub fn set(&mut self, condition: &Condition, value: bool) {
        let idx = condition.flat_index(&self.shape);
        self.bits[idx] = value;
    }

    /// Number of occupied conditions.
    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Occupied conditions, in flat-index order.
    pub fn occupied(&self) -> impl Iterator<Item = Condition> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| Condition::from_flat(i, &self.shape))
    }

    /// Row-major 0/1 vector (last feature index varies fastest); the network
    /// input encoding.
    pub fn flatten(&self) -> Vec<f64> {
        self.bits
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect()
    }

    /// Inverse of [`DescriptiveState::flatten`].
    pub fn unflatten(shape: Vec<usize>, values: &[f64]) -> Result<Self> {
        let len: usize = shape.iter().product();
        if values.len() != len {
            return Err(Error::ShapeMismatch(format!(
                "expected {len} elements, got {}",
                values.len()
            )));
        }
        let bits = values
            .iter()
            .map(|&v| {
                if v == 1.0 {
                    Ok(true)
                } else if v == 0.0 {
                    Ok(false)
                } else {
                    Err(Error::InvariantViolation(format!(
                        "descriptive state element {v} is not binary"
                    )))
                }
            })
            .collect::<Result<Vec<bool>>>()?;
        Ok(DescriptiveState { shape, bits })
    }
}

/// A condition plus auxiliary decision indices (0-based into each decision
/// set M_l; empty when L = 0).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DescriptiveAction {
    pub condition: Condition,
    pub decisions: Vec<usize>,
}

impl DescriptiveAction {
    /// Flat index over conditions x decision tuples; decisions vary fastest.
    pub fn flat_index(&self, shape: &[usize], decision_sizes: &[usize]) -> usize {
        let mut idx = self.condition.flat_index(shape);
        for (d, &size) in self.decisions.iter().zip(decision_sizes) {
            debug_assert!(*d < size);
            idx = idx * size + d;
        }
        idx
    }

    pub fn from_flat(mut idx: usize, shape: &[usize], decision_sizes: &[usize]) -> Self {
        let mut decisions = vec![0usize; decision_sizes.len()];
        for (slot, &size) in decisions.iter_mut().zip(decision_sizes).rev() {
            *slot = idx % size;
            idx /= size;
        }
        DescriptiveAction {
            condition: Condition::from_flat(idx, shape),
            decisions,
        }
    }
}

/// Total flattened action count for a given shape and decision sets.
pub fn action_space_size(shape: &[usize], decision_sizes: &[usize]) -> usize {
    shape.iter().product::<usize>() * decision_sizes.iter().product::<usize>()
}

/// The feasible-action set: every (h, m) with state(h) = 1.
pub fn feasible_actions(
    state: &DescriptiveState,
    decision_sizes: &[usize],
) -> Vec<DescriptiveAction> {
    let m_total: usize = decision_sizes.iter().product();
    let mut out = Vec::with_capacity(state.ones() * m_total);
    for condition in state.occupied() {
        for m in 0..m_total {
            let mut decisions = vec![0usize; decision_sizes.len()];
            let mut rem = m;
            for (slot, &size) in decisions.iter_mut().zip(decision_sizes).rev() {
                *slot = rem % size;
                rem /= size;
            }
            out.push(DescriptiveAction {
                condition: condition.clone(),
                decisions,
            });
        }
    }
    out
}

/// Feasibility mask over the flattened action space, aligned with
/// [`DescriptiveAction::flat_index`].
pub fn feasible_mask(state: &DescriptiveState, decision_sizes: &[usize]) -> Vec<bool> {
    let m_total: usize = decision_sizes.iter().product();
    let mut mask = vec![false; state.len() * m_total];
    for (i, chunk) in mask.chunks_mut(m_total).enumerate() {
        if state.get_flat(i) {
            chunk.fill(true);
        }
    }
    mask
}
