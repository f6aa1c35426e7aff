//! Constrained-MDP machinery: per-item Lagrangian multipliers updated by
//! projected stochastic subgradient, state augmentation with multipliers as
//! features, and the Lagrangian utility.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::FeaturePartition;
use crate::translate::TypicalState;

/// Which way each item's average constraint points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintDirection {
    /// U_n <= delta_n; subgradient step mu <- [mu - alpha (delta - u)]^+.
    AtMost,
    /// U_n >= delta_bar_n (discounted form, e.g. minimum data rates);
    /// step mu <- [mu - alpha (u - delta_bar)]^+.
    AtLeast,
}

/// Per-item multipliers with their constraint constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierVector {
    pub mu: Vec<f64>,
    pub step_size: f64,
    /// Undiscounted constraint constants delta_n.
    pub delta: Vec<f64>,
    pub gamma: f64,
    pub direction: ConstraintDirection,
}

impl MultiplierVector {
    pub fn new(
        num_items: usize,
        step_size: f64,
        delta: Vec<f64>,
        gamma: f64,
        direction: ConstraintDirection,
    ) -> Result<Self> {
        if delta.len() != num_items {
            return Err(Error::ShapeMismatch(format!(
                "{} constraint constants for {} items",
                delta.len(),
                num_items
            )));
        }
        if step_size <= 0.0 {
            return Err(Error::InvalidConfig("step size must be positive".into()));
        }
        Ok(MultiplierVector {
            mu: vec![0.0; num_items],
            step_size,
            delta,
            gamma,
            direction,
        })
    }

    /// Discounted constraint constant delta_bar_n = delta_n / (1 - gamma).
    pub fn delta_bar(&self) -> Vec<f64> {
        self.delta.iter().map(|d| d / (1.0 - self.gamma)).collect()
    }

    /// One projected subgradient step from the per-item observations
    /// (constraint utilities u_n, or rates r_n in the at-least form).
    pub fn update(&mut self, observed: &[f64], alpha: f64) -> Result<()> {
        if observed.len() != self.mu.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} observations for {} multipliers",
                observed.len(),
                self.mu.len()
            )));
        }
        if alpha <= 0.0 {
            return Err(Error::InvalidConfig("step size must be positive".into()));
        }
        match self.direction {
            ConstraintDirection::AtMost => {
                for (mu, (&u, &d)) in self.mu.iter_mut().zip(observed.iter().zip(&self.delta)) {
                    *mu = (*mu - alpha * (d - u)).max(0.0);
                }
            }
            ConstraintDirection::AtLeast => {
                let bars = self.delta_bar();
                for (mu, (&r, &d_bar)) in self.mu.iter_mut().zip(observed.iter().zip(&bars)) {
                    *mu = (*mu - alpha * (r - d_bar)).max(0.0);
                }
            }
        }
        Ok(())
    }

    pub fn step(&mut self, observed: &[f64]) -> Result<()> {
        let alpha = self.step_size;
        self.update(observed, alpha)
    }
}

/// Lagrangian utility u - sum_n mu_n u_n.
pub fn lagrangian_utility(utility: f64, per_item: &[f64], mu: &[f64]) -> Result<f64> {
    if per_item.len() != mu.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} constraint utilities for {} multipliers",
            per_item.len(),
            mu.len()
        )));
    }
    Ok(utility - per_item.iter().zip(mu).map(|(u, m)| m * u).sum::<f64>())
}

/// Augment a typical state with each item's own multiplier as an extra
/// feature, clamped into the multiplier domain [0, domain_max].
pub fn augment_state(state: &TypicalState, mu: &[f64], domain_max: f64) -> Result<TypicalState> {
    if mu.len() != state.num_items() {
        return Err(Error::ShapeMismatch(format!(
            "{} multipliers for {} items",
            mu.len(),
            state.num_items()
        )));
    }
    let features = state
        .features
        .iter()
        .zip(mu)
        .map(|(f, &m)| {
            let mut out = f.clone();
            out.push(m.clamp(0.0, domain_max));
            out
        })
        .collect();
    Ok(TypicalState::new(features))
}

/// Default multiplier partition: 10 bins over [0, 2], finer near zero where
/// multipliers typically live. The first three boundaries are 0.025, 0.099
/// and 0.22; the rest continue geometrically up to 1.58.
///
/// Boundaries are expressed on the normalized [0,1] scale (raw multiplier
/// divided by the domain maximum 2), which is how multiplier features enter
/// partition schemes here.
pub fn default_multiplier_partition() -> FeaturePartition {
    let mut raw = vec![0.025, 0.099, 0.22];
    // geometric fill from 0.22 to 1.58 (6 steps), then the last bin [1.58, 2]
    let ratio = (1.58f64 / 0.22).powf(1.0 / 6.0);
    for i in 1..=5 {
        raw.push(0.22 * ratio.powi(i));
    }
    raw.push(1.58);
    FeaturePartition::Boundaries(raw.into_iter().map(|b| b / 2.0).collect())
}
