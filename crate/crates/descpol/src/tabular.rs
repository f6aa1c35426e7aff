//! Exact solvers for small instances: value iteration on the typical MDP
//! and on the induced descriptive MDP. These are the optimality oracles
//! that validate the descriptive-policy convergence claim and supply
//! optimal baselines.

use std::collections::HashMap;
use std::path::Path;

use crate::descriptive::{action_space_size, DescriptiveAction};
use crate::error::{Error, Result};
use crate::partition::PartitionScheme;
use crate::translate::{items_in_condition, translate_state, TypicalAction, TypicalState};

/// Hard cap on enumerable typical state spaces; the oracle exists for
/// desk-scale validation only.
const MAX_STATES: usize = 1_000_000;

const ROW_TOL: f64 = 1e-12;

/// Finite MDP with explicit tables. `feasible[s][a]` masks which actions
/// may be taken in each state (all actions when `None`).
#[derive(Debug, Clone)]
pub struct TabularMdp {
    pub num_states: usize,
    pub num_actions: usize,
    /// transition[s][a][s']
    pub transition: Vec<Vec<Vec<f64>>>,
    /// utility[s][a]
    pub utility: Vec<Vec<f64>>,
    pub feasible: Option<Vec<Vec<bool>>>,
    pub gamma: f64,
}

impl TabularMdp {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Validation("gamma must be in [0,1)".into()));
        }
        if self.num_states > MAX_STATES {
            return Err(Error::Validation(format!(
                "state space of {} exceeds the {MAX_STATES} cap",
                self.num_states
            )));
        }
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                let sum: f64 = self.transition[s][a].iter().sum();
                if (sum - 1.0).abs() > ROW_TOL {
                    return Err(Error::Validation(format!(
                        "transition row (s={s}, a={a}) sums to {sum}"
                    )));
                }
                if !self.utility[s][a].is_finite() {
                    return Err(Error::Validation(format!(
                        "utility (s={s}, a={a}) is not finite"
                    )));
                }
            }
            if let Some(mask) = &self.feasible {
                if !mask[s].iter().any(|&f| f) {
                    return Err(Error::Validation(format!(
                        "state {s} has no feasible action"
                    )));
                }
            }
        }
        Ok(())
    }

    fn is_feasible(&self, s: usize, a: usize) -> bool {
        self.feasible.as_ref().is_none_or(|m| m[s][a])
    }

    /// Plain whitespace-delimited fixture format:
    /// `states N`, `actions A`, `gamma G`, then `u s a value` and
    /// `p s a s' prob` lines. Unlisted entries are zero.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut num_states = None;
        let mut num_actions = None;
        let mut gamma = None;
        let mut u_entries = Vec::new();
        let mut p_entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let bad =
                || Error::InvalidConfig(format!("line {}: cannot parse '{line}'", lineno + 1));
            match parts[0] {
                "states" => num_states = Some(parts[1].parse::<usize>().map_err(|_| bad())?),
                "actions" => num_actions = Some(parts[1].parse::<usize>().map_err(|_| bad())?),
                "gamma" => gamma = Some(parts[1].parse::<f64>().map_err(|_| bad())?),
                "u" if parts.len() == 4 => u_entries.push((
                    parts[1].parse::<usize>().map_err(|_| bad())?,
                    parts[2].parse::<usize>().map_err(|_| bad())?,
                    parts[3].parse::<f64>().map_err(|_| bad())?,
                )),
                "p" if parts.len() == 5 => p_entries.push((
                    parts[1].parse::<usize>().map_err(|_| bad())?,
                    parts[2].parse::<usize>().map_err(|_| bad())?,
                    parts[3].parse::<usize>().map_err(|_| bad())?,
                    parts[4].parse::<f64>().map_err(|_| bad())?,
                )),
                _ => return Err(bad()),
            }
        }
        let num_states =
            num_states.ok_or_else(|| Error::InvalidConfig("missing 'states' line".into()))?;
        let num_actions =
            num_actions.ok_or_else(|| Error::InvalidConfig("missing 'actions' line".into()))?;
        let gamma = gamma.ok_or_else(|| Error::InvalidConfig("missing 'gamma' line".into()))?;
        let mut mdp = TabularMdp {
            num_states,
            num_actions,
            transition: vec![vec![vec![0.0; num_states]; num_actions]; num_states],
            utility: vec![vec![0.0; num_actions]; num_states],
            feasible: None,
            gamma,
        };
        for (s, a, v) in u_entries {
            mdp.utility[s][a] = v;
        }
        for (s, a, s2, p) in p_entries {
            mdp.transition[s][a][s2] = p;
        }
        mdp.validate()?;
        Ok(mdp)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone)]
pub struct ValueIterationResult {
    pub values: Vec<f64>,
    pub greedy_policy: Vec<usize>,
    pub sweeps: usize,
    /// Sup-norm residual after each sweep, for contraction diagnostics.
    pub residuals: Vec<f64>,
}

/// Bellman optimality iteration to a sup-norm residual below `tol`.
pub fn value_iteration(mdp: &TabularMdp, tol: f64) -> Result<ValueIterationResult> {
    mdp.validate()?;
    let mut values = vec![0.0; mdp.num_states];
    let mut residuals = Vec::new();
    let mut policy = vec![0usize; mdp.num_states];
    loop {
        let mut next = vec![0.0; mdp.num_states];
        for s in 0..mdp.num_states {
            let mut best = f64::NEG_INFINITY;
            let mut best_a = 0;
            for a in 0..mdp.num_actions {
                if !mdp.is_feasible(s, a) {
                    continue;
                }
                let mut q = mdp.utility[s][a];
                for (s2, &p) in mdp.transition[s][a].iter().enumerate() {
                    if p > 0.0 {
                        q += mdp.gamma * p * values[s2];
                    }
                }
                if q > best {
                    best = q;
                    best_a = a;
                }
            }
            next[s] = best;
            policy[s] = best_a;
        }
        let residual = values
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        values = next;
        residuals.push(residual);
        if residual <= tol {
            break;
        }
    }
    let sweeps = residuals.len();
    Ok(ValueIterationResult {
        values,
        greedy_policy: policy,
        sweeps,
        residuals,
    })
}

/// A typical MDP over an enumerated scheduling state space. Actions are
/// (item, decision tuple) pairs flattened item-major.
#[derive(Debug, Clone)]
pub struct SchedulingMdp {
    pub mdp: TabularMdp,
    pub typical_states: Vec<TypicalState>,
    pub num_items: usize,
    pub decision_sets: Vec<usize>,
}

impl SchedulingMdp {
    fn decisions_total(&self) -> usize {
        self.decision_sets.iter().product()
    }

    fn action_index(&self, item: usize, m_flat: usize) -> usize {
        (item - 1) * self.decisions_total() + m_flat
    }

    fn state_key(state: &TypicalState) -> Vec<u64> {
        state
            .features
            .iter()
            .flatten()
            .map(|f| f.to_bits())
            .collect()
    }

    fn swapped_state(state: &TypicalState, n1: usize, n2: usize) -> TypicalState {
        let mut features = state.features.clone();
        features.swap(n1, n2);
        TypicalState::new(features)
    }

    /// Check transition/utility symmetry under swapping any two items, the
    /// identical-statistics assumption the convergence theorem needs.
    pub fn validate_identical_items(&self) -> Result<()> {
        let index: HashMap<Vec<u64>, usize> = self
            .typical_states
            .iter()
            .enumerate()
            .map(|(i, s)| (Self::state_key(s), i))
            .collect();
        let sigma = |s: usize, n1: usize, n2: usize| -> Result<usize> {
            let key = Self::state_key(&Self::swapped_state(&self.typical_states[s], n1, n2));
            index.get(&key).copied().ok_or_else(|| {
                Error::Validation(format!(
                    "swapping items {} and {} in state {s} leaves the enumerated space",
                    n1 + 1,
                    n2 + 1
                ))
            })
        };
        let m_total = self.decisions_total();
        for n1 in 0..self.num_items {
            for n2 in (n1 + 1)..self.num_items {
                for s in 0..self.mdp.num_states {
                    let s_swap = sigma(s, n1, n2)?;
                    for m in 0..m_total {
                        // scheduling n1 in s must mirror scheduling n2 in sigma(s)
                        let a1 = self.action_index(n1 + 1, m);
                        let a2 = self.action_index(n2 + 1, m);
                        let violation = |what: &str| {
                            Error::Validation(format!(
                                "items {} and {} have non-identical statistics ({what} \
                                 differs at state {s}, decision {m})",
                                n1 + 1,
                                n2 + 1
                            ))
                        };
                        if (self.mdp.utility[s][a1] - self.mdp.utility[s_swap][a2]).abs() > ROW_TOL
                        {
                            return Err(violation("utility"));
                        }
                        for s2 in 0..self.mdp.num_states {
                            let s2_swap = sigma(s2, n1, n2)?;
                            if (self.mdp.transition[s][a1][s2]
                                - self.mdp.transition[s_swap][a2][s2_swap])
                                .abs()
                                > ROW_TOL
                            {
                                return Err(violation("transition"));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// The induced descriptive MDP plus the typical-to-descriptive state map.
#[derive(Debug, Clone)]
pub struct InducedDescriptiveMdp {
    pub mdp: TabularMdp,
    /// typical state index -> descriptive state index
    pub state_map: Vec<usize>,
    pub num_descriptive_states: usize,
}

/// Quotient the typical MDP through the state translation: descriptive
/// states are the images under d_s; a descriptive action (h, m) expands to
/// the uniform mixture over the items in N(h) (matching the translation
/// module's uniform tie-break), averaged uniformly over the typical states
/// sharing the image.
pub fn induce_descriptive_mdp(
    scheduling: &SchedulingMdp,
    scheme: &PartitionScheme,
) -> Result<InducedDescriptiveMdp> {
    scheduling.mdp.validate()?;
    scheduling.validate_identical_items()?;

    let shape = scheme.shape();
    let mut image_index: HashMap<Vec<bool>, usize> = HashMap::new();
    let mut state_map = Vec::with_capacity(scheduling.typical_states.len());
    let mut preimages: Vec<Vec<usize>> = Vec::new();
    for (i, s) in scheduling.typical_states.iter().enumerate() {
        let image = translate_state(s, scheme)?;
        let key: Vec<bool> = (0..image.len()).map(|j| image.get_flat(j)).collect();
        let j = *image_index.entry(key).or_insert_with(|| {
            preimages.push(Vec::new());
            preimages.len() - 1
        });
        preimages[j].push(i);
        state_map.push(j);
    }

    let num_desc = preimages.len();
    let m_total = scheduling.decisions_total();
    let num_actions = action_space_size(&shape, &scheduling.decision_sets);
    let mut transition = vec![vec![vec![0.0; num_desc]; num_actions]; num_desc];
    let mut utility = vec![vec![0.0; num_actions]; num_desc];
    let mut feasible = vec![vec![false; num_actions]; num_desc];

    for (j, pre) in preimages.iter().enumerate() {
        let pre_weight = 1.0 / pre.len() as f64;
        for a_bar in 0..num_actions {
            let action = DescriptiveAction::from_flat(a_bar, &shape, &scheduling.decision_sets);
            let m_flat = a_bar % m_total.max(1);
            // feasibility is a property of the image, identical across the
            // preimage by construction
            let members = items_in_condition(
                &scheduling.typical_states[pre[0]],
                &action.condition,
                scheme,
            )?;
            if members.is_empty() {
                // masked: keep a valid (self-loop) row so the table stays
                // stochastic
                transition[j][a_bar][j] = 1.0;
                continue;
            }
            feasible[j][a_bar] = true;
            for &s in pre {
                let members =
                    items_in_condition(&scheduling.typical_states[s], &action.condition, scheme)?;
                let item_weight = pre_weight / members.len() as f64;
                for &n in &members {
                    let a = scheduling.action_index(n, m_flat);
                    utility[j][a_bar] += item_weight * scheduling.mdp.utility[s][a];
                    for (s2, &p) in scheduling.mdp.transition[s][a].iter().enumerate() {
                        if p > 0.0 {
                            transition[j][a_bar][state_map[s2]] += item_weight * p;
                        }
                    }
                }
            }
        }
    }

    let mdp = TabularMdp {
        num_states: num_desc,
        num_actions,
        transition,
        utility,
        feasible: Some(feasible),
        gamma: scheduling.mdp.gamma,
    };
    mdp.validate()?;
    Ok(InducedDescriptiveMdp {
        mdp,
        state_map,
        num_descriptive_states: num_desc,
    })
}

/// Max over typical states of |J*(s) - Jbar*_b(d_s(s))| at partitioning
/// parameter b (uniform-dyadic on every continuous feature).
pub fn theorem1_gap(scheduling: &SchedulingMdp, b: u32, tol: f64) -> Result<f64> {
    let num_features = scheduling
        .typical_states
        .first()
        .and_then(|s| s.features.first())
        .map(|f| f.len())
        .ok_or_else(|| Error::Validation("empty scheduling instance".into()))?;
    let scheme = PartitionScheme::uniform(b, num_features);
    let induced = induce_descriptive_mdp(scheduling, &scheme)?;
    let typical = value_iteration(&scheduling.mdp, tol)?;
    let descriptive = value_iteration(&induced.mdp, tol)?;
    let gap = typical
        .values
        .iter()
        .enumerate()
        .map(|(s, &j)| (j - descriptive.values[induced.state_map[s]]).abs())
        .fold(0.0f64, f64::max);
    Ok(gap)
}

/// The canonical identical-items instance: N items, one feature per item
/// drawn i.i.d. uniformly from `support` each step, utility = the chosen
/// item's feature value.
pub fn iid_feature_instance(num_items: usize, support: &[f64], gamma: f64) -> SchedulingMdp {
    let num_states = support.len().pow(num_items as u32);
    let decode = |mut idx: usize| -> TypicalState {
        let mut features = vec![vec![0.0]; num_items];
        for f in features.iter_mut().rev() {
            f[0] = support[idx % support.len()];
            idx /= support.len();
        }
        TypicalState::new(features)
    };
    let typical_states: Vec<TypicalState> = (0..num_states).map(decode).collect();
    let uniform = 1.0 / num_states as f64;
    let transition = vec![vec![vec![uniform; num_states]; num_items]; num_states];
    let utility = (0..num_states)
        .map(|s| {
            (0..num_items)
                .map(|n| typical_states[s].features[n][0])
                .collect()
        })
        .collect();
    SchedulingMdp {
        mdp: TabularMdp {
            num_states,
            num_actions: num_items,
            transition,
            utility,
            feasible: None,
            gamma,
        },
        typical_states,
        num_items,
        decision_sets: vec![],
    }
}

/// Optimal item-sale policy: schedule the item maximizing p^e * g; ties go
/// to the lowest index.
pub fn greedy_oracle(state: &TypicalState, reward_exponent: f64) -> TypicalAction {
    let mut best = 0usize;
    let mut best_value = f64::NEG_INFINITY;
    for (i, f) in state.features.iter().enumerate() {
        let v = f[0].powf(reward_exponent) * f[1];
        if v > best_value {
            best_value = v;
            best = i;
        }
    }
    TypicalAction {
        item: best + 1,
        decisions: vec![],
    }
}
