//! The two learner wrappers around [`DqnCore`]: the descriptive policy
//! (condition-indexed, system-agnostic) and the conventional baseline
//! (item-indexed, rebuilt whenever the system changes shape).

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::descriptive::{action_space_size, feasible_mask, DescriptiveAction};
use crate::dqn::{DqnConfig, DqnCore, Experience};
use crate::env::{ScheduleEnv, StepOutcome};
use crate::error::{Error, Result};
use crate::network::{NetworkArchitecture, OptimizerState, QNetworkParams};
use crate::partition::PartitionScheme;
use crate::translate::{translate_action, translate_state, TypicalAction, TypicalState};

/// Descriptive-policy DQN agent. Its network shape depends only on the
/// partition scheme and decision sets, never on the item count, so one
/// agent carries across systems with different N.
pub struct DescriptiveAgent {
    pub scheme: PartitionScheme,
    pub decision_sets: Vec<usize>,
    pub core: DqnCore,
    rng: ChaCha8Rng,
}

impl DescriptiveAgent {
    pub fn new(
        scheme: PartitionScheme,
        decision_sets: Vec<usize>,
        cfg: DqnConfig,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input = scheme.num_conditions();
        let output = action_space_size(&scheme.shape(), &decision_sets);
        let arch = NetworkArchitecture::new(input, cfg.hidden.clone(), output)?;
        let core = DqnCore::new(arch, cfg, &mut rng)?;
        Ok(DescriptiveAgent {
            scheme,
            decision_sets,
            core,
            rng,
        })
    }

    pub fn freeze(&mut self) {
        self.core.frozen = true;
    }

    pub fn unfreeze(&mut self) {
        self.core.frozen = false;
    }

    /// Greedy descriptive action for a typical state (no exploration, no
    /// learning side effects).
    pub fn greedy_action(&self, state: &TypicalState) -> Result<DescriptiveAction> {
        let sbar = translate_state(state, &self.scheme)?;
        let mask = feasible_mask(&sbar, &self.decision_sets);
        let q = self.core.online.forward(&sbar.flatten())?;
        let (idx, _) = self
            .core
            .cfg
            .objective
            .best_masked(&q, &mask)
            .ok_or_else(|| Error::InvariantViolation("no feasible action".into()))?;
        Ok(DescriptiveAction::from_flat(
            idx,
            &self.scheme.shape(),
            &self.decision_sets,
        ))
    }

    /// One full interaction: select a feasible descriptive action, translate
    /// it, step the environment, store the translated experience, and run
    /// the periodic training/target bookkeeping.
    pub fn step(&mut self, env: &mut dyn ScheduleEnv) -> Result<StepOutcome> {
        if env.decision_sets() != self.decision_sets.as_slice() {
            return Err(Error::InvalidConfig(
                "environment decision sets do not match agent".into(),
            ));
        }
        let state = env.state().clone();
        let sbar = translate_state(&state, &self.scheme)?;
        let input = sbar.flatten();
        let mask = feasible_mask(&sbar, &self.decision_sets);
        let epsilon = self.core.epsilon();
        let action_idx = self.core.select(&input, &mask, epsilon, &mut self.rng)?;
        let dbar =
            DescriptiveAction::from_flat(action_idx, &self.scheme.shape(), &self.decision_sets);
        let action = translate_action(&dbar, &state, &self.scheme, &mut self.rng)?;
        debug_assert!(mask[action_idx], "selected action must be feasible");

        let outcome = env.step(&action)?;
        let next_sbar = translate_state(env.state(), &self.scheme)?;
        let next_mask = feasible_mask(&next_sbar, &self.decision_sets);
        self.core.record_and_advance(
            Experience {
                input,
                action: action_idx,
                utility: outcome.utility,
                next_input: next_sbar.flatten(),
                next_mask,
            },
            &mut self.rng,
        )?;
        Ok(outcome)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let ckpt = AgentCheckpoint {
            scheme: self.scheme.clone(),
            decision_sets: self.decision_sets.clone(),
            cfg: self.core.cfg.clone(),
            online: self.core.online.clone(),
            target: self.core.target.clone(),
            opt: self.core.opt.clone(),
            t: self.core.t,
        };
        let file = BufWriter::new(File::create(path)?);
        serde_json::to_writer(file, &ckpt)?;
        Ok(())
    }

    /// Restore from a checkpoint. The replay buffer is not part of
    /// checkpoints and starts empty.
    pub fn load(path: &Path, seed: u64) -> Result<Self> {
        let file = BufReader::new(File::open(path)?);
        let ckpt: AgentCheckpoint = serde_json::from_reader(file)?;
        let mut agent = DescriptiveAgent::new(ckpt.scheme, ckpt.decision_sets, ckpt.cfg, seed)?;
        agent.core.online = ckpt.online;
        agent.core.target = ckpt.target;
        agent.core.opt = ckpt.opt;
        agent.core.t = ckpt.t;
        Ok(agent)
    }
}

/// Parameters + optimizer state; the replay buffer is deliberately omitted.
#[derive(Serialize, Deserialize)]
struct AgentCheckpoint {
    scheme: PartitionScheme,
    decision_sets: Vec<usize>,
    cfg: DqnConfig,
    online: QNetworkParams,
    target: QNetworkParams,
    opt: OptimizerState,
    t: u64,
}

/// Conventional item-indexed DQN baseline. Input width N*K and output
/// width N * prod |M_l| are tied to the system, so a new agent is built for
/// every system-characteristics change.
pub struct ConventionalAgent {
    pub num_items: usize,
    pub decision_sets: Vec<usize>,
    pub core: DqnCore,
    rng: ChaCha8Rng,
}

impl ConventionalAgent {
    pub fn for_env(env: &dyn ScheduleEnv, cfg: DqnConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let num_items = env.num_items();
        let decision_sets = env.decision_sets().to_vec();
        let features_per_item = env
            .state()
            .features
            .first()
            .map(|f| f.len())
            .ok_or_else(|| Error::InvalidConfig("environment has no items".into()))?;
        let m_total: usize = decision_sets.iter().product();
        let arch = NetworkArchitecture::new(
            num_items * features_per_item,
            cfg.hidden.clone(),
            num_items * m_total,
        )?;
        let core = DqnCore::new(arch, cfg, &mut rng)?;
        Ok(ConventionalAgent {
            num_items,
            decision_sets,
            core,
            rng,
        })
    }

    fn decode(&self, mut idx: usize) -> TypicalAction {
        let mut decisions = vec![0usize; self.decision_sets.len()];
        for (slot, &size) in decisions.iter_mut().zip(&self.decision_sets).rev() {
            *slot = idx % size;
            idx /= size;
        }
        TypicalAction {
            item: idx + 1,
            decisions,
        }
    }

    pub fn step(&mut self, env: &mut dyn ScheduleEnv) -> Result<StepOutcome> {
        let input = env.state().flatten();
        let mask = vec![true; self.core.online.arch.output];
        let epsilon = self.core.epsilon();
        let action_idx = self.core.select(&input, &mask, epsilon, &mut self.rng)?;
        let action = self.decode(action_idx);

        let outcome = env.step(&action)?;
        let next_input = env.state().flatten();
        self.core.record_and_advance(
            Experience {
                input,
                action: action_idx,
                utility: outcome.utility,
                next_input,
                next_mask: mask,
            },
            &mut self.rng,
        )?;
        Ok(outcome)
    }
}

/// Non-learning uniform-random baseline: a random feasible item; for
/// environments with auxiliary decisions, always the last (maximum power)
/// level so constraints stay satisfiable.
pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        RandomPolicy {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn step(&mut self, env: &mut dyn ScheduleEnv) -> Result<StepOutcome> {
        let item = self.rng.random_range(1..=env.num_items());
        let decisions = env.decision_sets().iter().map(|&s| s - 1).collect();
        env.step(&TypicalAction { item, decisions })
    }
}
