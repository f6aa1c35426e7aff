//! Plain DQN machinery over vector inputs with feasibility masks:
//! epsilon-greedy selection, bounded FIFO replay, periodic batch training,
//! and fixed-target synchronization.
//!
//! Both the descriptive policy and the conventional indexed baseline are
//! thin wrappers over [`DqnCore`]; only how they encode states and decode
//! actions differs.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{
    adam_step, td_loss_and_gradient, NetworkArchitecture, Objective, OptimizerState,
    QNetworkParams, TdSample,
};

/// Exploration schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonSchedule {
    Constant(f64),
    /// 0.1 while t < threshold, then 1/t. The abrupt collapse at the
    /// threshold is deliberate; it is the schedule as specified.
    Piecewise {
        threshold: u64,
    },
}

impl EpsilonSchedule {
    pub fn at(&self, t: u64) -> f64 {
        match self {
            EpsilonSchedule::Constant(c) => *c,
            EpsilonSchedule::Piecewise { threshold } => {
                if t >= *threshold {
                    1.0 / t as f64
                } else {
                    0.1
                }
            }
        }
    }
}

/// Learner hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DqnConfig {
    pub gamma: f64,
    pub epsilon: EpsilonSchedule,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub train_interval: u64,
    pub target_interval: u64,
    pub learning_rate: f64,
    pub hidden: Vec<usize>,
    pub objective: Objective,
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig("gamma must be in [0,1)".into()));
        }
        if self.train_interval == 0 || self.target_interval == 0 {
            return Err(Error::InvalidConfig("intervals must be >= 1".into()));
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 {
            return Err(Error::InvalidConfig(
                "batch size and buffer capacity must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Simple-scenario defaults: gamma 0.9, buffer 300, batch 30, train
    /// every 10 steps, target sync every 100, learning rate 1e-3,
    /// piecewise epsilon with threshold 10^4.
    pub fn simple_scenario(hidden: Vec<usize>, objective: Objective) -> Self {
        DqnConfig {
            gamma: 0.9,
            epsilon: EpsilonSchedule::Piecewise { threshold: 10_000 },
            buffer_capacity: 300,
            batch_size: 30,
            train_interval: 10,
            target_interval: 100,
            learning_rate: 1e-3,
            hidden,
            objective,
        }
    }
}

/// Stored experience, already in network coordinates.
#[derive(Debug, Clone)]
pub struct Experience {
    pub input: Vec<f64>,
    pub action: usize,
    pub utility: f64,
    pub next_input: Vec<f64>,
    pub next_mask: Vec<bool>,
}

/// Online + target networks, replay buffer, optimizer, and step counter.
pub struct DqnCore {
    pub cfg: DqnConfig,
    pub online: QNetworkParams,
    pub target: QNetworkParams,
    pub opt: OptimizerState,
    buffer: VecDeque<Experience>,
    /// Timestep of the next step to run, starting at 1.
    pub t: u64,
    pub frozen: bool,
    pub last_loss: Option<f64>,
}

impl DqnCore {
    pub fn new<R: Rng>(arch: NetworkArchitecture, cfg: DqnConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let online = QNetworkParams::init(arch, rng);
        let target = online.clone();
        let opt = OptimizerState::new(&online, cfg.learning_rate);
        Ok(DqnCore {
            cfg,
            online,
            target,
            opt,
            buffer: VecDeque::new(),
            t: 1,
            frozen: false,
            last_loss: None,
        })
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    pub fn clear_buffer(&mut self) {
        self.buffer.clear();
    }

    /// Exploration rate for the current timestep; 0 while frozen.
    pub fn epsilon(&self) -> f64 {
        if self.frozen {
            0.0
        } else {
            self.cfg.epsilon.at(self.t)
        }
    }

    /// Epsilon-greedy selection over feasible actions. Greedy ties break to
    /// the lowest flattened index.
    pub fn select<R: Rng>(
        &self,
        input: &[f64],
        mask: &[bool],
        epsilon: f64,
        rng: &mut R,
    ) -> Result<usize> {
        let feasible: Vec<usize> = mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| i)
            .collect();
        if feasible.is_empty() {
            return Err(Error::InvariantViolation("no feasible action".into()));
        }
        if epsilon > 0.0 && rng.random::<f64>() < epsilon {
            return Ok(feasible[rng.random_range(0..feasible.len())]);
        }
        let q = self.online.forward(input)?;
        let (idx, _) = self
            .cfg
            .objective
            .best_masked(&q, mask)
            .expect("feasible set nonempty");
        Ok(idx)
    }

    /// Store an experience and run the periodic training / target-sync
    /// bookkeeping for the current timestep, then advance the step counter.
    pub fn record_and_advance<R: Rng>(&mut self, exp: Experience, rng: &mut R) -> Result<()> {
        if self.buffer.len() == self.cfg.buffer_capacity {
            self.buffer.pop_front();
        }
        self.buffer.push_back(exp);

        if !self.frozen
            && self.t.is_multiple_of(self.cfg.train_interval)
            && self.buffer.len() >= self.cfg.batch_size
        {
            self.train_batch(rng)?;
        }
        if self.t.is_multiple_of(self.cfg.target_interval) {
            self.target = self.online.clone();
        }
        self.t += 1;
        Ok(())
    }

    fn train_batch<R: Rng>(&mut self, rng: &mut R) -> Result<()> {
        let batch: Vec<TdSample> = (0..self.cfg.batch_size)
            .map(|_| {
                let e = &self.buffer[rng.random_range(0..self.buffer.len())];
                TdSample {
                    input: e.input.clone(),
                    action: e.action,
                    utility: e.utility,
                    next_input: e.next_input.clone(),
                    next_mask: e.next_mask.clone(),
                }
            })
            .collect();
        let (loss, grad) = td_loss_and_gradient(
            &self.online,
            &self.target,
            &batch,
            self.cfg.gamma,
            self.cfg.objective,
        )?;
        adam_step(&mut self.online, &grad, &mut self.opt)?;
        self.last_loss = Some(loss);
        Ok(())
    }
}
