//! Wireless user-scheduling / power-allocation scenario: one base station,
//! N users with minimum average data rate requirements. The agent picks a
//! user and a transmission power each slot and minimizes a Lagrangian cost
//! of power plus weighted rate shortfalls.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::env::{ScheduleEnv, StepOutcome};
use crate::error::{Error, Result};
use crate::lagrangian::{ConstraintDirection, MultiplierVector};
use crate::network::Objective;
use crate::translate::{TypicalAction, TypicalState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WirelessUser {
    pub distance_m: f64,
    pub rate_requirement_bps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WirelessConfig {
    pub users: Vec<WirelessUser>,
    pub bandwidth_hz: f64,
    /// Noise spectral density in dBm/Hz.
    pub noise_dbm_per_hz: f64,
    pub power_levels_w: Vec<f64>,
    pub pathloss_exponent: f64,
    pub shadowing_std_db: f64,
    /// Channel gains are projected into [floor, ceiling] dB before use.
    pub gain_floor_db: f64,
    pub gain_ceiling_db: f64,
    pub gamma: f64,
    pub multiplier_step: f64,
    pub multiplier_domain_max: f64,
}

impl WirelessConfig {
    /// Defaults: 5 MHz bandwidth, -106 dBm/Hz noise, [0,10] W
    /// discretized into `power_levels` values, pathloss exponent 3.76,
    /// 10 dB shadowing, gains projected to [-50,-30] dB.
    pub fn with_users(users: Vec<WirelessUser>, power_levels: usize) -> Self {
        WirelessConfig {
            users,
            bandwidth_hz: 5e6,
            noise_dbm_per_hz: -106.0,
            power_levels_w: uniform_power_levels(10.0, power_levels),
            pathloss_exponent: 3.76,
            shadowing_std_db: 10.0,
            gain_floor_db: -50.0,
            gain_ceiling_db: -30.0,
            gamma: 0.9,
            multiplier_step: 0.01,
            multiplier_domain_max: 2.0,
        }
    }

    /// System A: 4 users at {20, 50, 50, 80} m, 1 Mbps each.
    pub fn system_a() -> Self {
        Self::with_users(users_at(&[(20.0, 1), (50.0, 2), (80.0, 1)], 1e6), 5)
    }

    /// System B: 9 users, three per distance, 0.5 Mbps each.
    pub fn system_b() -> Self {
        Self::with_users(users_at(&[(20.0, 3), (50.0, 3), (80.0, 3)], 0.5e6), 5)
    }

    /// System C: 20 users (5/10/5 per distance), 0.2 Mbps each.
    pub fn system_c() -> Self {
        Self::with_users(users_at(&[(20.0, 5), (50.0, 10), (80.0, 5)], 0.2e6), 5)
    }

    pub fn validate(&self) -> Result<()> {
        if self.users.is_empty() {
            return Err(Error::InvalidConfig("need at least one user".into()));
        }
        if self
            .users
            .iter()
            .any(|u| u.distance_m <= 0.0 || u.rate_requirement_bps < 0.0)
        {
            return Err(Error::InvalidConfig(
                "users need positive distance and nonnegative rate requirement".into(),
            ));
        }
        if self.power_levels_w.is_empty() {
            return Err(Error::InvalidConfig("power level set is empty".into()));
        }
        if self.gain_floor_db >= self.gain_ceiling_db {
            return Err(Error::InvalidConfig(
                "gain projection range inverted".into(),
            ));
        }
        Ok(())
    }

    /// Noise density in W/Hz (dBm is dB relative to 1 mW).
    pub fn noise_w_per_hz(&self) -> f64 {
        10f64.powf((self.noise_dbm_per_hz - 30.0) / 10.0)
    }
}

fn users_at(groups: &[(f64, usize)], rate_bps: f64) -> Vec<WirelessUser> {
    groups
        .iter()
        .flat_map(|&(d, n)| {
            std::iter::repeat_with(move || WirelessUser {
                distance_m: d,
                rate_requirement_bps: rate_bps,
            })
            .take(n)
        })
        .collect()
}

/// Uniform discretization of [0, max] W into `count` levels (includes 0).
pub fn uniform_power_levels(max_w: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![max_w];
    }
    (0..count)
        .map(|i| max_w * i as f64 / (count - 1) as f64)
        .collect()
}

/// Shannon capacity: W log2(1 + gain * power / (W * N0)), in bits/s.
pub fn shannon_rate(gain_linear: f64, power_w: f64, bandwidth_hz: f64, noise_w_per_hz: f64) -> f64 {
    bandwidth_hz * (1.0 + gain_linear * power_w / (bandwidth_hz * noise_w_per_hz)).log2()
}

/// One slot's channel gain for a user: pathloss plus log-normal shadowing,
/// projected into the configured dB range; returned as a linear power ratio.
pub fn channel_draw<R: Rng>(cfg: &WirelessConfig, user: usize, rng: &mut R) -> f64 {
    let db = channel_draw_db(cfg, user, rng);
    10f64.powf(db / 10.0)
}

fn channel_draw_db<R: Rng>(cfg: &WirelessConfig, user: usize, rng: &mut R) -> f64 {
    let pathloss_db = -10.0 * cfg.pathloss_exponent * cfg.users[user].distance_m.log10();
    let shadowing = Normal::new(0.0, cfg.shadowing_std_db)
        .expect("valid std")
        .sample(rng);
    (pathloss_db + shadowing).clamp(cfg.gain_floor_db, cfg.gain_ceiling_db)
}

pub struct WirelessEnv {
    cfg: WirelessConfig,
    gains_db: Vec<f64>,
    multipliers: MultiplierVector,
    state: TypicalState,
    rng: ChaCha8Rng,
    decision_sets: [usize; 1],
}

impl WirelessEnv {
    pub fn new(cfg: WirelessConfig, mut rng: ChaCha8Rng) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.users.len();
        let multipliers = MultiplierVector::new(
            n,
            cfg.multiplier_step,
            cfg.users
                .iter()
                .map(|u| u.rate_requirement_bps / 1e6)
                .collect(),
            cfg.gamma,
            ConstraintDirection::AtLeast,
        )?;
        let gains_db: Vec<f64> = (0..n).map(|u| channel_draw_db(&cfg, u, &mut rng)).collect();
        let decision_sets = [cfg.power_levels_w.len()];
        let mut env = WirelessEnv {
            cfg,
            gains_db,
            multipliers,
            state: TypicalState::new(vec![]),
            rng,
            decision_sets,
        };
        env.state = env.build_state();
        Ok(env)
    }

    pub fn config(&self) -> &WirelessConfig {
        &self.cfg
    }

    /// Constraint constants in Mbps (multiplier updates and the Lagrangian
    /// cost operate on the Mbps scale so that multipliers live in [0,2]).
    pub fn delta_bar_mbps(&self) -> Vec<f64> {
        self.multipliers.delta_bar()
    }

    fn build_state(&self) -> TypicalState {
        let span = self.cfg.gain_ceiling_db - self.cfg.gain_floor_db;
        let features = self
            .gains_db
            .iter()
            .zip(&self.multipliers.mu)
            .map(|(&g_db, &mu)| {
                let gain_norm = (g_db - self.cfg.gain_floor_db) / span;
                let mu_norm =
                    mu.clamp(0.0, self.cfg.multiplier_domain_max) / self.cfg.multiplier_domain_max;
                vec![gain_norm, mu_norm]
            })
            .collect();
        TypicalState::new(features)
    }

    fn gain_linear(&self, user: usize) -> f64 {
        10f64.powf(self.gains_db[user] / 10.0)
    }
}

impl ScheduleEnv for WirelessEnv {
    fn num_items(&self) -> usize {
        self.cfg.users.len()
    }

    fn state(&self) -> &TypicalState {
        &self.state
    }

    fn decision_sets(&self) -> &[usize] {
        &self.decision_sets
    }

    fn objective(&self) -> Objective {
        Objective::Minimize
    }

    fn step(&mut self, action: &TypicalAction) -> Result<StepOutcome> {
        let n = self.cfg.users.len();
        if action.item == 0 || action.item > n {
            return Err(Error::InvalidConfig(format!(
                "user index {} out of 1..={n}",
                action.item
            )));
        }
        let power_idx = *action.decisions.first().ok_or_else(|| {
            Error::InvalidConfig("wireless action needs a power level decision".into())
        })?;
        let power =
            *self.cfg.power_levels_w.get(power_idx).ok_or_else(|| {
                Error::InvalidConfig(format!("power level {power_idx} undeclared"))
            })?;

        let mut rates_mbps = vec![0.0; n];
        rates_mbps[action.item - 1] = shannon_rate(
            self.gain_linear(action.item - 1),
            power,
            self.cfg.bandwidth_hz,
            self.cfg.noise_w_per_hz(),
        ) / 1e6;

        // cost = power + sum_n mu_n (delta_bar_n - r_n), the quantity the
        // agent minimizes
        let bars = self.multipliers.delta_bar();
        let shortfall_terms: Vec<f64> = rates_mbps.iter().zip(&bars).map(|(r, d)| r - d).collect();
        let cost =
            crate::lagrangian::lagrangian_utility(power, &shortfall_terms, &self.multipliers.mu)?;

        self.multipliers.step(&rates_mbps)?;
        for u in 0..n {
            self.gains_db[u] = channel_draw_db(&self.cfg, u, &mut self.rng);
        }
        self.state = self.build_state();

        Ok(StepOutcome {
            utility: cost,
            objective_value: power,
            per_item: rates_mbps,
        })
    }

    fn multipliers(&self) -> &[f64] {
        &self.multipliers.mu
    }
}
