//! Item-sale scenario: N items with i.i.d. price p in [0,1] and quantity
//! g in {0,...,4}; selling item n yields reward p_n^e * g_n.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{ScheduleEnv, StepOutcome};
use crate::error::{Error, Result};
use crate::network::Objective;
use crate::translate::{TypicalAction, TypicalState};

pub const QUANTITY_VALUES: [f64; 5] = [0.0, 1.0, 2.0, 3.0, 4.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PriceDistribution {
    #[default]
    Uniform,
    /// p = 1 - phi/5 with phi truncated-exponential on [0,5],
    /// density e^{-x} / (1 - e^{-5}); mass concentrates near p = 1.
    TruncatedExponential,
}

impl PriceDistribution {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            PriceDistribution::Uniform => rng.random::<f64>(),
            PriceDistribution::TruncatedExponential => {
                // inverse CDF of the truncated exponential
                let u: f64 = rng.random();
                let phi = -(1.0 - u * (1.0 - (-5.0f64).exp())).ln();
                1.0 - phi / 5.0
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemSaleConfig {
    pub num_items: usize,
    #[serde(default)]
    pub price_distribution: PriceDistribution,
    /// Reward = p^e * g; e = 1 in the base scenario, 100 in the
    /// high-price-emphasis variant.
    #[serde(default = "default_exponent")]
    pub reward_exponent: f64,
}

fn default_exponent() -> f64 {
    1.0
}

impl ItemSaleConfig {
    pub fn new(num_items: usize) -> Self {
        ItemSaleConfig {
            num_items,
            price_distribution: PriceDistribution::Uniform,
            reward_exponent: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_items == 0 {
            return Err(Error::InvalidConfig("need at least one item".into()));
        }
        if self.reward_exponent < 1.0 {
            return Err(Error::InvalidConfig("reward exponent must be >= 1".into()));
        }
        Ok(())
    }

    /// Reward of selling a (price, quantity) item.
    pub fn reward(&self, price: f64, quantity: f64) -> f64 {
        price.powf(self.reward_exponent) * quantity
    }
}

pub struct ItemSaleEnv {
    cfg: ItemSaleConfig,
    state: TypicalState,
    rng: ChaCha8Rng,
    decision_sets: [usize; 0],
}

impl ItemSaleEnv {
    pub fn new(cfg: ItemSaleConfig, rng: ChaCha8Rng) -> Result<Self> {
        cfg.validate()?;
        let mut env = ItemSaleEnv {
            cfg,
            state: TypicalState::new(vec![]),
            rng,
            decision_sets: [],
        };
        env.state = env.draw_state();
        Ok(env)
    }

    pub fn config(&self) -> &ItemSaleConfig {
        &self.cfg
    }

    fn draw_state(&mut self) -> TypicalState {
        let features = (0..self.cfg.num_items)
            .map(|_| {
                let p = self.cfg.price_distribution.sample(&mut self.rng);
                let g = QUANTITY_VALUES[self.rng.random_range(0..QUANTITY_VALUES.len())];
                vec![p, g]
            })
            .collect();
        TypicalState::new(features)
    }
}

impl ScheduleEnv for ItemSaleEnv {
    fn num_items(&self) -> usize {
        self.cfg.num_items
    }

    fn state(&self) -> &TypicalState {
        &self.state
    }

    fn decision_sets(&self) -> &[usize] {
        &self.decision_sets
    }

    fn objective(&self) -> Objective {
        Objective::Maximize
    }

    fn step(&mut self, action: &TypicalAction) -> Result<StepOutcome> {
        if action.item == 0 || action.item > self.cfg.num_items {
            return Err(Error::InvalidConfig(format!(
                "item index {} out of 1..={}",
                action.item, self.cfg.num_items
            )));
        }
        let f = &self.state.features[action.item - 1];
        let reward = self.cfg.reward(f[0], f[1]);
        self.state = self.draw_state();
        Ok(StepOutcome {
            utility: reward,
            objective_value: reward,
            per_item: vec![],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn env(n: usize) -> ItemSaleEnv {
        ItemSaleEnv::new(ItemSaleConfig::new(n), ChaCha8Rng::seed_from_u64(1)).unwrap()
    }

    #[test]
    fn reward_is_price_times_quantity() {
        let mut e = env(2);
        e.state = TypicalState::new(vec![vec![0.5, 4.0], vec![0.9, 1.0]]);
        let out = e
            .step(&TypicalAction {
                item: 1,
                decisions: vec![],
            })
            .unwrap();
        assert_eq!(out.utility, 2.0);
    }

    #[test]
    fn zero_quantity_zero_reward() {
        let mut e = env(1);
        e.state = TypicalState::new(vec![vec![0.99, 0.0]]);
        let out = e
            .step(&TypicalAction {
                item: 1,
                decisions: vec![],
            })
            .unwrap();
        assert_eq!(out.utility, 0.0);
    }

    #[test]
    fn invalid_item_rejected() {
        let mut e = env(2);
        assert!(e
            .step(&TypicalAction {
                item: 3,
                decisions: vec![]
            })
            .is_err());
        assert!(e
            .step(&TypicalAction {
                item: 0,
                decisions: vec![]
            })
            .is_err());
    }

    #[test]
    fn unchosen_items_do_not_affect_utility() {
        let mut e1 = env(3);
        let mut e2 = env(3);
        e1.state = TypicalState::new(vec![vec![0.5, 2.0], vec![0.1, 1.0], vec![0.9, 3.0]]);
        e2.state = TypicalState::new(vec![vec![0.5, 2.0], vec![0.7, 4.0], vec![0.2, 0.0]]);
        let a = TypicalAction {
            item: 1,
            decisions: vec![],
        };
        assert_eq!(e1.step(&a).unwrap().utility, e2.step(&a).unwrap().utility);
    }

    #[test]
    fn truncated_exponential_matches_density() {
        // Kolmogorov-Smirnov against the analytic CDF of p = 1 - phi/5,
        // F(p) = (e^{-5(1-p)} - e^{-5}) / (1 - e^{-5})
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let dist = PriceDistribution::TruncatedExponential;
        let n = 1_000_000usize;
        let mut samples: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let z = 1.0 - (-5.0f64).exp();
        let cdf = |p: f64| ((-5.0 * (1.0 - p)).exp() - (-5.0f64).exp()) / z;
        let mut d_max: f64 = 0.0;
        for (i, &p) in samples.iter().enumerate() {
            let f = cdf(p);
            let emp_hi = (i + 1) as f64 / n as f64;
            let emp_lo = i as f64 / n as f64;
            d_max = d_max.max((f - emp_lo).abs()).max((f - emp_hi).abs());
        }
        // KS critical value at the 1% level
        let crit = 1.63 / (n as f64).sqrt();
        assert!(d_max < crit, "KS statistic {d_max} >= {crit}");
        assert!(samples.iter().all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn prices_are_iid_across_slots() {
        let mut e = env(1);
        let mut prices = Vec::with_capacity(100_000);
        for _ in 0..100_000 {
            prices.push(e.state.features[0][0]);
            e.step(&TypicalAction {
                item: 1,
                decisions: vec![],
            })
            .unwrap();
        }
        let mean = prices.iter().sum::<f64>() / prices.len() as f64;
        let var = prices.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / prices.len() as f64;
        let cov = prices
            .windows(2)
            .map(|w| (w[0] - mean) * (w[1] - mean))
            .sum::<f64>()
            / (prices.len() - 1) as f64;
        let rho = cov / var;
        assert!(rho.abs() < 0.01, "lag-1 autocorrelation {rho}");
    }
}
