//! Federated training across several systems: each system runs its own
//! learner on its own environment, and every `aggregation_interval` steps
//! the online network parameters are replaced by their elementwise mean.
//!
//! Only the online parameters travel; target networks and optimizer state
//! stay local and resynchronize through the usual target updates.

use crate::agent::DescriptiveAgent;
use crate::env::ScheduleEnv;
use crate::error::{Error, Result};
use crate::network::average_params;

pub struct FederatedConfig {
    pub aggregation_interval: u64,
}

impl FederatedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.aggregation_interval == 0 {
            return Err(Error::InvalidConfig(
                "aggregation interval must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Per-system trace of a federated run.
#[derive(Debug, Clone, Default)]
pub struct SystemTrace {
    pub utilities: Vec<f64>,
    pub objective_values: Vec<f64>,
}

/// Average the online parameters of all agents in place.
pub fn aggregate(agents: &mut [DescriptiveAgent]) -> Result<()> {
    let params: Vec<_> = agents.iter().map(|a| a.core.online.clone()).collect();
    let mean = average_params(&params)?;
    for agent in agents.iter_mut() {
        agent.core.online = mean.clone();
    }
    Ok(())
}

/// Run `steps` lockstep timesteps: every agent advances one step on its own
/// environment each round, and aggregation happens after every step count
/// that is a multiple of the interval.
///
/// All agents must share the partition scheme, decision sets, and network
/// architecture; systems may differ in item count.
pub fn run_lockstep<E: ScheduleEnv>(
    agents: &mut [DescriptiveAgent],
    envs: &mut [E],
    steps: u64,
    cfg: &FederatedConfig,
) -> Result<Vec<SystemTrace>> {
    cfg.validate()?;
    if agents.is_empty() || agents.len() != envs.len() {
        return Err(Error::InvalidConfig(format!(
            "{} agents for {} environments",
            agents.len(),
            envs.len()
        )));
    }
    let arch = agents[0].core.online.arch.clone();
    for (i, agent) in agents.iter().enumerate() {
        if agent.core.online.arch != arch {
            return Err(Error::ShapeMismatch(format!(
                "agent {i} architecture differs from agent 0"
            )));
        }
        if agent.scheme != agents[0].scheme {
            return Err(Error::ShapeMismatch(format!(
                "agent {i} partition scheme differs from agent 0"
            )));
        }
    }
    let mut traces = vec![SystemTrace::default(); agents.len()];
    for t in 1..=steps {
        for ((agent, env), trace) in agents.iter_mut().zip(envs.iter_mut()).zip(&mut traces) {
            let outcome = agent.step(env)?;
            trace.utilities.push(outcome.utility);
            trace.objective_values.push(outcome.objective_value);
        }
        if t % cfg.aggregation_interval == 0 {
            aggregate(agents)?;
        }
    }
    Ok(traces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dqn::DqnConfig;
    use crate::env::{ItemSaleConfig, ItemSaleEnv};
    use crate::network::Objective;
    use crate::partition::PartitionScheme;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scheme() -> PartitionScheme {
        PartitionScheme::new(vec![
            crate::partition::FeaturePartition::Uniform(4),
            crate::partition::FeaturePartition::Discrete(vec![0.0, 1.0, 2.0, 3.0, 4.0]),
        ])
        .unwrap()
    }

    fn agent(seed: u64) -> DescriptiveAgent {
        DescriptiveAgent::new(
            scheme(),
            vec![],
            DqnConfig::simple_scenario(vec![16], Objective::Maximize),
            seed,
        )
        .unwrap()
    }

    #[test]
    fn aggregation_is_elementwise_mean() {
        let mut agents = vec![agent(1), agent(2)];
        let w0 = agents[0].core.online.weights[0][0];
        let w1 = agents[1].core.online.weights[0][0];
        aggregate(&mut agents).unwrap();
        let expected = (w0 + w1) / 2.0;
        assert_eq!(agents[0].core.online.weights[0][0], expected);
        assert_eq!(agents[1].core.online.weights[0][0], expected);
    }

    #[test]
    fn aggregation_of_identical_params_is_identity() {
        let mut agents = vec![agent(7), agent(7)];
        let before = agents[0].core.online.clone();
        aggregate(&mut agents).unwrap();
        assert_eq!(agents[0].core.online.weights, before.weights);
        assert_eq!(agents[0].core.online.biases, before.biases);
    }

    #[test]
    fn target_and_optimizer_stay_local() {
        let mut agents = vec![agent(1), agent(2)];
        let targets_before: Vec<_> = agents.iter().map(|a| a.core.target.clone()).collect();
        aggregate(&mut agents).unwrap();
        for (agent, before) in agents.iter().zip(&targets_before) {
            assert_eq!(agent.core.target.weights, before.weights);
        }
        assert_ne!(
            agents[0].core.target.weights[0][0],
            agents[1].core.target.weights[0][0]
        );
    }

    #[test]
    fn lockstep_runs_and_aggregates() {
        let mut agents = vec![agent(1), agent(2)];
        let mut envs = vec![
            ItemSaleEnv::new(ItemSaleConfig::new(3), ChaCha8Rng::seed_from_u64(10)).unwrap(),
            ItemSaleEnv::new(ItemSaleConfig::new(6), ChaCha8Rng::seed_from_u64(11)).unwrap(),
        ];
        let traces = run_lockstep(
            &mut agents,
            &mut envs,
            50,
            &FederatedConfig {
                aggregation_interval: 25,
            },
        )
        .unwrap();
        assert_eq!(traces.len(), 2);
        assert_eq!(traces[0].utilities.len(), 50);
        // step 50 is a multiple of 25, so the run ends right after an
        // aggregation: online parameters agree bit for bit
        assert_eq!(agents[0].core.online.weights, agents[1].core.online.weights);
    }

    #[test]
    fn aggregation_speeds_up_early_learning() {
        // six systems (two each of three item counts): the federated arm
        // aggregates every 10 steps, the solo arm never does; same agent
        // and environment seeds, so the comparison is paired
        let item_counts = [2usize, 2, 6, 6, 10, 10];
        let steps = 10_000u64;
        let window = 2000usize;
        let score = |aggregation_interval: u64, seed: u64| -> f64 {
            let mut agents: Vec<DescriptiveAgent> = (0..item_counts.len())
                .map(|i| agent(seed * 100 + i as u64))
                .collect();
            let mut envs: Vec<ItemSaleEnv> = item_counts
                .iter()
                .enumerate()
                .map(|(i, &n)| {
                    ItemSaleEnv::new(
                        ItemSaleConfig::new(n),
                        ChaCha8Rng::seed_from_u64(seed * 1000 + i as u64),
                    )
                    .unwrap()
                })
                .collect();
            let traces = run_lockstep(
                &mut agents,
                &mut envs,
                steps,
                &FederatedConfig {
                    aggregation_interval,
                },
            )
            .unwrap();
            traces
                .iter()
                .map(|t| {
                    let tail = &t.utilities[t.utilities.len() - window..];
                    tail.iter().sum::<f64>() / window as f64
                })
                .sum::<f64>()
                / traces.len() as f64
        };
        let seeds = [1u64, 2, 3, 4, 5];
        let fl: f64 = seeds.iter().map(|&s| score(10, s)).sum::<f64>() / seeds.len() as f64;
        let solo: f64 =
            seeds.iter().map(|&s| score(steps + 1, s)).sum::<f64>() / seeds.len() as f64;
        assert!(
            fl >= 0.98 * solo,
            "federated arm should learn at least as fast: {fl:.4} vs {solo:.4}"
        );
    }

    #[test]
    fn mismatched_architectures_rejected() {
        let mut agents = vec![
            agent(1),
            DescriptiveAgent::new(
                scheme(),
                vec![],
                DqnConfig::simple_scenario(vec![8], Objective::Maximize),
                2,
            )
            .unwrap(),
        ];
        let mut envs = vec![
            ItemSaleEnv::new(ItemSaleConfig::new(3), ChaCha8Rng::seed_from_u64(10)).unwrap(),
            ItemSaleEnv::new(ItemSaleConfig::new(3), ChaCha8Rng::seed_from_u64(11)).unwrap(),
        ];
        assert!(run_lockstep(
            &mut agents,
            &mut envs,
            10,
            &FederatedConfig {
                aggregation_interval: 5
            }
        )
        .is_err());
    }
}
