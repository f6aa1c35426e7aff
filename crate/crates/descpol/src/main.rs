//! Command-line front end: scenario runs, exact theorem checks, federated
//! runs, fineness sweeps, and heatmap export.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use descpol::agent::DescriptiveAgent;
use descpol::dqn::DqnConfig;
use descpol::env::{ItemSaleConfig, ItemSaleEnv};
use descpol::experiment::{
    derive_seed, emit_q_heatmap, fineness_sweep, item_sale_scheme, quantity_singletons,
    run_scenario, write_sweep_csv, ScenarioConfig,
};
use descpol::federated::{run_lockstep, FederatedConfig};
use descpol::network::Objective;
use descpol::partition::PartitionScheme;
use descpol::tabular::{iid_feature_instance, theorem1_gap};

#[derive(Parser)]
#[command(
    name = "descpol",
    version,
    about = "Descriptive scheduling policy experiments"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario config and write per-policy metric CSVs.
    Run {
        /// Scenario config (JSON).
        config: PathBuf,
        /// Override the config's global seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Override every phase duration (quick smoke runs).
        #[arg(long)]
        steps_override: Option<u64>,
    },
    /// Exact value-gap check between typical and descriptive optima on a
    /// small identical-items instance, over partitioning parameters b.
    TheoremCheck {
        #[arg(long, default_value_t = 2)]
        num_items: usize,
        /// Feature support points (one feature per item).
        #[arg(long, value_delimiter = ',', default_value = "0.0,0.5,1.0")]
        support: Vec<f64>,
        #[arg(long, default_value_t = 0.9)]
        gamma: f64,
        #[arg(long, default_value_t = 3)]
        max_b: u32,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Lockstep federated run: one item-sale system per item count, shared
    /// descriptive architecture, periodic parameter averaging.
    FlRun {
        #[arg(long, value_delimiter = ',', default_value = "2,6,10")]
        item_counts: Vec<usize>,
        /// Aggregate every this many timesteps.
        #[arg(long, default_value_t = 10)]
        aggregation_interval: u64,
        #[arg(long, default_value_t = 20_000)]
        steps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Train/evaluate one run per partition fineness and tabulate rewards.
    Sweep {
        /// Base scenario config (JSON); its partition is replaced per setting.
        config: PathBuf,
        /// Fineness settings as PxG pairs (price bins x quantity groups);
        /// G in {1, 2, 5}.
        #[arg(long, value_delimiter = ',', default_value = "1x1,2x2,4x5")]
        fineness: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        seeds: Vec<u64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long)]
        steps_override: Option<u64>,
    },
    /// Export the per-condition Q-value grid of a trained checkpoint.
    Heatmap {
        /// Descriptive-agent checkpoint (JSON).
        checkpoint: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().cmd {
        Cmd::Run {
            config,
            seed,
            out_dir,
            steps_override,
        } => {
            let mut cfg = ScenarioConfig::from_file(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            apply_overrides(&mut cfg, seed, steps_override);
            let outcome = run_scenario(&cfg, Some(&out_dir))?;
            for (kind, summary) in &outcome.per_policy {
                for phase in &summary.phases {
                    println!(
                        "{} phase {}: mean utility {:.6}, mean objective {:.6}",
                        kind.label(),
                        phase.name,
                        phase.mean_utility,
                        phase.mean_objective
                    );
                }
            }
            println!("wrote metrics to {}", out_dir.display());
        }
        Cmd::TheoremCheck {
            num_items,
            support,
            gamma,
            max_b,
            tol,
        } => {
            let instance = iid_feature_instance(num_items, &support, gamma);
            for b in 0..=max_b {
                let gap = theorem1_gap(&instance, b, tol)?;
                println!("b={b}: sup-norm value gap {gap:.3e}");
            }
        }
        Cmd::FlRun {
            item_counts,
            aggregation_interval,
            steps,
            seed,
            out_dir,
        } => {
            if item_counts.len() < 2 {
                bail!("federated run needs at least 2 systems");
            }
            std::fs::create_dir_all(&out_dir)?;
            let scheme = item_sale_scheme(4, quantity_singletons())?;
            let mut agents = item_counts
                .iter()
                .enumerate()
                .map(|(i, _)| {
                    DescriptiveAgent::new(
                        scheme.clone(),
                        vec![],
                        DqnConfig::simple_scenario(vec![100, 100], Objective::Maximize),
                        derive_seed(seed, &format!("fl-agent-{i}")),
                    )
                })
                .collect::<descpol::Result<Vec<_>>>()?;
            let mut envs = item_counts
                .iter()
                .enumerate()
                .map(|(i, &n)| {
                    ItemSaleEnv::new(
                        ItemSaleConfig::new(n),
                        ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("fl-env-{i}"))),
                    )
                })
                .collect::<descpol::Result<Vec<_>>>()?;
            let traces = run_lockstep(
                &mut agents,
                &mut envs,
                steps,
                &FederatedConfig {
                    aggregation_interval,
                },
            )?;
            for (i, (trace, &n)) in traces.iter().zip(&item_counts).enumerate() {
                let path = out_dir.join(format!("system_{i}_n{n}.csv"));
                let mut w = csv::Writer::from_path(&path)?;
                w.write_record(["timestep", "utility"])?;
                for (t, u) in trace.utilities.iter().enumerate() {
                    w.write_record(&[(t + 1).to_string(), format!("{u:.9}")])?;
                }
                w.flush()?;
                let mean = trace.utilities.iter().sum::<f64>() / trace.utilities.len() as f64;
                println!("system {i} (N={n}): mean utility {mean:.6}");
            }
            let mut w = csv::Writer::from_path(out_dir.join("aggregations.csv"))?;
            w.write_record(["timestep"])?;
            for t in (aggregation_interval..=steps).step_by(aggregation_interval as usize) {
                w.write_record(&[t.to_string()])?;
            }
            w.flush()?;
            agents[0].save(&out_dir.join("global_checkpoint.json"))?;
            println!("wrote traces to {}", out_dir.display());
        }
        Cmd::Sweep {
            config,
            fineness,
            seeds,
            out_dir,
            steps_override,
        } => {
            let mut base = ScenarioConfig::from_file(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            apply_overrides(&mut base, None, steps_override);
            let settings = fineness
                .iter()
                .map(|label| Ok((label.clone(), parse_fineness(label)?)))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let rows = fineness_sweep(&base, &settings, &seeds)?;
            std::fs::create_dir_all(&out_dir)?;
            write_sweep_csv(&rows, &out_dir.join("fineness.csv"))?;
            for row in &rows {
                println!(
                    "{}: mean utility {:.6} (std err {:.6})",
                    row.label, row.mean, row.std_err
                );
            }
        }
        Cmd::Heatmap {
            checkpoint,
            out_dir,
        } => {
            let agent = DescriptiveAgent::load(&checkpoint, 0)?;
            std::fs::create_dir_all(&out_dir)?;
            let probe = descpol::experiment::all_ones_probe(&agent.scheme);
            let grid = emit_q_heatmap(
                &agent.core.online,
                &probe,
                &agent.scheme,
                &agent.decision_sets,
                agent.core.cfg.objective,
                &out_dir.join("heatmap"),
            )?;
            let present = grid.iter().flatten().count();
            println!(
                "wrote heatmap ({present} conditions) to {}",
                out_dir.display()
            );
        }
    }
    Ok(())
}

fn apply_overrides(cfg: &mut ScenarioConfig, seed: Option<u64>, steps: Option<u64>) {
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(steps) = steps {
        for phase in &mut cfg.phases {
            phase.steps = steps;
        }
    }
}

/// "PxG": P uniform price bins; quantity grouping G = 1 ({0..4} lumped),
/// 2 ({0,1,2} and {3,4}), or 5 (singletons).
fn parse_fineness(label: &str) -> anyhow::Result<PartitionScheme> {
    let (p, g) = label
        .split_once('x')
        .with_context(|| format!("fineness '{label}' is not of the form PxG"))?;
    let p: usize = p
        .parse()
        .with_context(|| format!("bad price bins in '{label}'"))?;
    let groups = match g {
        "1" => vec![(0..5).map(f64::from).collect()],
        "2" => vec![vec![0.0, 1.0, 2.0], vec![3.0, 4.0]],
        "5" => quantity_singletons(),
        other => bail!("unsupported quantity grouping '{other}' (use 1, 2, or 5)"),
    };
    Ok(item_sale_scheme(p, groups)?)
}
