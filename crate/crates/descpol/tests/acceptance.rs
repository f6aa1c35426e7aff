//! End-to-end acceptance suite. Each test prints one PASS/FAIL line with
//! the measured quantity and its pinned threshold.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use descpol::agent::DescriptiveAgent;
use descpol::dqn::{DqnConfig, EpsilonSchedule};
use descpol::env::{ItemSaleConfig, ItemSaleEnv, WirelessConfig};
use descpol::experiment::{
    all_ones_probe, fineness_sweep, heatmap_argbest, item_sale_scheme, q_heatmap,
    quantity_singletons, run_scenario, EnvSpec, PhaseConfig, PolicyKind, ScenarioConfig,
};
use descpol::federated::{aggregate, run_lockstep, FederatedConfig};
use descpol::lagrangian::{ConstraintDirection, MultiplierVector};
use descpol::network::{
    average_params, td_loss_and_gradient, NetworkArchitecture, Objective, QNetworkParams, TdSample,
};
use descpol::partition::{Condition, FeaturePartition, PartitionScheme};
use descpol::tabular::{greedy_oracle, iid_feature_instance, theorem1_gap};
use descpol::translate::TypicalState;

fn report(id: u32, name: &str, detail: &str, pass: bool) {
    use std::io::Write;
    let line = format!(
        "[criterion {id}] {name}: {} ({detail})\n",
        if pass { "PASS" } else { "FAIL" }
    );
    // write to the raw stream so the line survives the harness's
    // per-test output capture even when the criterion passes
    let _ = std::io::stdout().write_all(line.as_bytes());
    let _ = std::io::stdout().flush();
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

// ---------------------------------------------------------------- 1 -----

#[test]
fn c1_exact_value_gap_equivalence() {
    let start = Instant::now();
    let instance = iid_feature_instance(2, &[0.0, 0.5, 1.0], 0.9);
    let gaps: Vec<f64> = (0..=3)
        .map(|b| theorem1_gap(&instance, b, 1e-12).unwrap())
        .collect();
    let elapsed = start.elapsed();
    let non_increasing = gaps.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let pass = gaps[2] <= 1e-9 && non_increasing && elapsed.as_secs_f64() < 1.0;
    let gap_text = gaps
        .iter()
        .map(|g| format!("{g:.3e}"))
        .collect::<Vec<_>>()
        .join(", ");
    report(
        1,
        "descriptive/typical value-gap equivalence",
        &format!(
            "gaps over b=0..3: [{gap_text}], gap(b=2) <= 1e-9, non-increasing, {} ms < 1 s",
            elapsed.as_millis()
        ),
        pass,
    );
}

// ---------------------------------------------------------------- 2 -----

#[test]
fn c2_gradient_correctness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let input = rng.random_range(2..=5);
        let hidden = vec![rng.random_range(3..=6)];
        let output = rng.random_range(2..=4);
        let arch = NetworkArchitecture::new(input, hidden, output).unwrap();
        let params = QNetworkParams::init(arch.clone(), &mut rng);
        let target = QNetworkParams::init(arch, &mut rng);
        let batch: Vec<TdSample> = (0..4)
            .map(|_| TdSample {
                input: (0..input).map(|_| rng.random::<f64>()).collect(),
                action: rng.random_range(0..output),
                utility: rng.random::<f64>() * 2.0 - 1.0,
                next_input: (0..input).map(|_| rng.random::<f64>()).collect(),
                next_mask: {
                    let mut m: Vec<bool> = (0..output).map(|_| rng.random()).collect();
                    m[0] = true; // keep at least one feasible bootstrap action
                    m
                },
            })
            .collect();
        let (_, grad) =
            td_loss_and_gradient(&params, &target, &batch, 0.9, Objective::Maximize).unwrap();

        let h = 1e-5;
        let mut check = |layer: usize, idx: usize, is_bias: bool, analytic: f64| {
            let mut lo = params.clone();
            let mut hi = params.clone();
            if is_bias {
                lo.biases[layer][idx] -= h;
                hi.biases[layer][idx] += h;
            } else {
                lo.weights[layer][idx] -= h;
                hi.weights[layer][idx] += h;
            }
            let (l_lo, _) =
                td_loss_and_gradient(&lo, &target, &batch, 0.9, Objective::Maximize).unwrap();
            let (l_hi, _) =
                td_loss_and_gradient(&hi, &target, &batch, 0.9, Objective::Maximize).unwrap();
            let numeric = (l_hi - l_lo) / (2.0 * h);
            if analytic.abs() > 1e-8 {
                worst = worst.max((numeric - analytic).abs() / analytic.abs());
            }
        };
        for layer in 0..grad.weights.len() {
            for idx in 0..grad.weights[layer].len() {
                check(layer, idx, false, grad.weights[layer][idx]);
            }
            for idx in 0..grad.biases[layer].len() {
                check(layer, idx, true, grad.biases[layer][idx]);
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = worst < 1e-4 && elapsed.as_secs_f64() < 10.0;
    report(
        2,
        "analytic vs central-difference gradients",
        &format!(
            "20 networks, max relative error {worst:.2e} < 1e-4, {:.1} s < 10 s",
            elapsed.as_secs_f64()
        ),
        pass,
    );
}

// ------------------------------------------------------------- 3/4/5 ----

fn simple_scheme() -> PartitionScheme {
    item_sale_scheme(4, quantity_singletons()).unwrap()
}

fn simple_phases(a: u64, b: u64, c: u64, freeze_c: bool) -> Vec<PhaseConfig> {
    vec![
        PhaseConfig {
            name: "A".into(),
            env: EnvSpec::ItemSale(ItemSaleConfig::new(2)),
            steps: a,
            freeze_descriptive: false,
        },
        PhaseConfig {
            name: "B".into(),
            env: EnvSpec::ItemSale(ItemSaleConfig::new(6)),
            steps: b,
            freeze_descriptive: false,
        },
        PhaseConfig {
            name: "C".into(),
            env: EnvSpec::ItemSale(ItemSaleConfig::new(10)),
            steps: c,
            freeze_descriptive: freeze_c,
        },
    ]
}

fn simple_config(seed: u64, phases: Vec<PhaseConfig>, policies: Vec<PolicyKind>) -> ScenarioConfig {
    ScenarioConfig {
        scheme: simple_scheme(),
        decision_sets: vec![],
        dqn: DqnConfig::simple_scenario(vec![100, 100], Objective::Maximize),
        conv_dqn: None,
        phases,
        seed,
        policies,
        window: 1000,
        stride: 1000,
        trailing_window: 10_000,
    }
}

#[test]
fn c3_system_agnostic_transfer() {
    let seeds = [1u64, 2, 3, 4, 5];
    let ratios: Vec<f64> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                scope.spawn(move || {
                    let cfg = simple_config(
                        seed,
                        simple_phases(100_000, 100_000, 10_000, true),
                        vec![PolicyKind::Descriptive, PolicyKind::Oracle],
                    );
                    let out = run_scenario(&cfg, None).unwrap();
                    let desc = out.per_policy[&PolicyKind::Descriptive].phases[2].mean_utility;
                    let opt = out.per_policy[&PolicyKind::Oracle].phases[2].mean_utility;
                    desc / opt
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    report(
        3,
        "frozen transfer to an unseen item count",
        &format!("per-seed reward ratios vs oracle {ratios:.3?}, mean {mean:.3} >= 0.90"),
        mean >= 0.90,
    );
}

#[test]
fn c4_scheduling_principle_alignment() {
    // train through all three systems (no freeze) so the learned ranking of
    // conditions is exercised across item counts; constant exploration keeps
    // every condition sampled, which the argmax comparison needs
    let mut cfg = simple_config(
        11,
        simple_phases(100_000, 100_000, 100_000, false),
        vec![PolicyKind::Descriptive],
    );
    cfg.dqn.buffer_capacity = 3000;
    cfg.dqn.batch_size = 100;
    let agent = run_scenario(&cfg, None).unwrap().descriptive_agent.unwrap();
    let scheme = simple_scheme();

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let trials = 10_000;
    let mut agree = 0usize;
    for _ in 0..trials {
        let state = TypicalState::new(
            (0..10)
                .map(|_| vec![rng.random::<f64>(), rng.random_range(0..5) as f64])
                .collect(),
        );
        let oracle_item = greedy_oracle(&state, 1.0).item;
        let oracle_condition = {
            let f = &state.features[oracle_item - 1];
            Condition(vec![
                scheme.bin_index(0, f[0]).unwrap(),
                scheme.bin_index(1, f[1]).unwrap(),
            ])
        };
        if agent.greedy_action(&state).unwrap().condition == oracle_condition {
            agree += 1;
        }
    }
    let fraction = agree as f64 / trials as f64;

    let grid = q_heatmap(
        &agent.core.online,
        &all_ones_probe(&scheme),
        &[],
        Objective::Maximize,
    )
    .unwrap();
    let argmax = heatmap_argbest(&grid, &scheme.shape(), Objective::Maximize).unwrap();
    let expected = Condition(vec![4, 5]); // top price bin, top quantity bin
    let pass = fraction >= 0.90 && argmax == expected;
    report(
        4,
        "greedy condition agreement with the oracle",
        &format!(
            "agreement {fraction:.3} >= 0.90 on {trials} states; heatmap argmax {:?} == {:?}",
            argmax.0, expected.0
        ),
        pass,
    );
}

#[test]
fn c5_fineness_monotonicity() {
    let base = simple_config(
        0,
        simple_phases(30_000, 30_000, 10_000, true),
        vec![PolicyKind::Descriptive],
    );
    let seeds = [1u64, 2, 3, 4, 5];
    let settings = [
        (
            "1x1".to_string(),
            item_sale_scheme(1, vec![(0..5).map(f64::from).collect()]).unwrap(),
        ),
        (
            "2x2".to_string(),
            item_sale_scheme(2, vec![vec![0.0, 1.0, 2.0], vec![3.0, 4.0]]).unwrap(),
        ),
        ("4x5".to_string(), simple_scheme()),
    ];
    // one partition per thread; seeds are shared so comparisons pair up
    let rows: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = settings
            .iter()
            .map(|setting| {
                let base = &base;
                scope.spawn(move || {
                    fineness_sweep(base, std::slice::from_ref(setting), &seeds)
                        .unwrap()
                        .remove(0)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });

    // paired per-seed gaps with their standard errors
    let gap_stats = |lo: &[f64], hi: &[f64]| {
        let diffs: Vec<f64> = hi.iter().zip(lo).map(|(h, l)| h - l).collect();
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64;
        (mean, (var / diffs.len() as f64).sqrt())
    };
    let (g12, se12) = gap_stats(&rows[0].per_seed, &rows[1].per_seed);
    let (g23, se23) = gap_stats(&rows[1].per_seed, &rows[2].per_seed);
    let pass = g12 > 2.0 * se12 && g23 > 2.0 * se23;
    report(
        5,
        "reward increases with partition fineness",
        &format!(
            "means (1,1)={:.3} < (2,2)={:.3} < (4,5)={:.3}; gaps {g12:.3} > 2x{se12:.3}, \
             {g23:.3} > 2x{se23:.3}",
            rows[0].mean, rows[1].mean, rows[2].mean
        ),
        pass,
    );
}

// ---------------------------------------------------------------- 6 -----

#[test]
fn c6_wireless_constraint_satisfaction() {
    let seeds = [1u64, 2, 3];
    let results: Vec<(Vec<f64>, f64, f64)> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                scope.spawn(move || {
                    let wireless = WirelessConfig::system_a();
                    let scheme = PartitionScheme::new(vec![
                        FeaturePartition::Uniform(5),
                        descpol::lagrangian::default_multiplier_partition(),
                    ])
                    .unwrap();
                    let cfg = ScenarioConfig {
                        scheme,
                        decision_sets: vec![wireless.power_levels_w.len()],
                        dqn: DqnConfig {
                            epsilon: EpsilonSchedule::Constant(0.1),
                            hidden: vec![50, 50],
                            objective: Objective::Minimize,
                            ..DqnConfig::simple_scenario(vec![], Objective::Minimize)
                        },
                        conv_dqn: None,
                        phases: vec![PhaseConfig {
                            name: "A".into(),
                            env: EnvSpec::Wireless(wireless),
                            steps: 200_000,
                            freeze_descriptive: false,
                        }],
                        seed,
                        policies: vec![PolicyKind::Descriptive, PolicyKind::Random],
                        window: 1000,
                        stride: 10_000,
                        trailing_window: 50_000,
                    };
                    let out = run_scenario(&cfg, None).unwrap();
                    let desc = &out.per_policy[&PolicyKind::Descriptive].phases[0];
                    let rand_power =
                        out.per_policy[&PolicyKind::Random].phases[0].trailing_mean_objective;
                    (
                        desc.trailing_per_item_means.clone(),
                        desc.trailing_mean_objective,
                        rand_power,
                    )
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });

    // user 4 sits at 80 m; requirement delta = 1 Mbps
    let min_far_rate = results
        .iter()
        .map(|(rates, _, _)| rates[3])
        .fold(f64::INFINITY, f64::min);
    let rates_ok = results.iter().all(|(rates, _, _)| rates[3] >= 0.95);
    let power_ok = results
        .iter()
        .all(|(_, desc_power, rand_power)| desc_power <= rand_power);
    report(
        6,
        "far-user rate constraint at reduced budget",
        &format!(
            "80 m user trailing rate >= 0.95 Mbps per seed (min {min_far_rate:.3}); \
             trained power <= max-power baseline ({:.2} vs {:.2} W)",
            results[0].1, results[0].2
        ),
        rates_ok && power_ok,
    );
}

// ---------------------------------------------------------------- 7 -----

#[test]
fn c7_multiplier_arithmetic() {
    // at-most form: mu <- max(0, mu - alpha (delta - u)); a violation
    // (u = 0.8 > delta = 0.5) raises mu by exactly alpha (u - delta)
    let mut at_most =
        MultiplierVector::new(1, 0.1, vec![0.5], 0.9, ConstraintDirection::AtMost).unwrap();
    at_most.update(&[0.8], 0.1).unwrap();
    let at_most_ok = (at_most.mu[0] - 0.1 * (0.8 - 0.5)).abs() < 1e-15;

    // at-least (rate) form with the discounted constant: delta_bar = 10
    let mut rate =
        MultiplierVector::new(1, 0.01, vec![1.0], 0.9, ConstraintDirection::AtLeast).unwrap();
    let delta_bar = rate.delta_bar()[0];
    let delta_bar_ok = (delta_bar - 10.0).abs() < 1e-12;
    rate.mu[0] = 0.5;
    rate.step(&[4.0]).unwrap();
    let rate_ok = (rate.mu[0] - (0.5 + 0.01 * (delta_bar - 4.0))).abs() < 1e-12;

    // projection at zero
    let mut proj =
        MultiplierVector::new(1, 1.0, vec![0.0], 0.9, ConstraintDirection::AtLeast).unwrap();
    proj.step(&[100.0]).unwrap();
    let proj_ok = proj.mu[0] == 0.0;

    report(
        7,
        "multiplier subgradient arithmetic",
        &format!(
            "at-most update exact, delta/(1-gamma) = {delta_bar:.12} = 10 Mbps, \
             rate update exact, projected at zero"
        ),
        at_most_ok && delta_bar_ok && rate_ok && proj_ok,
    );
}

// ---------------------------------------------------------------- 8 -----

#[test]
fn c8_fedavg_exactness_and_symmetry() {
    // bit-exact elementwise mean against a reference computation
    let scheme = simple_scheme();
    let mk = |seed| {
        DescriptiveAgent::new(
            scheme.clone(),
            vec![],
            DqnConfig::simple_scenario(vec![10], Objective::Maximize),
            seed,
        )
        .unwrap()
    };
    let mut agents = vec![mk(1), mk(2), mk(3)];
    let reference = average_params(
        &agents
            .iter()
            .map(|a| a.core.online.clone())
            .collect::<Vec<_>>(),
    )
    .unwrap();
    let mut expected = agents[0].core.online.clone();
    for (l, layer) in expected.weights.iter_mut().enumerate() {
        for (i, w) in layer.iter_mut().enumerate() {
            *w = (agents[0].core.online.weights[l][i]
                + agents[1].core.online.weights[l][i]
                + agents[2].core.online.weights[l][i])
                / 3.0;
        }
    }
    aggregate(&mut agents).unwrap();
    let exact = agents[0].core.online.weights == expected.weights
        && agents[0].core.online.weights == reference.weights;

    // two identically seeded identical systems stay bit-identical
    let mut twins = vec![mk(9), mk(9)];
    let mut envs = vec![
        ItemSaleEnv::new(ItemSaleConfig::new(4), ChaCha8Rng::seed_from_u64(50)).unwrap(),
        ItemSaleEnv::new(ItemSaleConfig::new(4), ChaCha8Rng::seed_from_u64(50)).unwrap(),
    ];
    run_lockstep(
        &mut twins,
        &mut envs,
        1000,
        &FederatedConfig {
            aggregation_interval: 10,
        },
    )
    .unwrap();
    let symmetric = twins[0].core.online == twins[1].core.online
        && twins[0].core.target == twins[1].core.target;

    report(
        8,
        "federated averaging exactness and symmetry",
        "3-system mean bit-exact; identical twins parameter-identical after 1000 steps",
        exact && symmetric,
    );
}

// ---------------------------------------------------------------- 9 -----

#[test]
fn c9_cli_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("scenario.json");
    let cfg = simple_config(
        3,
        simple_phases(400, 300, 200, true),
        vec![
            PolicyKind::Descriptive,
            PolicyKind::Oracle,
            PolicyKind::Random,
        ],
    );
    serde_json::to_writer_pretty(std::fs::File::create(&config_path).unwrap(), &cfg).unwrap();

    let run = |out: &Path| {
        let status = Command::new(env!("CARGO_BIN_EXE_descpol"))
            .args([
                "run",
                config_path.to_str().unwrap(),
                "--seed",
                "7",
                "--out-dir",
                out.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
        let mut csvs: Vec<(String, Vec<u8>)> = std::fs::read_dir(out)
            .unwrap()
            .filter_map(|e| {
                let path = e.unwrap().path();
                (path.extension().is_some_and(|x| x == "csv")).then(|| {
                    (
                        path.file_name().unwrap().to_string_lossy().into_owned(),
                        std::fs::read(&path).unwrap(),
                    )
                })
            })
            .collect();
        csvs.sort();
        csvs
    };
    let first = run(&dir.path().join("out1"));
    let second = run(&dir.path().join("out2"));
    let names: Vec<&str> = first.iter().map(|(n, _)| n.as_str()).collect();
    let pass = !first.is_empty() && first == second;
    report(
        9,
        "seeded CLI runs are bit-identical",
        &format!("{} CSVs compared byte-for-byte: {names:?}", first.len()),
        pass,
    );
}
