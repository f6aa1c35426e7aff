//! Scenario orchestration: multi-phase runs with a persistent descriptive
//! learner, per-phase conventional baselines, oracle and random references,
//! CSV metric export, Q-value heatmaps, and partition-fineness sweeps.

use std::collections::BTreeMap;
use std::collections::VecDeque;
use std::fs::File;
use std::io::Write as IoWrite;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{ConventionalAgent, DescriptiveAgent, RandomPolicy};
use crate::dqn::DqnConfig;
use crate::env::{ItemSaleConfig, ItemSaleEnv, ScheduleEnv, WirelessConfig, WirelessEnv};
use crate::error::{Error, Result};
use crate::network::{Objective, QNetworkParams};
use crate::partition::{Condition, PartitionScheme};
use crate::tabular::greedy_oracle;

/// Which simulator a phase runs on.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSpec {
    ItemSale(ItemSaleConfig),
    Wireless(WirelessConfig),
}

impl EnvSpec {
    pub fn build(&self, seed: u64) -> Result<Box<dyn ScheduleEnv>> {
        let rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(match self {
            EnvSpec::ItemSale(cfg) => Box::new(ItemSaleEnv::new(cfg.clone(), rng)?),
            EnvSpec::Wireless(cfg) => Box::new(WirelessEnv::new(cfg.clone(), rng)?),
        })
    }

    fn validate(&self, path: &str) -> Result<()> {
        match self {
            EnvSpec::ItemSale(cfg) => cfg
                .validate()
                .map_err(|e| Error::InvalidConfig(format!("{path}: {e}"))),
            EnvSpec::Wireless(cfg) => cfg
                .validate()
                .map_err(|e| Error::InvalidConfig(format!("{path}: {e}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Descriptive,
    Conventional,
    Oracle,
    Random,
}

impl PolicyKind {
    pub fn label(&self) -> &'static str {
        match self {
            PolicyKind::Descriptive => "desc_p",
            PolicyKind::Conventional => "conv_p",
            PolicyKind::Oracle => "opt_p",
            PolicyKind::Random => "random",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseConfig {
    pub name: String,
    pub env: EnvSpec,
    pub steps: u64,
    /// Freeze the descriptive learner for this phase: no gradient steps,
    /// no exploration.
    #[serde(default)]
    pub freeze_descriptive: bool,
}

fn default_window() -> usize {
    1000
}

fn default_stride() -> u64 {
    100
}

fn default_trailing() -> u64 {
    50_000
}

fn default_policies() -> Vec<PolicyKind> {
    vec![PolicyKind::Descriptive]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scheme: PartitionScheme,
    #[serde(default)]
    pub decision_sets: Vec<usize>,
    pub dqn: DqnConfig,
    /// Hyperparameters for the conventional baseline; defaults to `dqn`.
    #[serde(default)]
    pub conv_dqn: Option<DqnConfig>,
    pub phases: Vec<PhaseConfig>,
    pub seed: u64,
    #[serde(default = "default_policies")]
    pub policies: Vec<PolicyKind>,
    /// Trailing window for the plotted running average.
    #[serde(default = "default_window")]
    pub window: usize,
    /// Record every `stride`-th timestep (phase boundaries always recorded).
    #[serde(default = "default_stride")]
    pub stride: u64,
    /// Trailing-window length for end-of-phase summaries.
    #[serde(default = "default_trailing")]
    pub trailing_window: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.phases.is_empty() {
            return Err(Error::InvalidConfig("phases: must not be empty".into()));
        }
        for (i, phase) in self.phases.iter().enumerate() {
            if phase.steps == 0 {
                return Err(Error::InvalidConfig(format!(
                    "phases[{i}].steps: must be >= 1"
                )));
            }
            phase.env.validate(&format!("phases[{i}].env"))?;
            if self.policies.contains(&PolicyKind::Oracle) {
                if let EnvSpec::Wireless(_) = phase.env {
                    return Err(Error::InvalidConfig(format!(
                        "policies: oracle is only defined for item-sale \
                         environments (phases[{i}] is wireless)"
                    )));
                }
            }
        }
        if self.window == 0 {
            return Err(Error::InvalidConfig("window: must be >= 1".into()));
        }
        if self.stride == 0 {
            return Err(Error::InvalidConfig("stride: must be >= 1".into()));
        }
        self.dqn
            .validate()
            .map_err(|e| Error::InvalidConfig(format!("dqn: {e}")))?;
        if let Some(conv) = &self.conv_dqn {
            conv.validate()
                .map_err(|e| Error::InvalidConfig(format!("conv_dqn: {e}")))?;
        }
        if self.policies.is_empty() {
            return Err(Error::InvalidConfig("policies: must not be empty".into()));
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_reader(File::open(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Deterministic per-stream seed derivation (FNV-1a over the tag, mixed
/// with the base seed) so environment draws pair across policies while
/// policy-side streams stay independent.
pub fn derive_seed(base: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ base.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// End-of-phase aggregates for one policy.
#[derive(Debug, Clone, Serialize)]
pub struct PhaseSummary {
    pub name: String,
    pub steps: u64,
    pub mean_utility: f64,
    pub mean_objective: f64,
    /// Trailing-window mean of the objective (window capped at the phase
    /// length).
    pub trailing_mean_objective: f64,
    /// Trailing-window per-item mean constraint utilities (rates, Mbps);
    /// empty for unconstrained environments.
    pub trailing_per_item_means: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct PolicySummary {
    pub phases: Vec<PhaseSummary>,
}

pub struct ScenarioOutcome {
    pub per_policy: BTreeMap<PolicyKind, PolicySummary>,
    /// The trained descriptive agent, when the roster included it.
    pub descriptive_agent: Option<DescriptiveAgent>,
}

enum Driver {
    Descriptive(DescriptiveAgent),
    /// Rebuilt at each phase boundary, sized to the current system.
    Conventional {
        cfg: DqnConfig,
        seed: u64,
        agent: Option<ConventionalAgent>,
    },
    Oracle {
        exponent: f64,
    },
    Random(RandomPolicy),
}

impl Driver {
    fn begin_phase(
        &mut self,
        phase_idx: usize,
        phase: &PhaseConfig,
        env: &dyn ScheduleEnv,
    ) -> Result<()> {
        match self {
            Driver::Descriptive(agent) => {
                if phase.freeze_descriptive {
                    agent.freeze();
                } else {
                    agent.unfreeze();
                }
                Ok(())
            }
            Driver::Conventional { cfg, seed, agent } => {
                let phase_seed = derive_seed(*seed, &format!("conv-phase-{phase_idx}"));
                *agent = Some(ConventionalAgent::for_env(env, cfg.clone(), phase_seed)?);
                Ok(())
            }
            Driver::Oracle { exponent } => {
                *exponent = match &phase.env {
                    EnvSpec::ItemSale(cfg) => cfg.reward_exponent,
                    EnvSpec::Wireless(_) => {
                        return Err(Error::InvalidConfig(
                            "oracle policy is only defined for item-sale environments".into(),
                        ))
                    }
                };
                Ok(())
            }
            Driver::Random(_) => Ok(()),
        }
    }

    fn step(&mut self, env: &mut dyn ScheduleEnv) -> Result<crate::env::StepOutcome> {
        match self {
            Driver::Descriptive(agent) => agent.step(env),
            Driver::Conventional { agent, .. } => {
                agent.as_mut().expect("phase not begun").step(env)
            }
            Driver::Oracle { exponent } => {
                let action = greedy_oracle(env.state(), *exponent);
                env.step(&action)
            }
            Driver::Random(policy) => policy.step(env),
        }
    }

    fn epsilon(&self) -> Option<f64> {
        match self {
            Driver::Descriptive(agent) => Some(agent.core.epsilon()),
            Driver::Conventional { agent, .. } => agent.as_ref().map(|a| a.core.epsilon()),
            _ => None,
        }
    }

    fn loss(&self) -> Option<f64> {
        match self {
            Driver::Descriptive(agent) => agent.core.last_loss,
            Driver::Conventional { agent, .. } => agent.as_ref().and_then(|a| a.core.last_loss),
            _ => None,
        }
    }
}

struct TrailingWindow {
    cap: usize,
    values: VecDeque<f64>,
    sum: f64,
}

impl TrailingWindow {
    fn new(cap: usize) -> Self {
        TrailingWindow {
            cap,
            values: VecDeque::with_capacity(cap.min(1 << 20)),
            sum: 0.0,
        }
    }

    fn push(&mut self, v: f64) {
        if self.values.len() == self.cap {
            self.sum -= self.values.pop_front().unwrap();
        }
        self.values.push_back(v);
        self.sum += v;
    }

    fn mean(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.sum / self.values.len() as f64
        }
    }
}

/// Run every policy in the roster through all phases on paired environment
/// streams. When `out_dir` is set, writes one CSV per policy, a `meta.json`,
/// and a final descriptive-agent checkpoint.
pub fn run_scenario(cfg: &ScenarioConfig, out_dir: Option<&Path>) -> Result<ScenarioOutcome> {
    cfg.validate()?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
    }

    let mut per_policy = BTreeMap::new();
    let mut descriptive_agent = None;

    for &kind in &cfg.policies {
        let mut driver = match kind {
            PolicyKind::Descriptive => Driver::Descriptive(DescriptiveAgent::new(
                cfg.scheme.clone(),
                cfg.decision_sets.clone(),
                cfg.dqn.clone(),
                derive_seed(cfg.seed, "desc-policy"),
            )?),
            PolicyKind::Conventional => Driver::Conventional {
                cfg: cfg.conv_dqn.clone().unwrap_or_else(|| cfg.dqn.clone()),
                seed: derive_seed(cfg.seed, "conv-policy"),
                agent: None,
            },
            PolicyKind::Oracle => Driver::Oracle { exponent: 1.0 },
            PolicyKind::Random => {
                Driver::Random(RandomPolicy::new(derive_seed(cfg.seed, "random-policy")))
            }
        };

        let mut writer = match out_dir {
            Some(dir) => Some(open_metric_csv(
                &dir.join(format!("{}.csv", kind.label())),
                cfg.stride,
                cfg.window,
            )?),
            None => None,
        };

        let mut summary = PolicySummary::default();
        for (phase_idx, phase) in cfg.phases.iter().enumerate() {
            // same env seed for every policy: paired comparison
            let env_seed = derive_seed(cfg.seed, &format!("env-phase-{phase_idx}"));
            let mut env = phase.env.build(env_seed)?;
            driver.begin_phase(phase_idx, phase, env.as_ref())?;

            let mut window = TrailingWindow::new(cfg.window);
            let mut trailing_obj = TrailingWindow::new(cfg.trailing_window as usize);
            let mut trailing_items: Vec<TrailingWindow> = Vec::new();
            let mut sum_utility = 0.0;
            let mut sum_objective = 0.0;

            for t in 1..=phase.steps {
                let epsilon = driver.epsilon();
                let outcome = driver.step(env.as_mut())?;
                sum_utility += outcome.utility;
                sum_objective += outcome.objective_value;
                window.push(outcome.utility);
                trailing_obj.push(outcome.objective_value);
                if !outcome.per_item.is_empty() {
                    if trailing_items.is_empty() {
                        trailing_items = (0..outcome.per_item.len())
                            .map(|_| TrailingWindow::new(cfg.trailing_window as usize))
                            .collect();
                    }
                    for (w, &v) in trailing_items.iter_mut().zip(&outcome.per_item) {
                        w.push(v);
                    }
                }

                if let Some(w) = writer.as_mut() {
                    if t % cfg.stride == 0 || t == phase.steps {
                        let rates = trailing_items
                            .iter()
                            .map(|w| format!("{:.6}", w.mean()))
                            .collect::<Vec<_>>()
                            .join(";");
                        let mus = env
                            .multipliers()
                            .iter()
                            .map(|m| format!("{m:.6}"))
                            .collect::<Vec<_>>()
                            .join(";");
                        w.write_record(&[
                            t.to_string(),
                            phase.name.clone(),
                            kind.label().to_string(),
                            format!("{:.9}", outcome.utility),
                            format!("{:.9}", window.mean()),
                            epsilon.map(|e| format!("{e:.6}")).unwrap_or_default(),
                            driver.loss().map(|l| format!("{l:.9}")).unwrap_or_default(),
                            rates,
                            mus,
                        ])?;
                    }
                }
            }

            summary.phases.push(PhaseSummary {
                name: phase.name.clone(),
                steps: phase.steps,
                mean_utility: sum_utility / phase.steps as f64,
                mean_objective: sum_objective / phase.steps as f64,
                trailing_mean_objective: trailing_obj.mean(),
                trailing_per_item_means: trailing_items.iter().map(|w| w.mean()).collect(),
            });
        }

        if let Some(mut w) = writer {
            w.flush()?;
        }
        if let Driver::Descriptive(agent) = driver {
            if let Some(dir) = out_dir {
                agent.save(&dir.join("desc_p_checkpoint.json"))?;
            }
            descriptive_agent = Some(agent);
        }
        per_policy.insert(kind, summary);
    }

    if let Some(dir) = out_dir {
        let meta = serde_json::json!({
            "seed": cfg.seed,
            "stride": cfg.stride,
            "window": cfg.window,
            "trailing_window": cfg.trailing_window,
            "policies": cfg.policies.iter().map(|p| p.label()).collect::<Vec<_>>(),
            "phases": cfg.phases.iter().map(|p| serde_json::json!({
                "name": p.name,
                "steps": p.steps,
                "freeze_descriptive": p.freeze_descriptive,
            })).collect::<Vec<_>>(),
        });
        let mut f = File::create(dir.join("meta.json"))?;
        serde_json::to_writer_pretty(&mut f, &meta)?;
        f.write_all(b"\n")?;
    }

    Ok(ScenarioOutcome {
        per_policy,
        descriptive_agent,
    })
}

fn open_metric_csv(path: &Path, stride: u64, window: usize) -> Result<csv::Writer<File>> {
    let mut file = File::create(path)?;
    // recorded in-file so a CSV alone is self-describing
    writeln!(file, "# stride={stride} window={window}")?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record([
        "timestep",
        "phase",
        "policy",
        "utility",
        "window_avg_utility",
        "epsilon",
        "loss",
        "trailing_per_item",
        "multipliers",
    ])?;
    Ok(w)
}

/// One Q value per condition of the probe state: the max over auxiliary
/// decisions for maximize objectives, the min for minimize objectives;
/// `None` where the probe marks the condition unoccupied.
pub fn q_heatmap(
    params: &QNetworkParams,
    probe: &crate::descriptive::DescriptiveState,
    decision_sets: &[usize],
    objective: Objective,
) -> Result<Vec<Option<f64>>> {
    let q = params.forward(&probe.flatten())?;
    let m_total: usize = decision_sets.iter().product::<usize>().max(1);
    if q.len() != probe.len() * m_total {
        return Err(Error::ShapeMismatch(format!(
            "network output {} does not cover {} conditions x {} decisions",
            q.len(),
            probe.len(),
            m_total
        )));
    }
    Ok((0..probe.len())
        .map(|h| {
            if !probe.get_flat(h) {
                return None;
            }
            let cell = &q[h * m_total..(h + 1) * m_total];
            let reduced = match objective {
                Objective::Maximize => cell.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                Objective::Minimize => cell.iter().cloned().fold(f64::INFINITY, f64::min),
            };
            Some(reduced)
        })
        .collect())
}

/// Condition index of the best heatmap cell under the objective.
pub fn heatmap_argbest(
    grid: &[Option<f64>],
    shape: &[usize],
    objective: Objective,
) -> Option<Condition> {
    let mut best: Option<(usize, f64)> = None;
    for (h, v) in grid.iter().enumerate() {
        if let Some(v) = *v {
            let better = match (&best, objective) {
                (None, _) => true,
                (Some((_, b)), Objective::Maximize) => v > *b,
                (Some((_, b)), Objective::Minimize) => v < *b,
            };
            if better {
                best = Some((h, v));
            }
        }
    }
    best.map(|(h, _)| Condition::from_flat(h, shape))
}

/// Write the heatmap as a CSV (one row per condition) and, for two-feature
/// schemes, a standalone SVG grid shaded by value.
pub fn emit_q_heatmap(
    params: &QNetworkParams,
    probe: &crate::descriptive::DescriptiveState,
    scheme: &PartitionScheme,
    decision_sets: &[usize],
    objective: Objective,
    out_prefix: &Path,
) -> Result<Vec<Option<f64>>> {
    let grid = q_heatmap(params, probe, decision_sets, objective)?;
    let shape = scheme.shape();

    let csv_path = out_prefix.with_extension("csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    let mut header: Vec<String> = (0..shape.len()).map(|k| format!("h{}", k + 1)).collect();
    header.push("q".into());
    w.write_record(&header)?;
    for (h, v) in grid.iter().enumerate() {
        let cond = Condition::from_flat(h, &shape);
        let mut row: Vec<String> = cond.0.iter().map(|b| b.to_string()).collect();
        row.push(v.map(|v| format!("{v:.9}")).unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;

    if shape.len() == 2 {
        write_heatmap_svg(&grid, &shape, &out_prefix.with_extension("svg"))?;
    }
    Ok(grid)
}

fn write_heatmap_svg(grid: &[Option<f64>], shape: &[usize], path: &Path) -> Result<()> {
    let (rows, cols) = (shape[0], shape[1]);
    let cell = 40usize;
    let (lo, hi) = grid
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\">\n",
        cols * cell,
        rows * cell
    ));
    for r in 0..rows {
        for c in 0..cols {
            let v = grid[r * cols + c];
            let fill = match v {
                // dark = low, light = high
                Some(v) => {
                    let shade = (255.0 * (v - lo) / span).round() as u8;
                    format!("rgb({shade},{shade},{shade})")
                }
                None => "none".to_string(),
            };
            svg.push_str(&format!(
                "<rect x=\"{}\" y=\"{}\" width=\"{cell}\" height=\"{cell}\" \
                 fill=\"{fill}\" stroke=\"black\"/>\n",
                c * cell,
                // row 1 at the bottom, matching axis convention
                (rows - 1 - r) * cell,
            ));
        }
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub label: String,
    pub per_seed: Vec<f64>,
    pub mean: f64,
    pub std_err: f64,
}

/// Run the base scenario once per (partition, seed) pair, sharing seeds
/// across partitions, and report the final-phase mean utility of the
/// descriptive policy.
pub fn fineness_sweep(
    base: &ScenarioConfig,
    settings: &[(String, PartitionScheme)],
    seeds: &[u64],
) -> Result<Vec<SweepRow>> {
    if settings.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidConfig(
            "sweep needs at least one partition and one seed".into(),
        ));
    }
    let mut rows = Vec::with_capacity(settings.len());
    for (label, scheme) in settings {
        let mut per_seed = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let mut cfg = base.clone();
            cfg.scheme = scheme.clone();
            cfg.seed = seed;
            cfg.policies = vec![PolicyKind::Descriptive];
            let outcome = run_scenario(&cfg, None)?;
            let summary = &outcome.per_policy[&PolicyKind::Descriptive];
            per_seed.push(summary.phases.last().unwrap().mean_utility);
        }
        let mean = per_seed.iter().sum::<f64>() / per_seed.len() as f64;
        let var = per_seed.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
            / (per_seed.len().max(2) - 1) as f64;
        let std_err = (var / per_seed.len() as f64).sqrt();
        rows.push(SweepRow {
            label: label.clone(),
            per_seed,
            mean,
            std_err,
        });
    }
    Ok(rows)
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["partition", "mean_utility", "std_err", "per_seed"])?;
    for row in rows {
        w.write_record(&[
            row.label.clone(),
            format!("{:.9}", row.mean),
            format!("{:.9}", row.std_err),
            row.per_seed
                .iter()
                .map(|v| format!("{v:.9}"))
                .collect::<Vec<_>>()
                .join(";"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// The standard item-sale partition: |p| uniform price bins and quantity
/// groups given as subsets of {0..4}.
pub fn item_sale_scheme(
    price_bins: usize,
    quantity_groups: Vec<Vec<f64>>,
) -> Result<PartitionScheme> {
    PartitionScheme::new(vec![
        crate::partition::FeaturePartition::Uniform(price_bins),
        crate::partition::FeaturePartition::DiscreteGroups(quantity_groups),
    ])
}

/// Quantity singletons {0},...,{4}: the full-fineness |g| = 5 grouping.
pub fn quantity_singletons() -> Vec<Vec<f64>> {
    (0..5).map(|g| vec![g as f64]).collect()
}

/// Probe state with every condition occupied, for heatmap export.
pub fn all_ones_probe(scheme: &PartitionScheme) -> crate::descriptive::DescriptiveState {
    crate::descriptive::DescriptiveState::unflatten(
        scheme.shape(),
        &vec![1.0; scheme.num_conditions()],
    )
    .expect("all-ones vector is binary")
}
