//! End-to-end runs: split, train a variant, evaluate, ablate, sweep.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{evaluate, split_dataset, EvalReport, Evaluation, Partition, Split, SplitSpec, Variant};
use crate::hin::{InteractionStore, PathSpec};
use crate::io::{micro_bundle, sig6};
use crate::model::{
    group_batch, user_batch, AggregatorKind, Branches, ModelInputs, ModelParams, ModelSpec, TargetMode,
    WeightObserver,
};
use crate::nn::{grad_check, GradCheckReport, Tensor};
use crate::train::{
    model_spec, stage_rng, train_stage1, train_stage2, TrainConfig, TrainState, BATCH_GRID, DECAY_GRID, DIM_GRID,
    LR_GRID,
};

fn default_paths() -> Vec<String> {
    vec!["P1".into(), "PP1".into()]
}

fn default_depth() -> usize {
    1
}

/// Everything a run needs besides the data. Flags on the command line
/// override file values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub train: TrainConfig,
    #[serde(default)]
    pub split: SplitSpec,
    /// Dataset directory (TSV files) or prepared directory (`store.json`).
    #[serde(default)]
    pub data: Option<PathBuf>,
    /// Output directory for checkpoints and reports.
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Active path labels (`P1`, `PP1`, `P2`, …).
    #[serde(default = "default_paths")]
    pub path_labels: Vec<String>,
    /// Dependency closure depth for multi-hop interactions.
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default)]
    pub targets: TargetMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            split: SplitSpec::default(),
            data: None,
            out: None,
            path_labels: default_paths(),
            depth: 1,
            variant: Variant::Full,
            targets: TargetMode::Merged,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.split.validate()?;
        if self.depth == 0 {
            return Err(Error::Config("depth must be at least 1".into()));
        }
        self.path_specs()?;
        Ok(())
    }

    pub fn path_specs(&self) -> Result<Vec<PathSpec>> {
        if self.path_labels.is_empty() {
            return Err(Error::Config("at least one path label is required".into()));
        }
        self.path_labels
            .iter()
            .map(|l| PathSpec::standard(l).map_err(|e| Error::Config(e.to_string())))
            .collect()
    }

    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// A split training store with cached path incidence.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub store: InteractionStore,
    pub split: Split,
    pub specs: Vec<PathSpec>,
}

impl Experiment {
    /// Re-derives multi-hop matrices at the configured depth, splits, and
    /// indexes the configured paths on the training store.
    pub fn prepare(full: &InteractionStore, cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        for w in cfg.train.off_grid() {
            warn!("{w} is outside the tuning grid");
        }
        let mut base = full.clone();
        if base.depth != cfg.depth {
            base.derive_multi_hop(cfg.depth)?;
        }
        let (mut store, split) = split_dataset(&base, &cfg.split)?;
        let specs = cfg.path_specs()?;
        store.index_paths(&specs)?;
        Ok(Self { store, split, specs })
    }

    pub fn inputs(&self, targets: TargetMode) -> Result<ModelInputs> {
        ModelInputs::from_store(&self.store, &self.specs, targets)
    }
}

/// Which training stages a call runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stages {
    First,
    Second,
    Both,
}

impl FromStr for Stages {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(Self::First),
            "2" => Ok(Self::Second),
            "both" => Ok(Self::Both),
            other => Err(Error::Config(format!("unknown stage `{other}` (expected 1, 2 or both)"))),
        }
    }
}

/// Fresh training state for `variant`.
pub fn init_state(inputs: &ModelInputs, cfg: &TrainConfig, variant: Variant) -> Result<TrainState> {
    let cfg = variant.train_config(cfg);
    TrainState::new(model_spec(&cfg, inputs, variant.branches()), &cfg)
}

/// Runs the requested stages on `state`. Stage 1 is a no-op for variants
/// without user pre-training.
pub fn run_stages(
    state: &mut TrainState,
    inputs: &ModelInputs,
    cfg: &TrainConfig,
    variant: Variant,
    stages: Stages,
    obs: Option<&dyn WeightObserver>,
) -> Result<()> {
    let cfg = variant.train_config(cfg);
    if stages != Stages::Second {
        if variant.skips_pretraining() {
            info!("{variant}: skipping user pre-training");
        } else {
            train_stage1(state, inputs, &cfg, obs)?;
        }
    }
    if stages != Stages::First {
        train_stage2(state, inputs, &cfg, obs)?;
    }
    Ok(())
}

/// Training result and evaluation of one variant.
#[derive(Clone, Debug)]
pub struct VariantRun {
    pub variant: Variant,
    pub state: TrainState,
    pub evaluation: Evaluation,
}

pub fn run_variant(
    exp: &Experiment,
    cfg: &RunConfig,
    variant: Variant,
    partition: Partition,
    ns: &[usize],
    obs: Option<&dyn WeightObserver>,
) -> Result<VariantRun> {
    let inputs = exp.inputs(variant.target_mode(cfg.targets))?;
    run_on_inputs(exp, &inputs, cfg, variant, partition, ns, obs)
}

/// Like [`run_variant`] with caller-supplied model inputs (e.g. to train a
/// variant on a different target mode).
pub fn run_on_inputs(
    exp: &Experiment,
    inputs: &ModelInputs,
    cfg: &RunConfig,
    variant: Variant,
    partition: Partition,
    ns: &[usize],
    obs: Option<&dyn WeightObserver>,
) -> Result<VariantRun> {
    let mut state = init_state(inputs, &cfg.train, variant)?;
    run_stages(&mut state, inputs, &cfg.train, variant, Stages::Both, obs)?;
    let evaluation = evaluate(
        &state.params,
        inputs,
        &exp.split.instances(partition),
        ns,
        variant.label(),
    )?;
    info!("{variant}: {:?}", evaluation.report.hr);
    Ok(VariantRun {
        variant,
        state,
        evaluation,
    })
}

/// Every variant under the same seed and split.
pub fn ablation(
    exp: &Experiment,
    cfg: &RunConfig,
    variants: &[Variant],
    partition: Partition,
    ns: &[usize],
) -> Result<Vec<VariantRun>> {
    variants
        .iter()
        .map(|&v| run_variant(exp, cfg, v, partition, ns, None))
        .collect()
}

/// Hyperparameter grids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grid {
    Lr,
    Dim,
    Batch,
    Decay,
}

impl FromStr for Grid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lr" => Ok(Self::Lr),
            "dim" => Ok(Self::Dim),
            "batch" => Ok(Self::Batch),
            "decay" => Ok(Self::Decay),
            other => Err(Error::Config(format!("unknown grid `{other}` (expected lr, dim, batch or decay)"))),
        }
    }
}

impl Grid {
    pub fn label(self) -> &'static str {
        match self {
            Grid::Lr => "learning_rate",
            Grid::Dim => "dim",
            Grid::Batch => "batch_size",
            Grid::Decay => "weight_decay",
        }
    }

    pub fn points(self) -> Vec<f64> {
        match self {
            Grid::Lr => LR_GRID.to_vec(),
            Grid::Dim => DIM_GRID.iter().map(|&d| d as f64).collect(),
            Grid::Batch => BATCH_GRID.iter().map(|&b| b as f64).collect(),
            Grid::Decay => DECAY_GRID.to_vec(),
        }
    }

    /// `base` with this grid's parameter set to `value`.
    pub fn apply(self, base: &TrainConfig, value: f64) -> TrainConfig {
        let mut cfg = base.clone();
        match self {
            Grid::Lr => cfg.learning_rate = value,
            Grid::Dim => cfg.dim = value as usize,
            Grid::Batch => cfg.batch_size = value as usize,
            Grid::Decay => cfg.weight_decay = value,
        }
        cfg
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub parameter: String,
    pub value: f64,
    pub report: EvalReport,
}

/// Trains and evaluates the configured variant at every point of `values`,
/// all other settings held fixed.
pub fn sweep(
    exp: &Experiment,
    cfg: &RunConfig,
    grid: Grid,
    values: &[f64],
    partition: Partition,
    ns: &[usize],
) -> Result<Vec<SweepPoint>> {
    let mut out = Vec::with_capacity(values.len());
    for &value in values {
        let mut point = cfg.clone();
        point.train = grid.apply(&cfg.train, value);
        let run = run_variant(exp, &point, cfg.variant, partition, ns, None)?;
        out.push(SweepPoint {
            parameter: grid.label().to_owned(),
            value,
            report: run.evaluation.report,
        });
    }
    Ok(out)
}

/// `parameter,value,metric,N,score` rows, one per point, metric and cutoff.
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("parameter,value,metric,N,score\n");
    for p in points {
        for (metric, values) in [("HR", &p.report.hr), ("NDCG", &p.report.ndcg)] {
            for (n, v) in values {
                let _ = writeln!(out, "{},{},{metric},{n},{}", p.parameter, sig6(p.value), sig6(*v));
            }
        }
    }
    out
}

/// Gradient check of both losses on the micro-instance
/// (3 users, 4 items, 2 groups, paths `P1` + `PP1`, F = 5).
#[derive(Clone, Debug, Serialize)]
pub struct MicroCheck {
    pub seed: u64,
    pub user: GradCheckReport,
    pub group: GradCheckReport,
}

impl MicroCheck {
    pub fn passed(&self) -> bool {
        self.user.passed() && self.group.passed()
    }

    pub fn max_rel_error(&self) -> f64 {
        self.user.max_rel_error().max(self.group.max_rel_error())
    }

    pub fn mixed_violations(&self, abs_floor: f64) -> usize {
        self.user.mixed_violations(abs_floor) + self.group.mixed_violations(abs_floor)
    }
}

/// Runs the micro-instance check. `corrupt` adds 0.1 to the first analytic
/// entry of `fuse.W` in both losses, which the check must flag.
pub fn micro_grad_check(
    seed: u64,
    aggregator: AggregatorKind,
    h: f64,
    tol: f64,
    corrupt: bool,
) -> Result<MicroCheck> {
    let store = micro_bundle().build_store(1)?;
    let specs = [PathSpec::standard("P1")?, PathSpec::standard("PP1")?];
    let inputs = ModelInputs::from_store(&store, &specs, TargetMode::Merged)?;
    let spec = ModelSpec {
        dim: 5,
        n_users: inputs.n_users,
        n_items: inputs.n_items,
        explicit_paths: inputs.explicit_labels.clone(),
        implicit_paths: inputs.implicit_labels.clone(),
        aggregator,
        branches: Branches::default(),
    };
    let mut params = ModelParams::init(spec, &mut stage_rng(seed, 0))?;
    let users: Vec<usize> = (0..inputs.n_users).collect();
    let groups: Vec<usize> = (0..inputs.n_groups()).collect();
    let fuse = params
        .params
        .iter()
        .position(|p| p.name == "fuse.W")
        .expect("fuse.W exists");
    let tamper = |mut a: Vec<Tensor>| {
        if corrupt {
            a[fuse].data_mut()[0] += 0.1;
        }
        a
    };

    let (_, g) = user_batch(&params, &inputs, &users, None);
    let analytic = tamper(g.to_dense(&params));
    let user = grad_check(&mut params, &analytic, |p| user_batch(p, &inputs, &users, None).0, h, tol);

    let (_, g) = group_batch(&params, &inputs, &groups, None, None)?;
    let analytic = tamper(g.to_dense(&params));
    let group = grad_check(
        &mut params,
        &analytic,
        |p| group_batch(p, &inputs, &groups, None, None).map(|r| r.0).unwrap_or(f64::NAN),
        h,
        tol,
    );
    Ok(MicroCheck { seed, user, group })
}
