//! User and group losses and the two-stage optimisation loop.

use std::time::Instant;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    group_batch, user_batch, user_hats, AggregatorKind, Branches, ModelInputs, ModelParams, ModelSpec, Role,
    WeightObserver,
};
use crate::nn::{adam_step, AdamConfig};

/// Grid values listed for each tunable; other values are accepted with a warning.
pub const LR_GRID: [f64; 7] = [0.00005, 0.0001, 0.0005, 0.001, 0.005, 0.01, 0.05];
pub const DIM_GRID: [usize; 6] = [32, 64, 128, 256, 512, 1024];
pub const BATCH_GRID: [usize; 6] = [32, 64, 128, 256, 512, 1024];
pub const DECAY_GRID: [f64; 5] = [0.0, 0.001, 0.005, 0.01, 0.05];

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

fn default_epsilon() -> f64 {
    1e-8
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Stage-2 learning rate.
    pub learning_rate: f64,
    /// Stage-1 (user pre-training) learning rate.
    pub pretrain_lr: f64,
    pub dim: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub epochs: usize,
    pub seed: u64,
    #[serde(default = "default_true")]
    pub freeze_user_in_stage2: bool,
    #[serde(default)]
    pub aggregator: AggregatorKind,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.005,
            pretrain_lr: 0.01,
            dim: 32,
            batch_size: 32,
            weight_decay: 0.0,
            epochs: 50,
            seed: 0,
            freeze_user_in_stage2: true,
            aggregator: AggregatorKind::Attention,
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_epsilon(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("dim must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        self.adam(self.learning_rate).validate()?;
        self.adam(self.pretrain_lr).validate()?;
        Ok(())
    }

    /// Values outside the tuning grids (informational only).
    pub fn off_grid(&self) -> Vec<String> {
        let mut out = Vec::new();
        let near = |grid: &[f64], x: f64| grid.iter().any(|g| (g - x).abs() <= 1e-12 * g.abs().max(1.0));
        if !near(&LR_GRID, self.learning_rate) {
            out.push(format!("learning_rate {:?}", self.learning_rate));
        }
        if !DIM_GRID.contains(&self.dim) {
            out.push(format!("dim {}", self.dim));
        }
        if !BATCH_GRID.contains(&self.batch_size) {
            out.push(format!("batch_size {}", self.batch_size));
        }
        if !near(&DECAY_GRID, self.weight_decay) {
            out.push(format!("weight_decay {:?}", self.weight_decay));
        }
        out
    }

    pub fn adam(&self, lr: f64) -> AdamConfig {
        AdamConfig {
            learning_rate: lr,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            weight_decay: self.weight_decay,
        }
    }
}

/// How far training has progressed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Initialized,
    Pretrained,
    Trained,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub stage: u8,
    pub epoch: usize,
    pub loss: f64,
}

/// Parameters, Adam moments (inside each parameter), and per-epoch history.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub params: ModelParams,
    pub stage: Stage,
    pub history: Vec<EpochLoss>,
    /// Wall-clock seconds per history entry; not part of checkpoints.
    pub wall_secs: Vec<f64>,
    /// Optimisation steps taken in each stage.
    pub steps: [u64; 2],
}

/// Independent ChaCha stream per purpose: 0 initialisation, 1 stage 1, 2 stage 2.
pub fn stage_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Model structure implied by a training config and model inputs.
pub fn model_spec(cfg: &TrainConfig, inputs: &ModelInputs, branches: Branches) -> ModelSpec {
    ModelSpec {
        dim: cfg.dim,
        n_users: inputs.n_users,
        n_items: inputs.n_items,
        explicit_paths: inputs.explicit_labels.clone(),
        implicit_paths: inputs.implicit_labels.clone(),
        aggregator: cfg.aggregator,
        branches,
    }
}

impl TrainState {
    pub fn new(spec: ModelSpec, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let params = ModelParams::init(spec, &mut stage_rng(cfg.seed, 0))?;
        Ok(Self {
            params,
            stage: Stage::Initialized,
            history: Vec::new(),
            wall_secs: Vec::new(),
            steps: [0, 0],
        })
    }

    pub fn stage_history(&self, stage: u8) -> Vec<f64> {
        self.history.iter().filter(|e| e.stage == stage).map(|e| e.loss).collect()
    }
}

/// Mean user loss over the given users (no gradient side effects).
pub fn user_loss(params: &ModelParams, inputs: &ModelInputs, users: &[usize]) -> f64 {
    user_batch(params, inputs, users, None).0
}

/// Mean group loss over the given groups with live member preferences.
pub fn group_loss(params: &ModelParams, inputs: &ModelInputs, groups: &[usize]) -> Result<f64> {
    Ok(group_batch(params, inputs, groups, None, None)?.0)
}

/// Users whose merged target row is non-empty.
pub fn trainable_users(inputs: &ModelInputs) -> Vec<usize> {
    (0..inputs.n_users).filter(|&u| !inputs.user_targets.row(u).is_empty()).collect()
}

pub fn trainable_groups(inputs: &ModelInputs) -> Vec<usize> {
    (0..inputs.n_groups()).filter(|&g| !inputs.group_targets.row(g).is_empty()).collect()
}

fn apply(params: &mut ModelParams, grads: &crate::model::Grads, range: std::ops::Range<usize>, adam: &AdamConfig) -> Result<()> {
    for k in range {
        let p = &mut params.params[k];
        match grads.get(k) {
            Some(g) => p.grad.data_mut().copy_from_slice(g.data()),
            None => p.zero_grad(),
        }
        let t = p.steps + 1;
        adam_step(p, adam, t)?;
    }
    Ok(())
}

fn run_epochs<F>(state: &mut TrainState, stage: u8, cfg: &TrainConfig, examples: &[usize], mut step: F) -> Result<()>
where
    F: FnMut(&mut ModelParams, &[usize]) -> Result<f64>,
{
    let mut rng = stage_rng(cfg.seed, stage as u64);
    let mut order = examples.to_vec();
    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let loss = step(&mut state.params, batch)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { stage, epoch, batch: b });
            }
            total += loss * batch.len() as f64;
            state.steps[stage as usize - 1] += 1;
        }
        let loss = if order.is_empty() { 0.0 } else { total / order.len() as f64 };
        debug!("stage {stage} epoch {epoch} loss {loss:.6}");
        state.history.push(EpochLoss { stage, epoch, loss });
        state.wall_secs.push(start.elapsed().as_secs_f64());
    }
    Ok(())
}

/// Optimises the user-level parameters on the user loss at `pretrain_lr`.
pub fn train_stage1(
    state: &mut TrainState,
    inputs: &ModelInputs,
    cfg: &TrainConfig,
    obs: Option<&dyn WeightObserver>,
) -> Result<()> {
    cfg.validate()?;
    let users = trainable_users(inputs);
    let skipped = inputs.n_users - users.len();
    if skipped > 0 {
        info!("stage 1: skipping {skipped} users with empty targets");
    }
    let adam = cfg.adam(cfg.pretrain_lr);
    run_epochs(state, 1, cfg, &users, |params, batch| {
        let (loss, grads) = user_batch(params, inputs, batch, obs);
        if !loss.is_finite() {
            return Ok(loss);
        }
        let range = params.indices(Role::User);
        apply(params, &grads, range, &adam)?;
        Ok(loss)
    })?;
    state.stage = Stage::Pretrained;
    Ok(())
}

/// Optimises the group-level parameters on the group loss. User-level
/// parameters stay fixed unless `freeze_user_in_stage2` is off.
pub fn train_stage2(
    state: &mut TrainState,
    inputs: &ModelInputs,
    cfg: &TrainConfig,
    obs: Option<&dyn WeightObserver>,
) -> Result<()> {
    cfg.validate()?;
    let groups = trainable_groups(inputs);
    let skipped = inputs.n_groups() - groups.len();
    if skipped > 0 {
        info!("stage 2: skipping {skipped} groups with empty targets");
    }
    let adam = cfg.adam(cfg.learning_rate);
    let cached = cfg.freeze_user_in_stage2.then(|| user_hats(&state.params, inputs));
    run_epochs(state, 2, cfg, &groups, |params, batch| {
        let (loss, grads) = group_batch(params, inputs, batch, cached.as_deref(), obs)?;
        if !loss.is_finite() {
            return Ok(loss);
        }
        let range = if cached.is_some() {
            params.indices(Role::Group)
        } else {
            0..params.params.len()
        };
        apply(params, &grads, range, &adam)?;
        Ok(loss)
    })?;
    state.stage = Stage::Trained;
    Ok(())
}

/// Means of consecutive non-overlapping windows of `w` epochs (a trailing
/// partial window is dropped).
pub fn smoothed(history: &[f64], w: usize) -> Vec<f64> {
    history.chunks_exact(w).map(|c| c.iter().sum::<f64>() / w as f64).collect()
}
