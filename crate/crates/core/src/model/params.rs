use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{glorot_uniform, ParamSet, Parameter, Tensor};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregatorKind {
    #[default]
    Attention,
    Meanpool,
}

/// Which preference branches feed the gate. A disabled branch contributes a
/// zero path-preference vector; its MLP still runs on `[p_u, 0]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Branches {
    pub explicit: bool,
    pub implicit: bool,
}

impl Default for Branches {
    fn default() -> Self {
        Self {
            explicit: true,
            implicit: true,
        }
    }
}

/// Structural description of a model; together with the store counts it
/// determines every parameter shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub dim: usize,
    pub n_users: usize,
    pub n_items: usize,
    pub explicit_paths: Vec<String>,
    pub implicit_paths: Vec<String>,
    pub aggregator: AggregatorKind,
    pub branches: Branches,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AttnIdx {
    pub w: usize,
    pub b: usize,
    pub h: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MlpIdx {
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AggIdx {
    pub w: usize,
    pub b: usize,
    pub mlp: MlpIdx,
    pub h: usize,
}

/// Indices into the flat parameter list. Everything before `n_user_params`
/// belongs to the user-level set, the rest to the group-level set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub w_u: usize,
    pub b_u: usize,
    pub w_v: usize,
    pub b_v: usize,
    pub explicit: Vec<AttnIdx>,
    pub implicit: Vec<AttnIdx>,
    pub mlp_p: MlpIdx,
    pub mlp_pp: MlpIdx,
    pub w_fuse: usize,
    pub b_fuse: usize,
    pub pred_u: usize,
    pub out_w: usize,
    pub out_b: usize,
    pub n_user_params: usize,
    pub agg: Option<AggIdx>,
    pub pred_g: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    User,
    Group,
}

struct Builder {
    shapes: Vec<(String, Vec<usize>, bool)>,
}

impl Builder {
    fn push(&mut self, name: String, shape: &[usize], zero: bool) -> usize {
        self.shapes.push((name, shape.to_vec(), zero));
        self.shapes.len() - 1
    }

    fn attn(&mut self, label: &str, f: usize) -> AttnIdx {
        AttnIdx {
            w: self.push(format!("attn.{label}.W"), &[f, 2 * f], false),
            b: self.push(format!("attn.{label}.b"), &[f], true),
            h: self.push(format!("attn.{label}.h"), &[f], false),
        }
    }

    fn mlp(&mut self, prefix: &str, f: usize, input: usize) -> MlpIdx {
        MlpIdx {
            w1: self.push(format!("{prefix}.W1"), &[f, input], false),
            b1: self.push(format!("{prefix}.b1"), &[f], true),
            w2: self.push(format!("{prefix}.W2"), &[f, f], false),
            b2: self.push(format!("{prefix}.b2"), &[f], true),
        }
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        if self.n_users == 0 || self.n_items == 0 {
            return Err(Error::Config("model needs at least one user and one item".into()));
        }
        Ok(())
    }

    fn build(&self) -> (Layout, Vec<(String, Vec<usize>, bool)>) {
        let f = self.dim;
        let mut b = Builder { shapes: Vec::new() };
        let w_u = b.push("emb.W_u".into(), &[f, self.n_items], false);
        let b_u = b.push("emb.b_u".into(), &[f], true);
        let w_v = b.push("emb.W_v".into(), &[f, self.n_users], false);
        let b_v = b.push("emb.b_v".into(), &[f], true);
        let explicit = self.explicit_paths.iter().map(|l| b.attn(l, f)).collect();
        let implicit = self.implicit_paths.iter().map(|l| b.attn(l, f)).collect();
        let mlp_p = b.mlp("mlp_P", f, 2 * f);
        let mlp_pp = b.mlp("mlp_PP", f, 2 * f);
        let w_fuse = b.push("fuse.W".into(), &[f, f], false);
        let b_fuse = b.push("fuse.b".into(), &[f], true);
        let pred_u = b.push("pred.W_u".into(), &[f, f], false);
        let out_w = b.push("out.W".into(), &[self.n_items, f], false);
        let out_b = b.push("out.b".into(), &[self.n_items], true);
        let n_user_params = b.shapes.len();
        let agg = match self.aggregator {
            AggregatorKind::Meanpool => None,
            AggregatorKind::Attention => Some(AggIdx {
                w: b.push("agg.W".into(), &[f, f], false),
                b: b.push("agg.b".into(), &[f], true),
                mlp: b.mlp("agg.mlp", f, f),
                h: b.push("agg.h".into(), &[f], false),
            }),
        };
        let pred_g = b.push("pred.W_g".into(), &[f, f], false);
        let layout = Layout {
            w_u,
            b_u,
            w_v,
            b_v,
            explicit,
            implicit,
            mlp_p,
            mlp_pp,
            w_fuse,
            b_fuse,
            pred_u,
            out_w,
            out_b,
            n_user_params,
            agg,
            pred_g,
        };
        (layout, b.shapes)
    }
}

/// Every learned tensor of the model, stored flat with a [`Layout`] index.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub spec: ModelSpec,
    pub layout: Layout,
    pub params: Vec<Parameter>,
}

impl ModelParams {
    /// Glorot-uniform weights and zero biases, drawn in layout order.
    pub fn init<R: Rng + ?Sized>(spec: ModelSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let (layout, shapes) = spec.build();
        let params = shapes
            .into_iter()
            .map(|(name, shape, zero)| {
                let value = if zero {
                    Tensor::zeros(&shape)
                } else {
                    glorot_uniform(&shape, rng)
                };
                Parameter::new(name, value)
            })
            .collect();
        Ok(Self { spec, layout, params })
    }

    /// Rebuilds a parameter set from named tensors (e.g. a checkpoint).
    pub fn from_parts(spec: ModelSpec, params: Vec<Parameter>) -> Result<Self> {
        spec.validate()?;
        let (layout, shapes) = spec.build();
        if shapes.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                shapes.len(),
                params.len()
            )));
        }
        for ((name, shape, _), p) in shapes.iter().zip(&params) {
            if *name != p.name || shape.as_slice() != p.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor `{}` {:?} does not match expected `{}` {:?}",
                    p.name,
                    p.shape(),
                    name,
                    shape
                )));
            }
        }
        Ok(Self { spec, layout, params })
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn role(&self, k: usize) -> Role {
        if k < self.layout.n_user_params {
            Role::User
        } else {
            Role::Group
        }
    }

    pub fn indices(&self, role: Role) -> std::ops::Range<usize> {
        match role {
            Role::User => 0..self.layout.n_user_params,
            Role::Group => self.layout.n_user_params..self.params.len(),
        }
    }

    pub fn value(&self, k: usize) -> &Tensor {
        &self.params[k].value
    }

    /// Number of scalar parameters in the aggregator (zero for meanpool).
    pub fn aggregator_param_count(&self) -> usize {
        match self.layout.agg {
            None => 0,
            Some(a) => [a.w, a.b, a.mlp.w1, a.mlp.b1, a.mlp.w2, a.mlp.b2, a.h]
                .iter()
                .map(|&k| self.params[k].value.len())
                .sum(),
        }
    }

    pub fn zero_grads(&mut self) {
        self.params.iter_mut().for_each(Parameter::zero_grad);
    }
}

impl ParamSet for ModelParams {
    fn params(&self) -> &[Parameter] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [Parameter] {
        &mut self.params
    }
}

/// Sparse-by-tensor gradient buffer aligned with a parameter list; tensors
/// are allocated on first touch.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Grads {
    slots: Vec<Option<Tensor>>,
}

impl Grads {
    pub fn new(n: usize) -> Self {
        Self { slots: vec![None; n] }
    }

    pub fn slot(&mut self, params: &ModelParams, k: usize) -> &mut Tensor {
        self.slots[k].get_or_insert_with(|| Tensor::zeros(params.params[k].shape()))
    }

    pub fn get(&self, k: usize) -> Option<&Tensor> {
        self.slots[k].as_ref()
    }

    /// `self += other`, slot by slot.
    pub fn add(&mut self, other: &Grads) {
        for (a, b) in self.slots.iter_mut().zip(&other.slots) {
            if let Some(b) = b {
                match a {
                    Some(a) => a.axpy(1.0, b),
                    None => *a = Some(b.clone()),
                }
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.slots.iter_mut().flatten() {
            t.data_mut().iter_mut().for_each(|x| *x *= s);
        }
    }

    /// Dense tensors for every parameter (zeros where untouched).
    pub fn to_dense(&self, params: &ModelParams) -> Vec<Tensor> {
        self.slots
            .iter()
            .zip(&params.params)
            .map(|(s, p)| s.clone().unwrap_or_else(|| Tensor::zeros(p.shape())))
            .collect()
    }
}
