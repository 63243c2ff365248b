use rayon::prelude::*;

use super::inputs::ModelInputs;
use super::params::{AttnIdx, Grads, MlpIdx, ModelParams};
use super::{WeightKind, WeightObserver};
use crate::nn::{dot, relu, relu_backward, sigmoid, softmax, softmax_backward, softmax_with_counts, Tensor};

/// `W x̄ + b` for a binary `x̄` given by its support.
pub(crate) fn sparse_affine(w: &Tensor, support: &[u32], b: &[f64]) -> Vec<f64> {
    let mut out = b.to_vec();
    for (r, o) in out.iter_mut().enumerate() {
        let row = w.row(r);
        for &c in support {
            *o += row[c as usize];
        }
    }
    out
}

fn sparse_affine_backward(gw: &mut Tensor, support: &[u32], dz: &[f64]) {
    let cols = gw.cols();
    let data = gw.data_mut();
    for (r, &d) in dz.iter().enumerate() {
        if d != 0.0 {
            for &c in support {
                data[r * cols + c as usize] += d;
            }
        }
    }
}

fn add_into(acc: &mut [f64], x: &[f64]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

/// Item embeddings `q_v = ReLU(W_v q̄_v + b_v)` for every item, with their
/// pre-activations kept for the backward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ItemEmbeddings {
    pub pre: Tensor,
    pub q: Tensor,
}

impl ItemEmbeddings {
    pub fn compute(params: &ModelParams, inputs: &ModelInputs) -> Self {
        let l = &params.layout;
        let f = params.dim();
        let w = params.value(l.w_v);
        let b = params.value(l.b_v).data();
        let pre: Vec<Vec<f64>> = (0..inputs.n_items)
            .into_par_iter()
            .map(|v| sparse_affine(w, inputs.item_cols.row(v), b))
            .collect();
        let pre: Vec<f64> = pre.concat();
        let q = relu(&pre);
        let m = inputs.n_items;
        Self {
            pre: Tensor::from_vec(&[m, f], pre).expect("item block"),
            q: Tensor::from_vec(&[m, f], q).expect("item block"),
        }
    }

    pub fn embedding(&self, v: usize) -> &[f64] {
        self.q.row(v)
    }

    /// Pushes accumulated `∂L/∂q` (one row per item) into `W_v` and `b_v`.
    pub fn backward(&self, params: &ModelParams, inputs: &ModelInputs, dq: &Tensor, grads: &mut Grads) {
        let l = &params.layout;
        for v in 0..inputs.n_items {
            let d = dq.row(v);
            if d.iter().all(|&x| x == 0.0) {
                continue;
            }
            let dz = relu_backward(self.pre.row(v), d);
            sparse_affine_backward(grads.slot(params, l.w_v), inputs.item_cols.row(v), &dz);
            grads.slot(params, l.b_v).add_vec(&dz);
        }
    }
}

/// Attention over a path incidence set, with enough state to run backward.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AttnTrace {
    pub items: Vec<u32>,
    /// Multiplicity of each item among the dependency pairs; `None` for meta-paths.
    pub counts: Option<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub a: Vec<Vec<f64>>,
    pub scores: Vec<f64>,
    /// Total attention mass per distinct item.
    pub weights: Vec<f64>,
    pub out: Vec<f64>,
}

impl AttnTrace {
    fn empty(f: usize) -> Self {
        Self {
            out: vec![0.0; f],
            ..Self::default()
        }
    }

    /// Weight per path instance: per item for meta-paths, per `(i, j)` pair
    /// for dependency paths (a target reached from `c` sources appears `c` times).
    pub fn instance_weights(&self) -> Vec<f64> {
        match &self.counts {
            None => self.weights.clone(),
            Some(counts) => self
                .weights
                .iter()
                .zip(counts)
                .flat_map(|(&w, &c)| std::iter::repeat_n(w / c, c as usize))
                .collect(),
        }
    }
}

fn attend(params: &ModelParams, idx: AttnIdx, p: &[f64], items: &ItemEmbeddings, targets: Vec<u32>, counts: Option<Vec<f64>>) -> AttnTrace {
    let f = params.dim();
    if targets.is_empty() {
        return AttnTrace::empty(f);
    }
    let w = params.value(idx.w);
    let h = params.value(idx.h).data();
    let mut wp = w.matvec_block(0, p);
    add_into(&mut wp, params.value(idx.b).data());
    let mut z = Vec::with_capacity(targets.len());
    let mut a = Vec::with_capacity(targets.len());
    let mut scores = Vec::with_capacity(targets.len());
    for &j in &targets {
        let mut zj = w.matvec_block(f, items.embedding(j as usize));
        add_into(&mut zj, &wp);
        let aj = relu(&zj);
        scores.push(dot(h, &aj));
        z.push(zj);
        a.push(aj);
    }
    let weights = match &counts {
        None => softmax(&scores),
        Some(c) => softmax_with_counts(&scores, c),
    };
    let mut out = vec![0.0; f];
    for (&j, &wj) in targets.iter().zip(&weights) {
        for (o, qv) in out.iter_mut().zip(items.embedding(j as usize)) {
            *o += wj * qv;
        }
    }
    AttnTrace {
        items: targets,
        counts,
        z,
        a,
        scores,
        weights,
        out,
    }
}

#[allow(clippy::too_many_arguments)]
fn attend_backward(
    params: &ModelParams,
    idx: AttnIdx,
    p: &[f64],
    items: &ItemEmbeddings,
    tr: &AttnTrace,
    g: &[f64],
    grads: &mut Grads,
    dp: &mut [f64],
    dq: &mut Tensor,
) {
    if tr.items.is_empty() {
        return;
    }
    let f = params.dim();
    let w = params.value(idx.w);
    let h = params.value(idx.h).data();
    let dweights: Vec<f64> = tr.items.iter().map(|&j| dot(g, items.embedding(j as usize))).collect();
    let de = softmax_backward(&tr.weights, &dweights);
    for (k, &j) in tr.items.iter().enumerate() {
        let j = j as usize;
        let qj = items.embedding(j);
        let wj = tr.weights[k];
        {
            let row = &mut dq.data_mut()[j * f..(j + 1) * f];
            for (d, gi) in row.iter_mut().zip(g) {
                *d += wj * gi;
            }
        }
        if de[k] == 0.0 {
            continue;
        }
        let gh = grads.slot(params, idx.h);
        for (x, av) in gh.data_mut().iter_mut().zip(&tr.a[k]) {
            *x += de[k] * av;
        }
        let da: Vec<f64> = h.iter().map(|&hv| de[k] * hv).collect();
        let dz = relu_backward(&tr.z[k], &da);
        let gw = grads.slot(params, idx.w);
        gw.add_outer(&dz, p, 0);
        gw.add_outer(&dz, qj, f);
        grads.slot(params, idx.b).add_vec(&dz);
        add_into(dp, &w.matvec_t_block(0, f, &dz));
        let dqj = w.matvec_t_block(f, f, &dz);
        add_into(&mut dq.data_mut()[j * f..(j + 1) * f], &dqj);
    }
}

/// One hidden layer of width F with ReLU, then affine to F.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MlpTrace {
    pub x: Vec<f64>,
    pub z1: Vec<f64>,
    pub a1: Vec<f64>,
    pub out: Vec<f64>,
}

pub(crate) fn mlp_forward(params: &ModelParams, idx: MlpIdx, x: Vec<f64>) -> MlpTrace {
    let z1 = params.value(idx.w1).matvec_bias(&x, params.value(idx.b1).data());
    let a1 = relu(&z1);
    let out = params.value(idx.w2).matvec_bias(&a1, params.value(idx.b2).data());
    MlpTrace { x, z1, a1, out }
}

pub(crate) fn mlp_backward(params: &ModelParams, idx: MlpIdx, tr: &MlpTrace, dout: &[f64], grads: &mut Grads) -> Vec<f64> {
    grads.slot(params, idx.w2).add_outer(dout, &tr.a1, 0);
    grads.slot(params, idx.b2).add_vec(dout);
    let da1 = params.value(idx.w2).matvec_t(dout);
    let dz1 = relu_backward(&tr.z1, &da1);
    grads.slot(params, idx.w1).add_outer(&dz1, &tr.x, 0);
    grads.slot(params, idx.b1).add_vec(&dz1);
    params.value(idx.w1).matvec_t(&dz1)
}

/// Forward state of one user: inherent embedding, per-path attention,
/// branch MLPs, and the fused preference `p̂_u`.
#[derive(Clone, Debug, PartialEq)]
pub struct UserPreferenceState {
    pub user: usize,
    pub p_pre: Vec<f64>,
    /// `p_u`
    pub p: Vec<f64>,
    pub explicit: Vec<AttnTrace>,
    pub implicit: Vec<AttnTrace>,
    /// `p_u^P`
    pub p_explicit: Vec<f64>,
    /// `p_u^PP`
    pub p_implicit: Vec<f64>,
    pub mlp_explicit: MlpTrace,
    pub mlp_implicit: MlpTrace,
    pub gate_in: Vec<f64>,
    /// `η`
    pub eta: Vec<f64>,
    /// `p̂_u`
    pub hat: Vec<f64>,
}

impl UserPreferenceState {
    /// `p̂_u^P`
    pub fn hat_explicit(&self) -> &[f64] {
        &self.mlp_explicit.out
    }

    /// `p̂_u^PP`
    pub fn hat_implicit(&self) -> &[f64] {
        &self.mlp_implicit.out
    }

    /// `α` per meta-path, in path order.
    pub fn alphas(&self) -> Vec<Vec<f64>> {
        self.explicit.iter().map(|t| t.weights.clone()).collect()
    }

    /// `β` per dependency meta-path, one weight per `(i, j)` pair.
    pub fn betas(&self) -> Vec<Vec<f64>> {
        self.implicit.iter().map(AttnTrace::instance_weights).collect()
    }
}

/// `p_u = ReLU(W_u p̄_u + b_u)`; returns `(pre-activation, p_u)`.
pub fn embed_user(params: &ModelParams, inputs: &ModelInputs, u: usize) -> (Vec<f64>, Vec<f64>) {
    let l = &params.layout;
    let pre = sparse_affine(params.value(l.w_u), inputs.user_rows.row(u), params.value(l.b_u).data());
    let p = relu(&pre);
    (pre, p)
}

pub fn forward_user(
    params: &ModelParams,
    inputs: &ModelInputs,
    items: &ItemEmbeddings,
    u: usize,
    obs: Option<&dyn WeightObserver>,
) -> UserPreferenceState {
    let l = &params.layout;
    let f = params.dim();
    let br = params.spec.branches;
    let (p_pre, p) = embed_user(params, inputs, u);

    let explicit: Vec<AttnTrace> = l
        .explicit
        .iter()
        .enumerate()
        .map(|(k, &idx)| {
            if br.explicit {
                attend(params, idx, &p, items, inputs.explicit[k][u].clone(), None)
            } else {
                AttnTrace::empty(f)
            }
        })
        .collect();
    let implicit: Vec<AttnTrace> = l
        .implicit
        .iter()
        .enumerate()
        .map(|(k, &idx)| {
            if br.implicit {
                let (js, cs) = inputs.implicit[k][u].iter().copied().unzip();
                attend(params, idx, &p, items, js, Some(cs))
            } else {
                AttnTrace::empty(f)
            }
        })
        .collect();
    if let Some(obs) = obs {
        for t in explicit.iter().filter(|t| !t.items.is_empty()) {
            obs.observe(WeightKind::Alpha, &t.weights);
        }
        for t in implicit.iter().filter(|t| !t.items.is_empty()) {
            obs.observe(WeightKind::Beta, &t.instance_weights());
        }
    }

    let mut p_explicit = vec![0.0; f];
    explicit.iter().for_each(|t| add_into(&mut p_explicit, &t.out));
    let mut p_implicit = vec![0.0; f];
    implicit.iter().for_each(|t| add_into(&mut p_implicit, &t.out));

    let mlp_explicit = mlp_forward(params, l.mlp_p, [p.as_slice(), &p_explicit].concat());
    let mlp_implicit = mlp_forward(params, l.mlp_pp, [p.as_slice(), &p_implicit].concat());
    let gate_in: Vec<f64> = mlp_explicit.out.iter().zip(&mlp_implicit.out).map(|(a, b)| a + b).collect();
    let eta: Vec<f64> = params
        .value(l.w_fuse)
        .matvec_bias(&gate_in, params.value(l.b_fuse).data())
        .into_iter()
        .map(sigmoid)
        .collect();
    let hat = eta
        .iter()
        .zip(mlp_explicit.out.iter().zip(&mlp_implicit.out))
        .map(|(&e, (&a, &b))| e * a + (1.0 - e) * b)
        .collect();
    UserPreferenceState {
        user: u,
        p_pre,
        p,
        explicit,
        implicit,
        p_explicit,
        p_implicit,
        mlp_explicit,
        mlp_implicit,
        gate_in,
        eta,
        hat,
    }
}

/// Backpropagates `∂L/∂p̂_u` into the user-level parameters; item-embedding
/// gradients are accumulated into `dq` (one row per item).
pub fn backward_user(
    params: &ModelParams,
    inputs: &ModelInputs,
    items: &ItemEmbeddings,
    st: &UserPreferenceState,
    d_hat: &[f64],
    grads: &mut Grads,
    dq: &mut Tensor,
) {
    let l = &params.layout;
    let f = params.dim();
    let a = st.hat_explicit();
    let b = st.hat_implicit();
    let mut d_a: Vec<f64> = d_hat.iter().zip(&st.eta).map(|(d, e)| d * e).collect();
    let mut d_b: Vec<f64> = d_hat.iter().zip(&st.eta).map(|(d, e)| d * (1.0 - e)).collect();
    let dz: Vec<f64> = (0..f)
        .map(|k| d_hat[k] * (a[k] - b[k]) * st.eta[k] * (1.0 - st.eta[k]))
        .collect();
    grads.slot(params, l.w_fuse).add_outer(&dz, &st.gate_in, 0);
    grads.slot(params, l.b_fuse).add_vec(&dz);
    let ds = params.value(l.w_fuse).matvec_t(&dz);
    add_into(&mut d_a, &ds);
    add_into(&mut d_b, &ds);

    let dx_a = mlp_backward(params, l.mlp_p, &st.mlp_explicit, &d_a, grads);
    let dx_b = mlp_backward(params, l.mlp_pp, &st.mlp_implicit, &d_b, grads);
    let mut dp: Vec<f64> = dx_a[..f].iter().zip(&dx_b[..f]).map(|(x, y)| x + y).collect();
    for (t, &idx) in st.explicit.iter().zip(&l.explicit) {
        attend_backward(params, idx, &st.p, items, t, &dx_a[f..], grads, &mut dp, dq);
    }
    for (t, &idx) in st.implicit.iter().zip(&l.implicit) {
        attend_backward(params, idx, &st.p, items, t, &dx_b[f..], grads, &mut dp, dq);
    }
    let dz = relu_backward(&st.p_pre, &dp);
    sparse_affine_backward(grads.slot(params, l.w_u), inputs.user_rows.row(st.user), &dz);
    grads.slot(params, l.b_u).add_vec(&dz);
}
