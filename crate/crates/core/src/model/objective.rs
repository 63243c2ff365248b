use rayon::prelude::*;

use super::group::{aggregate, aggregate_backward, GroupPreference};
use super::inputs::ModelInputs;
use super::params::{Grads, ModelParams};
use super::user::{backward_user, forward_user, ItemEmbeddings};
use super::{WeightKind, WeightObserver};
use crate::error::{Error, Result};
use crate::nn::{log_softmax, softmax, Tensor};

/// `ln(1e-12)`: per-target log-probabilities are floored here.
pub const LOG_FLOOR: f64 = -27.631_021_115_928_547;

const CHUNK: usize = 64;

/// Output of a predictor head: `t = W x`, `logits = O t + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub t: Vec<f64>,
    pub logits: Vec<f64>,
    pub log_pi: Vec<f64>,
}

impl Prediction {
    /// `π`, the softmax over items.
    pub fn pi(&self) -> Vec<f64> {
        softmax(&self.logits)
    }
}

/// Scores all items from a preference vector through the transform at
/// parameter index `pred` and the shared output layer.
pub fn predict(params: &ModelParams, pred: usize, x: &[f64]) -> Prediction {
    let l = &params.layout;
    let t = params.value(pred).matvec(x);
    let logits = params.value(l.out_w).matvec_bias(&t, params.value(l.out_b).data());
    let log_pi = log_softmax(&logits);
    Prediction { t, logits, log_pi }
}

fn predict_backward(params: &ModelParams, pred: usize, x: &[f64], pr: &Prediction, dlogits: &[f64], grads: &mut Grads) -> Vec<f64> {
    let l = &params.layout;
    grads.slot(params, l.out_w).add_outer(dlogits, &pr.t, 0);
    grads.slot(params, l.out_b).add_vec(dlogits);
    let dt = params.value(l.out_w).matvec_t(dlogits);
    grads.slot(params, pred).add_outer(&dt, x, 0);
    params.value(pred).matvec_t(&dt)
}

/// `−(1/|ȳ|) Σ_{v∈ȳ} max(log π_v, ln 1e-12)` and its gradient w.r.t. the
/// logits. Floored targets contribute no gradient.
pub fn target_loss(log_pi: &[f64], targets: &[u32]) -> (f64, Vec<f64>) {
    let k = targets.len();
    if k == 0 {
        return (0.0, vec![0.0; log_pi.len()]);
    }
    let inv = 1.0 / k as f64;
    let mut loss = 0.0;
    let mut live = 0usize;
    let mut grad = vec![0.0; log_pi.len()];
    for &v in targets {
        let lp = log_pi[v as usize];
        if lp > LOG_FLOOR {
            loss -= lp;
            live += 1;
            grad[v as usize] -= inv;
        } else {
            loss -= LOG_FLOOR;
        }
    }
    if live > 0 {
        let s = live as f64 * inv;
        for (g, lp) in grad.iter_mut().zip(log_pi) {
            *g += s * lp.exp();
        }
    }
    (loss * inv, grad)
}

/// Loss and gradients of a single training example.
#[derive(Clone, Debug)]
pub struct ExampleGrad {
    pub loss: f64,
    pub grads: Grads,
    /// `∂L/∂q` for every item, when the example reached the item embeddings.
    pub dq: Option<Tensor>,
}

pub fn user_example(
    params: &ModelParams,
    inputs: &ModelInputs,
    items: &ItemEmbeddings,
    u: usize,
    obs: Option<&dyn WeightObserver>,
) -> ExampleGrad {
    let st = forward_user(params, inputs, items, u, obs);
    let pr = predict(params, params.layout.pred_u, &st.hat);
    if let Some(obs) = obs {
        obs.observe(WeightKind::Pi, &pr.pi());
    }
    let (loss, dlogits) = target_loss(&pr.log_pi, inputs.user_targets.row(u));
    let mut grads = Grads::new(params.params.len());
    let d_hat = predict_backward(params, params.layout.pred_u, &st.hat, &pr, &dlogits, &mut grads);
    let mut dq = Tensor::zeros(items.q.shape());
    backward_user(params, inputs, items, &st, &d_hat, &mut grads, &mut dq);
    ExampleGrad {
        loss,
        grads,
        dq: Some(dq),
    }
}

/// Where member preferences come from in a group example.
#[derive(Clone, Copy)]
pub enum Members<'a> {
    /// Precomputed `p̂_u` for all users; no gradient reaches user parameters.
    Cached(&'a [Vec<f64>]),
    /// Recomputed from the current parameters; gradients flow into them.
    Live(&'a ItemEmbeddings),
}

pub fn group_preference(params: &ModelParams, inputs: &ModelInputs, hats: &[Vec<f64>], g: usize) -> Result<GroupPreference> {
    let members = inputs.groups.members(g);
    let refs: Vec<&[f64]> = members.iter().map(|&u| hats[u].as_slice()).collect();
    aggregate(params, &refs).map_err(|_| Error::EmptyGroup(g))
}

pub fn group_example(
    params: &ModelParams,
    inputs: &ModelInputs,
    g: usize,
    members: Members<'_>,
    obs: Option<&dyn WeightObserver>,
) -> Result<ExampleGrad> {
    let ids = inputs.groups.members(g);
    let states: Vec<_> = match members {
        Members::Cached(_) => Vec::new(),
        Members::Live(items) => ids.iter().map(|&u| forward_user(params, inputs, items, u, obs)).collect(),
    };
    let refs: Vec<&[f64]> = match members {
        Members::Cached(h) => ids.iter().map(|&u| h[u].as_slice()).collect(),
        Members::Live(_) => states.iter().map(|s| s.hat.as_slice()).collect(),
    };
    let gp = aggregate(params, &refs).map_err(|_| Error::EmptyGroup(g))?;
    if let Some(obs) = obs {
        obs.observe(WeightKind::Gamma, &gp.gamma);
    }
    let pr = predict(params, params.layout.pred_g, &gp.r);
    if let Some(obs) = obs {
        obs.observe(WeightKind::Pi, &pr.pi());
    }
    let (loss, dlogits) = target_loss(&pr.log_pi, inputs.group_targets.row(g));
    let mut grads = Grads::new(params.params.len());
    let d_r = predict_backward(params, params.layout.pred_g, &gp.r, &pr, &dlogits, &mut grads);
    let d_hats = aggregate_backward(params, &gp, &refs, &d_r, &mut grads);
    let dq = match members {
        Members::Cached(_) => None,
        Members::Live(items) => {
            let mut dq = Tensor::zeros(items.q.shape());
            for (st, d) in states.iter().zip(&d_hats) {
                backward_user(params, inputs, items, st, d, &mut grads, &mut dq);
            }
            Some(dq)
        }
    };
    Ok(ExampleGrad { loss, grads, dq })
}

/// Reduces per-example results strictly in example order so the outcome does
/// not depend on how the work was scheduled.
fn reduce<F>(params: &ModelParams, n: usize, items: Option<(&ItemEmbeddings, &ModelInputs)>, f: F) -> Result<(f64, Grads)>
where
    F: Fn(usize) -> Result<ExampleGrad> + Sync,
{
    let mut grads = Grads::new(params.params.len());
    let mut loss = 0.0;
    let mut dq: Option<Tensor> = None;
    let idx: Vec<usize> = (0..n).collect();
    for chunk in idx.chunks(CHUNK) {
        let results: Vec<Result<ExampleGrad>> = chunk.par_iter().map(|&k| f(k)).collect();
        for r in results {
            let r = r?;
            loss += r.loss;
            grads.add(&r.grads);
            if let Some(d) = r.dq {
                match &mut dq {
                    Some(acc) => acc.axpy(1.0, &d),
                    None => dq = Some(d),
                }
            }
        }
    }
    if let (Some(dq), Some((items, inputs))) = (dq, items) {
        items.backward(params, inputs, &dq, &mut grads);
    }
    if n > 0 {
        grads.scale(1.0 / n as f64);
        loss /= n as f64;
    }
    Ok((loss, grads))
}

/// Mean user loss over `users` and its gradient.
pub fn user_batch(
    params: &ModelParams,
    inputs: &ModelInputs,
    users: &[usize],
    obs: Option<&dyn WeightObserver>,
) -> (f64, Grads) {
    let items = ItemEmbeddings::compute(params, inputs);
    reduce(params, users.len(), Some((&items, inputs)), |k| {
        Ok(user_example(params, inputs, &items, users[k], obs))
    })
    .expect("user examples are infallible")
}

/// Mean group loss over `groups` and its gradient. With `cached` member
/// preferences the user-level parameters receive no gradient.
pub fn group_batch(
    params: &ModelParams,
    inputs: &ModelInputs,
    groups: &[usize],
    cached: Option<&[Vec<f64>]>,
    obs: Option<&dyn WeightObserver>,
) -> Result<(f64, Grads)> {
    match cached {
        Some(h) => reduce(params, groups.len(), None, |k| {
            group_example(params, inputs, groups[k], Members::Cached(h), obs)
        }),
        None => {
            let items = ItemEmbeddings::compute(params, inputs);
            reduce(params, groups.len(), Some((&items, inputs)), |k| {
                group_example(params, inputs, groups[k], Members::Live(&items), obs)
            })
        }
    }
}

/// `p̂_u` for every user under the current parameters.
pub fn user_hats(params: &ModelParams, inputs: &ModelInputs) -> Vec<Vec<f64>> {
    let items = ItemEmbeddings::compute(params, inputs);
    (0..inputs.n_users)
        .into_par_iter()
        .map(|u| forward_user(params, inputs, &items, u, None).hat)
        .collect()
}

/// Item logits for group `g` (ranking by logits equals ranking by `π`).
pub fn group_logits(params: &ModelParams, inputs: &ModelInputs, hats: &[Vec<f64>], g: usize) -> Result<Vec<f64>> {
    let gp = group_preference(params, inputs, hats, g)?;
    Ok(predict(params, params.layout.pred_g, &gp.r).logits)
}

/// `π(p̂_u)`.
pub fn user_scores(params: &ModelParams, inputs: &ModelInputs, items: &ItemEmbeddings, u: usize) -> Result<Vec<f64>> {
    if u >= inputs.n_users {
        return Err(Error::OutOfRange {
            kind: "user",
            id: u,
            count: inputs.n_users,
        });
    }
    let st = forward_user(params, inputs, items, u, None);
    Ok(predict(params, params.layout.pred_u, &st.hat).pi())
}

/// `π(r_g)`.
pub fn group_scores(params: &ModelParams, inputs: &ModelInputs, hats: &[Vec<f64>], g: usize) -> Result<Vec<f64>> {
    if g >= inputs.n_groups() {
        return Err(Error::OutOfRange {
            kind: "group",
            id: g,
            count: inputs.n_groups(),
        });
    }
    Ok(softmax(&group_logits(params, inputs, hats, g)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_single_target_is_ln_m() {
        let lp = log_softmax(&[0.0; 7]);
        let (loss, _) = target_loss(&lp, &[3]);
        assert!((loss - 7f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn floored_targets_have_no_gradient() {
        let lp = log_softmax(&[0.0, -100.0, 0.0]);
        let (loss, g) = target_loss(&lp, &[1]);
        assert!((loss + LOG_FLOOR).abs() < 1e-12);
        assert!(g.iter().all(|&x| x == 0.0));
    }
}
