use super::params::{Grads, ModelParams};
use super::user::{mlp_backward, mlp_forward, MlpTrace};
use crate::error::{Error, Result};
use crate::nn::{dot, softmax, softmax_backward};

/// Aggregated group preference `r_g` with member weights `γ`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupPreference {
    pub r: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Attention internals per member (empty for meanpool).
    pub z: Vec<Vec<f64>>,
    pub mlp: Vec<MlpTrace>,
    pub scores: Vec<f64>,
}

fn weighted_sum(hats: &[&[f64]], w: &[f64]) -> Vec<f64> {
    let mut r = vec![0.0; hats[0].len()];
    for (h, &g) in hats.iter().zip(w) {
        for (x, y) in r.iter_mut().zip(h.iter()) {
            *x += g * y;
        }
    }
    r
}

pub fn meanpool_aggregate(hats: &[&[f64]]) -> Result<GroupPreference> {
    if hats.is_empty() {
        return Err(Error::EmptyGroup(0));
    }
    let gamma = vec![1.0 / hats.len() as f64; hats.len()];
    let mut r = vec![0.0; hats[0].len()];
    for h in hats {
        for (x, y) in r.iter_mut().zip(h.iter()) {
            *x += y;
        }
    }
    let n = hats.len() as f64;
    r.iter_mut().for_each(|x| *x /= n);
    Ok(GroupPreference {
        r,
        gamma,
        z: Vec::new(),
        mlp: Vec::new(),
        scores: Vec::new(),
    })
}

/// `o_u = hᵀ MLP(W p̂_u + b)`, `γ = softmax(o)`, `r_g = Σ γ_u p̂_u`.
/// Falls back to meanpool when the model has no aggregator parameters.
pub fn aggregate(params: &ModelParams, hats: &[&[f64]]) -> Result<GroupPreference> {
    let Some(idx) = params.layout.agg else {
        return meanpool_aggregate(hats);
    };
    if hats.is_empty() {
        return Err(Error::EmptyGroup(0));
    }
    let w = params.value(idx.w);
    let b = params.value(idx.b).data();
    let h = params.value(idx.h).data();
    let mut z = Vec::with_capacity(hats.len());
    let mut mlp = Vec::with_capacity(hats.len());
    let mut scores = Vec::with_capacity(hats.len());
    for hat in hats {
        let zu = w.matvec_bias(hat, b);
        let tr = mlp_forward(params, idx.mlp, zu.clone());
        scores.push(dot(h, &tr.out));
        z.push(zu);
        mlp.push(tr);
    }
    let gamma = softmax(&scores);
    let r = weighted_sum(hats, &gamma);
    Ok(GroupPreference {
        r,
        gamma,
        z,
        mlp,
        scores,
    })
}

/// Returns `∂L/∂p̂_u` for every member and accumulates aggregator gradients.
pub fn aggregate_backward(
    params: &ModelParams,
    gp: &GroupPreference,
    hats: &[&[f64]],
    d_r: &[f64],
    grads: &mut Grads,
) -> Vec<Vec<f64>> {
    let mut d_hats: Vec<Vec<f64>> = gp
        .gamma
        .iter()
        .map(|&g| d_r.iter().map(|d| g * d).collect())
        .collect();
    let Some(idx) = params.layout.agg else {
        return d_hats;
    };
    let h = params.value(idx.h).data();
    let dgamma: Vec<f64> = hats.iter().map(|hat| dot(d_r, hat)).collect();
    let ds = softmax_backward(&gp.gamma, &dgamma);
    for (k, hat) in hats.iter().enumerate() {
        if ds[k] == 0.0 {
            continue;
        }
        let gh = grads.slot(params, idx.h);
        for (x, y) in gh.data_mut().iter_mut().zip(&gp.mlp[k].out) {
            *x += ds[k] * y;
        }
        let dy: Vec<f64> = h.iter().map(|&hv| ds[k] * hv).collect();
        let dz = mlp_backward(params, idx.mlp, &gp.mlp[k], &dy, grads);
        grads.slot(params, idx.w).add_outer(&dz, hat, 0);
        grads.slot(params, idx.b).add_vec(&dz);
        let back = params.value(idx.w).matvec_t(&dz);
        for (x, y) in d_hats[k].iter_mut().zip(&back) {
            *x += y;
        }
    }
    d_hats
}
