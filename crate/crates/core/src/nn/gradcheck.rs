use serde::{Deserialize, Serialize};

use super::param::ParamSet;
use super::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub entries: usize,
    pub max_abs_error: f64,
    /// Analytic and numeric values at the worst entry.
    pub worst: (f64, f64),
    /// `(analytic, numeric)` for every entry.
    #[serde(skip)]
    pub values: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub step: f64,
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.params.iter().all(|p| p.max_rel_error < self.tolerance)
    }

    /// Entries violating `|a − n| ≤ tol·max(|a|, |n|) + abs_floor`, a mixed
    /// criterion that tolerates finite-difference quantisation near zero.
    pub fn mixed_violations(&self, abs_floor: f64) -> usize {
        self.params
            .iter()
            .flat_map(|p| &p.values)
            .filter(|(a, n)| (a - n).abs() > self.tolerance * a.abs().max(n.abs()) + abs_floor)
            .count()
    }

    pub fn failures(&self) -> impl Iterator<Item = &ParamCheck> {
        self.params.iter().filter(|p| p.max_rel_error >= self.tolerance)
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares `analytic` (one tensor per parameter, in order) against central
/// differences of `loss`. Parameters are restored after each probe.
pub fn grad_check<S, L>(set: &mut S, analytic: &[Tensor], mut loss: L, h: f64, tol: f64) -> GradCheckReport
where
    S: ParamSet,
    L: FnMut(&S) -> f64,
{
    let mut out = Vec::with_capacity(analytic.len());
    for (k, grad) in analytic.iter().enumerate() {
        let n = set.params()[k].value.len();
        let mut worst = 0.0f64;
        let mut at = (0.0, 0.0);
        let mut max_abs = 0.0f64;
        let mut values = Vec::with_capacity(n);
        for e in 0..n {
            let orig = set.params()[k].value.data()[e];
            set.params_mut()[k].value.data_mut()[e] = orig + h;
            let up = loss(set);
            set.params_mut()[k].value.data_mut()[e] = orig - h;
            let down = loss(set);
            set.params_mut()[k].value.data_mut()[e] = orig;
            let numeric = (up - down) / (2.0 * h);
            values.push((grad.data()[e], numeric));
            max_abs = max_abs.max((grad.data()[e] - numeric).abs());
            let err = relative_error(grad.data()[e], numeric);
            if err > worst {
                worst = err;
                at = (grad.data()[e], numeric);
            }
        }
        out.push(ParamCheck {
            name: set.params()[k].name.clone(),
            max_rel_error: worst,
            entries: n,
            max_abs_error: max_abs,
            worst: at,
            values,
        });
    }
    GradCheckReport {
        tolerance: tol,
        step: h,
        params: out,
    }
}
