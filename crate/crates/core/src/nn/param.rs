use serde::{Deserialize, Serialize};

use super::tensor::Tensor;

/// A learned tensor together with its gradient buffer and Adam moments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    pub adam_m: Tensor,
    pub adam_v: Tensor,
    /// Number of Adam updates applied so far.
    pub steps: u64,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let shape = value.shape().to_vec();
        Self {
            name: name.into(),
            grad: Tensor::zeros(&shape),
            adam_m: Tensor::zeros(&shape),
            adam_v: Tensor::zeros(&shape),
            value,
            steps: 0,
        }
    }

    pub fn shape(&self) -> &[usize] {
        self.value.shape()
    }

    /// Weight matrices take L2 decay; vectors (biases, scoring vectors) do not.
    pub fn decays(&self) -> bool {
        self.value.shape().len() == 2
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Anything that owns an ordered list of parameters.
pub trait ParamSet {
    fn params(&self) -> &[Parameter];
    fn params_mut(&mut self) -> &mut [Parameter];
}

impl ParamSet for Vec<Parameter> {
    fn params(&self) -> &[Parameter] {
        self
    }

    fn params_mut(&mut self) -> &mut [Parameter] {
        self
    }
}
