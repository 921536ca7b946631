//! Sequential layer stack with L2 loss.

use super::layers::{Layer, Mode, ParamSlot};
use super::tensor::Tensor;
use crate::error::Result;

#[derive(Debug, Clone, Default)]
pub struct Network {
    pub layers: Vec<Layer>,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Self {
        Network { layers }
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let mut h = x.clone();
        for layer in &mut self.layers {
            h = layer.forward(&h, mode)?;
        }
        Ok(h)
    }

    /// Backpropagate `grad` (dL/doutput) through the stack, accumulating
    /// parameter gradients; returns dL/dinput.
    pub fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let mut g = grad.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    pub fn zero_grads(&mut self) {
        for layer in &mut self.layers {
            layer.zero_grads();
        }
    }

    pub fn param_slots(&mut self) -> Vec<ParamSlot<'_>> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.param_slots())
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.state_views())
            .map(|(_, _, v)| v.len())
            .sum()
    }
}

/// Mean-squared L2 loss and its gradient 2(p - y)/N.
pub fn l2_loss(pred: &Tensor, target: &Tensor) -> (f64, Tensor) {
    assert!(pred.same_shape(target), "loss shape mismatch");
    let n = pred.data.len() as f64;
    let mut grad = pred.clone();
    let mut loss = 0.0;
    for (g, y) in grad.data.iter_mut().zip(&target.data) {
        let d = *g - y;
        loss += d * d;
        *g = 2.0 * d / n;
    }
    (loss / n, grad)
}

/// Numerically stable softplus, ln(1 + e^x).
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Derivative of softplus: the logistic sigmoid.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
