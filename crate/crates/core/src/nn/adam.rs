//! Adam with bias correction and decoupled (AdamW-style) weight decay.

use super::layers::ParamSlot;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new() -> Self {
        AdamState {
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// One bias-corrected update over all slots. Decoupled weight decay is
    /// applied only to slots flagged `decay`. Slot order and sizes must be
    /// stable across calls.
    pub fn step(&mut self, mut slots: Vec<ParamSlot<'_>>, lr: f64, weight_decay: f64) {
        if self.m.is_empty() {
            self.m = slots.iter().map(|s| vec![0.0; s.values.len()]).collect();
            self.v = slots.iter().map(|s| vec![0.0; s.values.len()]).collect();
        }
        assert_eq!(self.m.len(), slots.len(), "slot count changed");
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (slot, (m, v)) in slots.iter_mut().zip(self.m.iter_mut().zip(&mut self.v)) {
            assert_eq!(slot.values.len(), m.len(), "slot size changed");
            for i in 0..slot.values.len() {
                let g = slot.grads[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                let mut p = slot.values[i];
                if slot.decay && weight_decay > 0.0 {
                    p -= lr * weight_decay * p;
                }
                p -= lr * m_hat / (v_hat.sqrt() + self.eps);
                slot.values[i] = p;
            }
        }
    }
}

impl Default for AdamState {
    fn default() -> Self {
        Self::new()
    }
}
