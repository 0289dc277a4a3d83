use ndarray::Zip;

use super::mlp::{Gradients, Mlp};
use crate::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adaptive-moment optimizer state for one network. Steps descend the
/// supplied gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub t: u64,
    pub m: Gradients,
    pub v: Gradients,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        Self {
            lr,
            t: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        if grads.weights.len() != net.layers().len() || self.m.weights.len() != net.layers().len() {
            return Err(Error::usage("optimizer state does not match the network"));
        }
        self.t += 1;
        let bc1 = 1.0 - BETA1.powi(self.t as i32);
        let bc2 = 1.0 - BETA2.powi(self.t as i32);
        let lr = self.lr;
        let update = |p: &mut f64, g: &f64, m: &mut f64, v: &mut f64| {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + EPSILON);
        };
        for (k, layer) in net.layers_mut().iter_mut().enumerate() {
            if layer.weights.dim() != grads.weights[k].dim() {
                return Err(Error::usage(format!("gradient shape mismatch in layer {k}")));
            }
            Zip::from(&mut layer.weights)
                .and(&grads.weights[k])
                .and(&mut self.m.weights[k])
                .and(&mut self.v.weights[k])
                .for_each(update);
            Zip::from(&mut layer.biases)
                .and(&grads.biases[k])
                .and(&mut self.m.biases[k])
                .and(&mut self.v.biases[k])
                .for_each(update);
        }
        Ok(())
    }
}
