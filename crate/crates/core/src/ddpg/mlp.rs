//! Dense feed-forward networks with reverse-mode gradients.
//!
//! Weights are stored `[fan_in x fan_out]` so a batch `X` of shape
//! `[batch x fan_in]` maps to `X W + b`.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Final-layer init range for actor and critic heads.
pub const FINAL_LAYER_INIT: f64 = 3e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        }
    }

    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn fan_in(&self) -> usize {
        self.weights.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.ncols()
    }
}

/// Parameter-shaped buffers: gradients, optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.layers.iter().map(|l| Array2::zeros(l.weights.raw_dim())).collect(),
            biases: net.layers.iter().map(|l| Array1::zeros(l.biases.raw_dim())).collect(),
        }
    }
}

#[derive(Debug, Clone)]
struct Tape {
    inputs: Vec<Array2<f64>>,
    pre_activations: Vec<Array2<f64>>,
}

#[derive(Debug, Clone)]
pub struct Mlp {
    layers: Vec<Dense>,
    tape: Option<Tape>,
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

impl Mlp {
    /// Builds a network from explicit layers after checking that their
    /// shapes chain.
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::usage("network needs at least one layer"));
        }
        for (k, l) in layers.iter().enumerate() {
            if l.biases.len() != l.fan_out() {
                return Err(Error::usage(format!(
                    "layer {k}: {} biases for {} outputs",
                    l.biases.len(),
                    l.fan_out()
                )));
            }
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(Error::usage(format!(
                    "layer {k} emits {} values but layer {} expects {}",
                    pair[0].fan_out(),
                    k + 1,
                    pair[1].fan_in()
                )));
            }
        }
        Ok(Self { layers, tape: None })
    }

    pub fn zeros(layer_dims: &[usize], activations: &[Activation]) -> Result<Self> {
        Self::check_spec(layer_dims, activations)?;
        let layers = layer_dims
            .windows(2)
            .zip(activations)
            .map(|(d, &activation)| Dense {
                weights: Array2::zeros((d[0], d[1])),
                biases: Array1::zeros(d[1]),
                activation,
            })
            .collect();
        Self::from_layers(layers)
    }

    /// Fan-in scaled uniform init for hidden layers, `±FINAL_LAYER_INIT`
    /// for the last layer.
    pub fn init<R: Rng + ?Sized>(
        layer_dims: &[usize],
        activations: &[Activation],
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(layer_dims, activations)?;
        let last = net.layers.len() - 1;
        for (k, layer) in net.layers.iter_mut().enumerate() {
            let bound = if k == last {
                FINAL_LAYER_INIT
            } else {
                1.0 / (layer.fan_in() as f64).sqrt()
            };
            layer.weights.mapv_inplace(|_| rng.random_range(-bound..=bound));
            layer.biases.mapv_inplace(|_| rng.random_range(-bound..=bound));
        }
        Ok(net)
    }

    fn check_spec(layer_dims: &[usize], activations: &[Activation]) -> Result<()> {
        if layer_dims.len() < 2 || activations.len() != layer_dims.len() - 1 {
            return Err(Error::usage(format!(
                "{} layer dims need {} activations, got {}",
                layer_dims.len(),
                layer_dims.len().saturating_sub(1),
                activations.len()
            )));
        }
        if layer_dims.contains(&0) {
            return Err(Error::usage("layer widths must be >= 1"));
        }
        Ok(())
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out()
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Dense::fan_out))
            .collect()
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|l| l.activation).collect()
    }

    pub fn same_architecture(&self, other: &Mlp) -> bool {
        self.layer_dims() == other.layer_dims() && self.activations() == other.activations()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::usage(format!(
                "network expects {} inputs, got {}",
                self.input_dim(),
                x.ncols()
            )));
        }
        Ok(())
    }

    fn layer_forward(layer: &Dense, x: &ArrayView2<f64>) -> Array2<f64> {
        x.dot(&layer.weights) + &layer.biases
    }

    /// Batched forward pass, rows are samples.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let mut h = x.to_owned();
        for layer in &self.layers {
            let act = layer.activation;
            h = Self::layer_forward(layer, &h.view()).mapv_into(|z| act.apply(z));
        }
        Ok(h)
    }

    pub fn forward_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, x.len()), x)
            .map_err(|e| Error::usage(e.to_string()))?;
        Ok(self.forward(view)?.into_raw_vec_and_offset().0)
    }

    /// Forward pass that records what [`Mlp::backward`] needs.
    pub fn forward_cached(&mut self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        for layer in &self.layers {
            let z = Self::layer_forward(layer, &h.view());
            let act = layer.activation;
            let out = z.mapv(|v| act.apply(v));
            inputs.push(h);
            pre_activations.push(z);
            h = out;
        }
        self.tape = Some(Tape {
            inputs,
            pre_activations,
        });
        Ok(h)
    }

    /// Back-propagates `upstream` = dL/d(output) through the last cached
    /// forward pass. Parameter gradients are summed over the batch. The
    /// cache is consumed.
    pub fn backward(&mut self, upstream: ArrayView2<f64>) -> Result<(Gradients, Array2<f64>)> {
        let tape = self
            .tape
            .take()
            .ok_or_else(|| Error::usage("backward called without a cached forward pass"))?;
        let batch = tape.inputs[0].nrows();
        if upstream.dim() != (batch, self.output_dim()) {
            return Err(Error::usage(format!(
                "upstream gradient has shape {:?}, expected ({batch}, {})",
                upstream.dim(),
                self.output_dim()
            )));
        }
        let n = self.layers.len();
        let mut dw = Vec::with_capacity(n);
        let mut db = Vec::with_capacity(n);
        let mut grad = upstream.to_owned();
        for k in (0..n).rev() {
            let layer = &self.layers[k];
            let act = layer.activation;
            let mut delta = grad;
            ndarray::Zip::from(&mut delta)
                .and(&tape.pre_activations[k])
                .for_each(|d, &z| *d *= act.derivative(z));
            dw.push(tape.inputs[k].t().dot(&delta));
            db.push(delta.sum_axis(Axis(0)));
            grad = delta.dot(&layer.weights.t());
        }
        dw.reverse();
        db.reverse();
        Ok((
            Gradients {
                weights: dw,
                biases: db,
            },
            grad,
        ))
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.biases.iter()).all(|v| v.is_finite()))
    }

    /// First non-finite parameter as `(layer, description)`.
    pub fn first_non_finite(&self) -> Option<(usize, String)> {
        for (k, l) in self.layers.iter().enumerate() {
            if let Some(v) = l.weights.iter().find(|v| !v.is_finite()) {
                return Some((k, format!("weight {v}")));
            }
            if let Some(v) = l.biases.iter().find(|v| !v.is_finite()) {
                return Some((k, format!("bias {v}")));
            }
        }
        None
    }
}

/// Blends `online` into `target`: θ' ← τ θ + (1 − τ) θ'.
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<()> {
    if !target.same_architecture(online) {
        return Err(Error::usage(format!(
            "soft update between {:?} and {:?}",
            target.layer_dims(),
            online.layer_dims()
        )));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::domain(format!("tau must lie in [0, 1], got {tau}")));
    }
    for (t, o) in target.layers.iter_mut().zip(&online.layers) {
        ndarray::Zip::from(&mut t.weights)
            .and(&o.weights)
            .for_each(|t, &o| *t = tau * o + (1.0 - tau) * *t);
        ndarray::Zip::from(&mut t.biases)
            .and(&o.biases)
            .for_each(|t, &o| *t = tau * o + (1.0 - tau) * *t);
    }
    Ok(())
}
