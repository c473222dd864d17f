//! Dense MLPs with reverse-mode gradients and an Adam optimizer.
//!
//! Parameters live in one flat vector. Layer `i` owns a row-major
//! `in_dim × out_dim` weight block (so a layer computes `x·W + b` on a batch
//! of row vectors) followed by its `out_dim` biases.

use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use serde::{Deserialize, Serialize};

use crate::data::Rng;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Softplus,
    Sigmoid,
    Identity,
}

/// `log(1 + e^z)` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Softplus => softplus(z),
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }

    /// Derivative with respect to the pre-activation. ReLU's subgradient at 0 is 0.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Softplus => sigmoid(z),
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        LayerSpec {
            in_dim,
            out_dim,
            activation,
        }
    }

    pub fn param_count(&self) -> usize {
        self.in_dim * self.out_dim + self.out_dim
    }
}

/// A feed-forward network: layer specs plus a flat parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    layers: Vec<LayerSpec>,
    params: Vec<f64>,
}

/// Intermediate values kept by [`Network::forward_tape`] for the backward pass.
#[derive(Clone, Debug)]
pub struct Tape {
    /// Input to each layer.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl Tape {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }

    /// Pre-activation values of each layer.
    pub fn pre_activations(&self) -> &[Array2<f64>] {
        &self.pre
    }
}

/// Gradients from one backward pass.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub params: Vec<f64>,
    pub input: Array2<f64>,
}

fn validate_layers(layers: &[LayerSpec]) -> Result<()> {
    if layers.is_empty() {
        return Err(Error::Shape("network needs at least one layer".into()));
    }
    for (i, l) in layers.iter().enumerate() {
        if l.in_dim == 0 || l.out_dim == 0 {
            return Err(Error::Shape(format!("layer {i} has a zero dimension")));
        }
        if i > 0 && layers[i - 1].out_dim != l.in_dim {
            return Err(Error::Shape(format!(
                "layer {i} expects {} inputs but layer {} produces {}",
                l.in_dim,
                i - 1,
                layers[i - 1].out_dim
            )));
        }
    }
    Ok(())
}

impl Network {
    /// All-zero parameters.
    pub fn zeros(layers: Vec<LayerSpec>) -> Result<Self> {
        validate_layers(&layers)?;
        let n = layers.iter().map(LayerSpec::param_count).sum();
        Ok(Network {
            layers,
            params: vec![0.0; n],
        })
    }

    /// Seeded initialization: He-normal weights (`N(0, 2/in)`) for ReLU
    /// layers, Xavier-normal (`N(0, 2/(in+out))`) otherwise, zero biases.
    pub fn init(layers: Vec<LayerSpec>, rng: &mut Rng) -> Result<Self> {
        let mut net = Self::zeros(layers)?;
        let mut offset = 0;
        for l in &net.layers {
            let var = match l.activation {
                Activation::Relu => 2.0 / l.in_dim as f64,
                _ => 2.0 / (l.in_dim + l.out_dim) as f64,
            };
            let sd = var.sqrt();
            for w in &mut net.params[offset..offset + l.in_dim * l.out_dim] {
                *w = sd * rng.normal();
            }
            offset += l.param_count();
        }
        Ok(net)
    }

    pub fn from_params(layers: Vec<LayerSpec>, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(layers)?;
        if params.len() != net.params.len() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                net.params.len(),
                params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    /// Checks the parameter count against the layout (for deserialized networks).
    pub fn validate(&self) -> Result<()> {
        validate_layers(&self.layers)?;
        let n: usize = self.layers.iter().map(LayerSpec::param_count).sum();
        if n != self.params.len() {
            return Err(Error::Shape(format!("layout needs {n} parameters, found {}", self.params.len())));
        }
        Ok(())
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    /// Offset of each layer's weight block in the flat vector.
    pub fn layout(&self) -> Vec<usize> {
        self.layers
            .iter()
            .scan(0, |off, l| {
                let here = *off;
                *off += l.param_count();
                Some(here)
            })
            .collect()
    }

    fn layer_views(&self, i: usize, offset: usize) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let l = self.layers[i];
        let nw = l.in_dim * l.out_dim;
        let w = ArrayView2::from_shape((l.in_dim, l.out_dim), &self.params[offset..offset + nw]).unwrap();
        let b = ArrayView1::from(&self.params[offset + nw..offset + nw + l.out_dim]);
        (w, b)
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.in_dim() {
            return Err(Error::Shape(format!("batch has {} columns, network expects {}", x.ncols(), self.in_dim())));
        }
        Ok(())
    }

    /// `[n × in_dim] → [n × out_dim]`.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let mut offset = 0;
        let mut h: Option<Array2<f64>> = None;
        for (i, l) in self.layers.iter().enumerate() {
            let (w, b) = self.layer_views(i, offset);
            let mut z = match &h {
                Some(a) => a.dot(&w),
                None => x.dot(&w),
            };
            z += &b;
            z.mapv_inplace(|v| l.activation.apply(v));
            h = Some(z);
            offset += l.param_count();
        }
        Ok(h.unwrap())
    }

    /// Forward pass that records what [`Network::backward_tape`] needs.
    pub fn forward_tape(&self, x: ArrayView2<f64>) -> Result<Tape> {
        self.check_input(&x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut current = x.to_owned();
        let mut offset = 0;
        for (i, l) in self.layers.iter().enumerate() {
            let (w, b) = self.layer_views(i, offset);
            let mut z = current.dot(&w);
            z += &b;
            let a = z.mapv(|v| l.activation.apply(v));
            inputs.push(current);
            pre.push(z);
            current = a;
            offset += l.param_count();
        }
        Ok(Tape {
            inputs,
            pre,
            output: current,
        })
    }

    /// Reverse pass: given `∂L/∂output`, returns `∂L/∂params` and `∂L/∂input`.
    pub fn backward_tape(&self, tape: &Tape, upstream: ArrayView2<f64>) -> Result<Gradients> {
        if upstream.dim() != tape.output.dim() {
            return Err(Error::Shape(format!(
                "upstream gradient {:?} does not match output {:?}",
                upstream.dim(),
                tape.output.dim()
            )));
        }
        let mut grads = vec![0.0; self.params.len()];
        let offsets = self.layout();
        let mut delta = upstream.to_owned();
        for i in (0..self.layers.len()).rev() {
            let l = self.layers[i];
            let act = l.activation;
            // delta <- ∂L/∂z
            ndarray::Zip::from(&mut delta)
                .and(&tape.pre[i])
                .for_each(|d, &z| *d *= act.derivative(z));
            let off = offsets[i];
            let nw = l.in_dim * l.out_dim;
            {
                let (gw, gb) = grads[off..off + nw + l.out_dim].split_at_mut(nw);
                let mut gw = ArrayViewMut2::from_shape((l.in_dim, l.out_dim), gw).unwrap();
                gw.assign(&tape.inputs[i].t().dot(&delta));
                let mut gb = ArrayViewMut1::from(gb);
                gb.assign(&delta.sum_axis(Axis(0)));
            }
            let (w, _) = self.layer_views(i, off);
            delta = delta.dot(&w.t());
        }
        Ok(Gradients { params: grads, input: delta })
    }

    /// Convenience wrapper: forward with a tape, then backward.
    pub fn backward(&self, x: ArrayView2<f64>, upstream: ArrayView2<f64>) -> Result<Gradients> {
        let tape = self.forward_tape(x)?;
        self.backward_tape(&tape, upstream)
    }
}

/// Hyperparameters of [`AdamState`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(n_params: usize, config: AdamConfig) -> Self {
        AdamState {
            step: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            config,
        }
    }

    /// One bias-corrected Adam update in place. `maximize` ascends instead of
    /// descending.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], maximize: bool) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "adam state has {} slots, params {}, grads {}",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        let sign = if maximize { -1.0 } else { 1.0 };
        for i in 0..params.len() {
            let g = sign * grads[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

/// Generator: noise → 2 hidden ReLU layers → linear 2-D output.
pub fn generator_layers(noise_dim: usize, hidden: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::new(noise_dim, hidden, Activation::Relu),
        LayerSpec::new(hidden, hidden, Activation::Relu),
        LayerSpec::new(hidden, 2, Activation::Identity),
    ]
}

/// Discriminator: 2-D input → one ReLU layer → scalar output with the given
/// activation (softplus for positive scores, sigmoid for probabilities).
pub fn discriminator_layers(hidden: usize, output: Activation) -> Vec<LayerSpec> {
    vec![
        LayerSpec::new(2, hidden, Activation::Relu),
        LayerSpec::new(hidden, 1, output),
    ]
}
