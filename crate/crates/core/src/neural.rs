//! Small dense networks with hand-written backpropagation, Adam, and target
//! network updates. Batches are row-major: one sample per row.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, x: &mut Array2<f64>) {
        match self {
            Activation::Tanh => x.mapv_inplace(f64::tanh),
            Activation::Relu => x.mapv_inplace(|v| v.max(0.0)),
            Activation::Identity => {}
        }
    }

    /// Multiplies `grad` by the derivative, expressed through the activation
    /// output `y`.
    fn backprop(self, y: &Array2<f64>, grad: &mut Array2<f64>) {
        match self {
            Activation::Tanh => Zip::from(grad).and(y).for_each(|g, &y| *g *= 1.0 - y * y),
            Activation::Relu => Zip::from(grad).and(y).for_each(|g, &y| {
                if y <= 0.0 {
                    *g = 0.0
                }
            }),
            Activation::Identity => {}
        }
    }
}

/// Weights are stored `[fan_in, fan_out]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weights: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub dims: Vec<usize>,
    pub hidden: Activation,
    pub output: Activation,
    pub layers: Vec<Layer>,
}

/// Layer outputs kept from a forward pass; `outputs[0]` is the input batch.
#[derive(Debug, Clone)]
pub struct Trace {
    outputs: Vec<Array2<f64>>,
}

impl Trace {
    pub fn output(&self) -> &Array2<f64> {
        self.outputs.last().expect("trace holds at least the input")
    }
}

/// Parameter-shaped gradient (or moment) buffers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| Layer::zeros(l.weights.nrows(), l.weights.ncols()))
                .collect(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }
}

fn flatten(layers: &[Layer]) -> Vec<f64> {
    layers
        .iter()
        .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
        .collect()
}

impl Mlp {
    /// Uniform `±1/sqrt(fan_in)` initialization; the last layer is further
    /// multiplied by `output_scale`.
    pub fn new<R: Rng + ?Sized>(
        dims: &[usize],
        hidden: Activation,
        output: Activation,
        output_scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(dims, hidden, output)?;
        let last = net.layers.len() - 1;
        for (i, layer) in net.layers.iter_mut().enumerate() {
            let bound = 1.0 / (layer.weights.nrows() as f64).sqrt();
            let scale = if i == last { output_scale } else { 1.0 };
            layer
                .weights
                .mapv_inplace(|_| scale * rng.random_range(-bound..=bound));
            layer
                .bias
                .mapv_inplace(|_| scale * rng.random_range(-bound..=bound));
        }
        Ok(net)
    }

    pub fn zeros(dims: &[usize], hidden: Activation, output: Activation) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::config(format!("invalid layer sizes {dims:?}")));
        }
        Ok(Self {
            dims: dims.to_vec(),
            hidden,
            output,
            layers: dims.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("at least two dims")
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output
        } else {
            self.hidden
        }
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                actual: cols,
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x.len())?;
        let batch = ArrayView2::from_shape((1, x.len()), x).expect("contiguous slice");
        Ok(self.forward_batch(batch)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        let mut h = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            h = h.dot(&layer.weights) + &layer.bias;
            self.activation(i).apply(&mut h);
        }
        Ok(h)
    }

    pub fn forward_trace(&self, x: ArrayView2<f64>) -> Result<Trace> {
        self.check_input(x.ncols())?;
        let mut outputs = Vec::with_capacity(self.layers.len() + 1);
        outputs.push(x.to_owned());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut h = outputs[i].dot(&layer.weights) + &layer.bias;
            self.activation(i).apply(&mut h);
            outputs.push(h);
        }
        Ok(Trace { outputs })
    }

    /// Reverse pass. `grad_output` is dL/d(output) for the traced batch;
    /// returns the parameter gradient and dL/d(input).
    pub fn backward(
        &self,
        trace: &Trace,
        grad_output: ArrayView2<f64>,
    ) -> (Gradients, Array2<f64>) {
        let mut grads = Gradients::zeros_like(self);
        let mut g = grad_output.to_owned();
        for i in (0..self.layers.len()).rev() {
            self.activation(i).backprop(&trace.outputs[i + 1], &mut g);
            let input = &trace.outputs[i];
            grads.layers[i].weights = input.t().dot(&g);
            grads.layers[i].bias = g.sum_axis(Axis(0));
            g = g.dot(&self.layers[i].weights.t());
        }
        (grads, g)
    }

    /// Loss and parameter gradient for a scalar loss of the batch output.
    /// `loss_fn` returns the loss and its derivative with respect to the
    /// output.
    pub fn grad<F>(&self, x: ArrayView2<f64>, loss_fn: F) -> Result<(f64, Gradients)>
    where
        F: FnOnce(&Array2<f64>) -> (f64, Array2<f64>),
    {
        let trace = self.forward_trace(x)?;
        let (loss, d_out) = loss_fn(trace.output());
        let (grads, _) = self.backward(&trace, d_out.view());
        Ok((loss, grads))
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Parameters in layer order, weights (row-major) before biases.
    pub fn params(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Dimension {
                expected: self.param_count(),
                actual: flat.len(),
            });
        }
        let mut values = flat.iter().copied();
        for layer in &mut self.layers {
            layer
                .weights
                .iter_mut()
                .chain(layer.bias.iter_mut())
                .for_each(|p| *p = values.next().expect("length checked"));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    fn same_shape(&self, other: &Mlp) -> Result<()> {
        if self.dims != other.dims || self.hidden != other.hidden || self.output != other.output {
            return Err(Error::config(format!(
                "network architectures differ: {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }

    /// `self <- rho * online + (1 - rho) * self`.
    pub fn soft_update(&mut self, online: &Mlp, rho: f64) -> Result<()> {
        self.same_shape(online)?;
        for (t, o) in self.layers.iter_mut().zip(&online.layers) {
            Zip::from(&mut t.weights)
                .and(&o.weights)
                .for_each(|t, &o| *t = rho * o + (1.0 - rho) * *t);
            Zip::from(&mut t.bias)
                .and(&o.bias)
                .for_each(|t, &o| *t = rho * o + (1.0 - rho) * *t);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Gradients,
    pub v: Gradients,
}

impl AdamState {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    /// One bias-corrected Adam descent step on `net`.
    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != net.layers.len() || self.m.layers.len() != net.layers.len() {
            return Err(Error::Dimension {
                expected: net.layers.len(),
                actual: grads.layers.len(),
            });
        }
        self.step += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        let lr = self.lr;
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for (i, layer) in net.layers.iter_mut().enumerate() {
            let (m, v, g) = (
                &mut self.m.layers[i],
                &mut self.v.layers[i],
                &grads.layers[i],
            );
            if g.weights.dim() != layer.weights.dim() || g.bias.dim() != layer.bias.dim() {
                return Err(Error::Dimension {
                    expected: layer.weights.len(),
                    actual: g.weights.len(),
                });
            }
            Zip::from(&mut layer.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .and(&g.weights)
                .for_each(|p, m, v, &g| update(p, m, v, g));
            Zip::from(&mut layer.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .and(&g.bias)
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
        Ok(())
    }
}

/// Mean squared error over a `[n, 1]` output and its output gradient.
pub fn mse(output: &Array2<f64>, target: &Array1<f64>) -> (f64, Array2<f64>) {
    let n = output.nrows() as f64;
    let diff = &output.column(0) - target;
    let loss = diff.mapv(|d| d * d).sum() / n;
    let grad = (diff * (2.0 / n)).insert_axis(Axis(1));
    (loss, grad)
}
