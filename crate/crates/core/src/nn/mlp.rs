use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{dot, ParamVector};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
}

/// Fully connected topology: `layer_sizes[0]` inputs, ReLU hidden layers and a
/// single linear head with `layer_sizes.last()` classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Network {
    layer_sizes: Vec<usize>,
    activation: Activation,
}

/// Offsets of one dense layer inside the flat parameter vector. Weights are
/// stored `[out, in]` row-major, followed by `out` biases.
#[derive(Debug, Clone, Copy)]
struct Layer {
    inputs: usize,
    outputs: usize,
    weights: usize,
    biases: usize,
}

impl Network {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 3 {
            return Err(Error::InvalidArgument(format!(
                "network needs an input, at least one hidden layer and an output; got {layer_sizes:?}"
            )));
        }
        if layer_sizes.iter().any(|&n| n == 0) {
            return Err(Error::InvalidArgument(format!(
                "layer sizes must be positive; got {layer_sizes:?}"
            )));
        }
        Ok(Self {
            layer_sizes,
            activation: Activation::Relu,
        })
    }

    /// `[input, hidden..., classes]`.
    pub fn mlp(input: usize, hidden: &[usize], classes: usize) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input);
        sizes.extend_from_slice(hidden);
        sizes.push(classes);
        Self::new(sizes)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Number of dense layers (hidden + head).
    pub fn depth(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    fn layers(&self) -> Vec<Layer> {
        let mut offset = 0;
        self.layer_sizes
            .windows(2)
            .map(|w| {
                let layer = Layer {
                    inputs: w[0],
                    outputs: w[1],
                    weights: offset,
                    biases: offset + w[0] * w[1],
                };
                offset += w[0] * w[1] + w[1];
                layer
            })
            .collect()
    }

    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        let mut p = ParamVector::zeros(self.num_params());
        let values = p.as_mut_slice();
        for layer in self.layers() {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            for w in &mut values[layer.weights..layer.biases] {
                *w = rng.gen_range(-bound..=bound);
            }
        }
        p
    }

    fn check_params(&self, params: &ParamVector) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::shape("network parameters", self.num_params(), params.len()));
        }
        Ok(())
    }
}

/// Intermediate values of one forward pass, consumed by [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layer_sizes: Vec<usize>,
    batch: usize,
    /// Input to each dense layer: the batch itself, then each hidden activation.
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of each dense layer; the last entry holds the logits.
    pre: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn depth(&self) -> usize {
        self.pre.len()
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Pre-activations of dense layer `l`, `[batch, out]` row-major.
    pub fn pre_activations(&self, l: usize) -> &[f64] {
        &self.pre[l]
    }
}

/// Forward pass over a single example `[d]` or a batch `[B, d]`.
///
/// Logits keep the leading layout of `x`: `[C]` for a single example,
/// `[B, C]` for a batch.
pub fn forward(net: &Network, params: &ParamVector, x: &Tensor) -> Result<(Tensor, ForwardCache)> {
    net.check_params(params)?;
    if x.cols() != net.input_size() {
        return Err(Error::shape("forward input", net.input_size(), x.cols()));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("forward input"));
    }
    let batch = x.rows();
    let layers = net.layers();
    let p = params.as_slice();

    let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(layers.len());
    let mut pre: Vec<Vec<f64>> = Vec::with_capacity(layers.len());
    inputs.push(x.data().to_vec());

    for (l, layer) in layers.iter().enumerate() {
        let a = &inputs[l];
        let w = &p[layer.weights..layer.biases];
        let b = &p[layer.biases..layer.biases + layer.outputs];
        let mut z = vec![0.0; batch * layer.outputs];
        for (row, zr) in a.chunks_exact(layer.inputs).zip(z.chunks_exact_mut(layer.outputs)) {
            for (o, zo) in zr.iter_mut().enumerate() {
                *zo = b[o] + dot(&w[o * layer.inputs..(o + 1) * layer.inputs], row);
            }
        }
        // Any non-finite weight or bias poisons at least one pre-activation.
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("forward pre-activations"));
        }
        if l + 1 < layers.len() {
            inputs.push(z.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect());
        }
        pre.push(z);
    }

    let classes = net.output_size();
    let shape = if x.shape().len() == 1 {
        vec![classes]
    } else {
        vec![batch, classes]
    };
    let logits = Tensor::new(shape, pre.last().unwrap().clone())?;
    Ok((
        logits,
        ForwardCache {
            layer_sizes: net.layer_sizes.clone(),
            batch,
            inputs,
            pre,
        },
    ))
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Cross-entropy `-log softmax(logits)[label]`, stabilised by max-subtraction.
pub fn loss_xent(logits: &[f64], label: usize) -> Result<f64> {
    if label >= logits.len() {
        return Err(Error::LabelOutOfRange {
            label,
            classes: logits.len(),
        });
    }
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|&z| (z - m).exp()).sum::<f64>().ln();
    Ok(lse - logits[label])
}

fn check_labels(labels: &[usize], batch: usize, classes: usize) -> Result<()> {
    if labels.len() != batch {
        return Err(Error::shape("labels", batch, labels.len()));
    }
    if let Some(&label) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::LabelOutOfRange { label, classes });
    }
    Ok(())
}

/// Gradient of the mean cross-entropy over the cached batch.
pub fn backward(
    net: &Network,
    params: &ParamVector,
    cache: &ForwardCache,
    labels: &[usize],
) -> Result<ParamVector> {
    net.check_params(params)?;
    if cache.layer_sizes != net.layer_sizes || cache.depth() != net.depth() {
        return Err(Error::shape(
            "stale forward cache",
            format!("{:?}", net.layer_sizes),
            format!("{:?}", cache.layer_sizes),
        ));
    }
    let batch = cache.batch;
    let classes = net.output_size();
    check_labels(labels, batch, classes)?;

    let layers = net.layers();
    let p = params.as_slice();
    let mut grad = ParamVector::zeros(p.len());
    let g = grad.as_mut_slice();

    // dL/dz for the head, already divided by the batch size.
    let inv_b = 1.0 / batch as f64;
    let mut delta: Vec<f64> = Vec::with_capacity(batch * classes);
    for (row, &y) in cache.pre.last().unwrap().chunks_exact(classes).zip(labels) {
        let s = softmax(row);
        delta.extend(s.iter().enumerate().map(|(c, &v)| {
            let t = if c == y { 1.0 } else { 0.0 };
            (v - t) * inv_b
        }));
    }

    for l in (0..layers.len()).rev() {
        let layer = layers[l];
        let a = &cache.inputs[l];
        let w = &p[layer.weights..layer.biases];
        {
            let (gw, gb) = g[layer.weights..layer.biases + layer.outputs].split_at_mut(layer.biases - layer.weights);
            for (dr, ar) in delta.chunks_exact(layer.outputs).zip(a.chunks_exact(layer.inputs)) {
                for (o, &d) in dr.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    for (gwi, &ai) in gw[o * layer.inputs..(o + 1) * layer.inputs].iter_mut().zip(ar) {
                        *gwi += d * ai;
                    }
                }
            }
        }
        if l == 0 {
            break;
        }
        let prev_pre = &cache.pre[l - 1];
        let mut prev = vec![0.0; batch * layer.inputs];
        for ((dr, pr), zr) in delta
            .chunks_exact(layer.outputs)
            .zip(prev.chunks_exact_mut(layer.inputs))
            .zip(prev_pre.chunks_exact(layer.inputs))
        {
            for (o, &d) in dr.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (pi, &wi) in pr.iter_mut().zip(&w[o * layer.inputs..(o + 1) * layer.inputs]) {
                    *pi += d * wi;
                }
            }
            // ReLU subgradient: 1 for z > 0, else 0 (including z == 0).
            for (pi, &z) in pr.iter_mut().zip(zr) {
                if z <= 0.0 {
                    *pi = 0.0;
                }
            }
        }
        delta = prev;
    }

    if !grad.is_finite() {
        return Err(Error::NonFinite("backward"));
    }
    Ok(grad)
}

/// Mean cross-entropy over a batch.
pub fn mean_loss(net: &Network, params: &ParamVector, x: &Tensor, labels: &[usize]) -> Result<f64> {
    let (logits, _) = forward(net, params, x)?;
    check_labels(labels, x.rows(), net.output_size())?;
    let classes = net.output_size();
    let mut total = 0.0;
    for (row, &y) in logits.data().chunks_exact(classes).zip(labels) {
        total += loss_xent(row, y)?;
    }
    Ok(total / labels.len() as f64)
}

/// Mean loss and its exact gradient in one forward/backward pass.
pub fn loss_and_grad(
    net: &Network,
    params: &ParamVector,
    x: &Tensor,
    labels: &[usize],
) -> Result<(f64, ParamVector)> {
    let (logits, cache) = forward(net, params, x)?;
    let grad = backward(net, params, &cache, labels)?;
    let classes = net.output_size();
    let mut total = 0.0;
    for (row, &y) in logits.data().chunks_exact(classes).zip(labels) {
        total += loss_xent(row, y)?;
    }
    Ok((total / labels.len() as f64, grad))
}
