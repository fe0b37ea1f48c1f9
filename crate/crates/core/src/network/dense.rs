use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;

use num_traits::Float;
use rand::Rng;

use super::NetworkConfig;
use crate::error::{Error, Result};

/// Floating-point type for weights and activations. Production models use
/// `f32`; gradient checks run the same code in `f64`.
pub trait Scalar: Float + Into<f64> + Debug + Default + Send + Sync + 'static {
    fn of(x: f64) -> Self;
}

impl Scalar for f32 {
    fn of(x: f64) -> Self {
        x as f32
    }
}

impl Scalar for f64 {
    fn of(x: f64) -> Self {
        x
    }
}

/// Keeps the standardization finite on constant inputs.
const NORM_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

/// Fully connected layer. `weights` is `inputs × outputs`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<T>,
    pub biases: Vec<T>,
    pub activation: Activation,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![T::zero(); inputs * outputs],
            biases: vec![T::zero(); outputs],
            activation,
        }
    }

    /// He-uniform for ReLU layers, Xavier-uniform otherwise; zero biases.
    pub fn init<R: Rng>(
        inputs: usize,
        outputs: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = match activation {
            Activation::Relu => libm::sqrt(6.0 / inputs as f64),
            Activation::Tanh | Activation::Linear => libm::sqrt(6.0 / (inputs + outputs) as f64),
        };
        let mut layer = Self::zeros(inputs, outputs, activation);
        for w in layer.weights.iter_mut() {
            *w = T::of(rng.random_range(-limit..limit));
        }
        layer
    }

    pub fn forward(&self, x: &[T], out: &mut Vec<T>) {
        out.clear();
        out.extend_from_slice(&self.biases);
        for (i, &xi) in x.iter().enumerate() {
            if xi == T::zero() {
                continue;
            }
            let row = &self.weights[i * self.outputs..(i + 1) * self.outputs];
            for (y, &w) in out.iter_mut().zip(row) {
                *y = *y + xi * w;
            }
        }
        match self.activation {
            Activation::Relu => out.iter_mut().for_each(|y| *y = y.max(T::zero())),
            Activation::Tanh => out.iter_mut().for_each(|y| *y = y.tanh()),
            Activation::Linear => {}
        }
    }

    /// Accumulates this layer's parameter gradients given its `input`, its
    /// post-activation `output` and `dL/doutput`. Returns `dL/dinput` when
    /// `want_input_grad` is set.
    fn backward(
        &self,
        input: &[T],
        output: &[T],
        grad_out: &[f64],
        acc: &mut LayerGradients,
        want_input_grad: bool,
    ) -> Option<Vec<f64>> {
        let g: Vec<f64> = match self.activation {
            Activation::Relu => grad_out
                .iter()
                .zip(output)
                .map(|(&g, &y)| if y > T::zero() { g } else { 0.0 })
                .collect(),
            Activation::Tanh => grad_out
                .iter()
                .zip(output)
                .map(|(&g, &y)| {
                    let y: f64 = y.into();
                    g * (1.0 - y * y)
                })
                .collect(),
            Activation::Linear => grad_out.to_vec(),
        };
        for (b, &gj) in acc.biases.iter_mut().zip(&g) {
            *b += gj;
        }
        for (i, &xi) in input.iter().enumerate() {
            if xi == T::zero() {
                continue;
            }
            let xi: f64 = xi.into();
            let row = &mut acc.weights[i * self.outputs..(i + 1) * self.outputs];
            for (w, &gj) in row.iter_mut().zip(&g) {
                *w += xi * gj;
            }
        }
        want_input_grad.then(|| {
            (0..self.inputs)
                .map(|i| {
                    let row = &self.weights[i * self.outputs..(i + 1) * self.outputs];
                    row.iter().zip(&g).map(|(&w, &gj)| w.into() * gj).sum()
                })
                .collect()
        })
    }
}

/// Parameter gradients of one layer, same layout as [`Dense`].
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradients>,
}

impl Gradients {
    pub fn zeros_like<T: Scalar>(net: &Network<T>) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradients {
                    weights: vec![0.0; l.weights.len()],
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
        }
    }

    pub fn clear(&mut self) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
            l.biases.iter_mut().for_each(|b| *b = 0.0);
        }
    }
}

/// Inverted-dropout multipliers (0 or `1 / (1 − rate)`) for the two dropout
/// points.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks<T> {
    /// Applied to the standardized concatenation.
    pub after_norm: Vec<T>,
    /// Applied to the input of the output layer.
    pub before_output: Vec<T>,
}

impl<T: Scalar> DropoutMasks<T> {
    pub fn sample<R: Rng>(net: &Network<T>, rate: f64, rng: &mut R) -> Self {
        let keep = T::of(1.0 / (1.0 - rate));
        let mut draw = |n: usize| -> Vec<T> {
            (0..n)
                .map(|_| {
                    if rng.random::<f64>() < rate {
                        T::zero()
                    } else {
                        keep
                    }
                })
                .collect()
        };
        let after_norm = draw(net.concat_width());
        let before_output = draw(net.layers.last().map_or(0, |l| l.inputs));
        DropoutMasks {
            after_norm,
            before_output,
        }
    }
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct Trace<T> {
    /// Input of every layer (after dropout where it applies).
    pub inputs: Vec<Vec<T>>,
    /// Post-activation output of every layer; the last entry holds the logits.
    pub outputs: Vec<Vec<T>>,
    /// Standardized concatenation, before dropout.
    pub normalized: Vec<T>,
    inv_std: f64,
}

impl<T: Scalar> Trace<T> {
    pub fn logits(&self) -> &[T] {
        self.outputs.last().expect("network has layers")
    }

    /// Probability of the read class, `σ(logits[1])`.
    pub fn read_probability(&self) -> f64 {
        sigmoid(self.logits()[1].into())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

/// Per-example standardization to zero mean and unit variance, no learned
/// affine. Returns the normalized vector and `1 / σ`.
pub fn standardize<T: Scalar>(v: &[T]) -> (Vec<T>, f64) {
    let n = v.len() as f64;
    let mean = v.iter().map(|&x| x.into()).sum::<f64>() / n;
    let var = v
        .iter()
        .map(|&x| {
            let d = x.into() - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    let inv_std = 1.0 / libm::sqrt(var + NORM_EPS);
    (
        v.iter()
            .map(|&x| T::of((x.into() - mean) * inv_std))
            .collect(),
        inv_std,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub input_dim: usize,
    pub embed_dim: usize,
    /// Bottleneck layers first, then the trunk.
    pub layers: Vec<Dense<T>>,
    pub bottleneck_len: usize,
}

impl<T: Scalar> Network<T> {
    pub fn init<R: Rng>(config: &NetworkConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let layers = config
            .layer_shapes()
            .into_iter()
            .map(|(i, o, act)| Dense::init(i, o, act, rng))
            .collect();
        Ok(Network {
            input_dim: config.input_dim,
            embed_dim: config.embed_dim,
            layers,
            bottleneck_len: config.bottleneck.len(),
        })
    }

    pub fn concat_width(&self) -> usize {
        self.layers.get(self.bottleneck_len).map_or(0, |l| l.inputs)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    pub fn forward(&self, x: &[T], masks: Option<&DropoutMasks<T>>) -> Result<Trace<T>> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: x.len(),
            });
        }
        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut outputs: Vec<Vec<T>> = Vec::with_capacity(n);
        let mut h = x[..self.embed_dim].to_vec();
        for layer in &self.layers[..self.bottleneck_len] {
            let mut out = Vec::new();
            layer.forward(&h, &mut out);
            inputs.push(core::mem::replace(&mut h, out.clone()));
            outputs.push(out);
        }
        let mut concat = if self.bottleneck_len > 0 {
            h
        } else {
            Vec::new()
        };
        concat.extend_from_slice(&x[self.embed_dim..]);
        let (normalized, inv_std) = standardize(&concat);
        let mut h = normalized.clone();
        if let Some(m) = masks {
            h.iter_mut()
                .zip(&m.after_norm)
                .for_each(|(v, &k)| *v = *v * k);
        }
        for (k, layer) in self.layers[self.bottleneck_len..].iter().enumerate() {
            if k + 1 == n - self.bottleneck_len {
                if let Some(m) = masks {
                    h.iter_mut()
                        .zip(&m.before_output)
                        .for_each(|(v, &k)| *v = *v * k);
                }
            }
            let mut out = Vec::new();
            layer.forward(&h, &mut out);
            inputs.push(core::mem::replace(&mut h, out.clone()));
            outputs.push(out);
        }
        if let Some(bad) = outputs
            .iter()
            .position(|o| o.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::NonFinite(format!(
                "layer {} produced a non-finite activation",
                bad + 1
            )));
        }
        Ok(Trace {
            inputs,
            outputs,
            normalized,
            inv_std,
        })
    }

    /// Backpropagates `dL/dlogits` through a trace, adding parameter
    /// gradients into `acc`.
    pub fn backward(
        &self,
        trace: &Trace<T>,
        grad_logits: &[f64],
        masks: Option<&DropoutMasks<T>>,
        acc: &mut Gradients,
    ) {
        let n = self.layers.len();
        let first_trunk = self.bottleneck_len;
        let mut g = grad_logits.to_vec();
        for l in (first_trunk..n).rev() {
            let mut gi = self.layers[l]
                .backward(
                    &trace.inputs[l],
                    &trace.outputs[l],
                    &g,
                    &mut acc.layers[l],
                    true,
                )
                .expect("requested");
            if let Some(m) = masks {
                let mask = if l == n - 1 {
                    Some(&m.before_output)
                } else if l == first_trunk {
                    Some(&m.after_norm)
                } else {
                    None
                };
                if let Some(mask) = mask {
                    gi.iter_mut().zip(mask).for_each(|(g, &k)| *g *= k.into());
                }
            }
            g = gi;
        }
        if first_trunk == 0 {
            return;
        }
        // Standardization: dx = (g − mean(g) − z · mean(g ⊙ z)) / σ
        let width = g.len() as f64;
        let mean_g = g.iter().sum::<f64>() / width;
        let mean_gz = g
            .iter()
            .zip(&trace.normalized)
            .map(|(&a, &z)| a * z.into())
            .sum::<f64>()
            / width;
        let bottleneck_out = self.layers[first_trunk - 1].outputs;
        let mut g: Vec<f64> = g[..bottleneck_out]
            .iter()
            .zip(&trace.normalized)
            .map(|(&gi, &z)| trace.inv_std * (gi - mean_g - z.into() * mean_gz))
            .collect();
        for l in (0..first_trunk).rev() {
            match self.layers[l].backward(
                &trace.inputs[l],
                &trace.outputs[l],
                &g,
                &mut acc.layers[l],
                l > 0,
            ) {
                Some(gi) => g = gi,
                None => break,
            }
        }
    }

    /// Squared error of the read probability and its gradient for one
    /// example, with optional fixed dropout masks.
    pub fn loss_and_gradients(
        &self,
        x: &[T],
        label: f64,
        masks: Option<&DropoutMasks<T>>,
    ) -> Result<(f64, Gradients)> {
        let trace = self.forward(x, masks)?;
        let p = trace.read_probability();
        let mut grads = Gradients::zeros_like(self);
        self.backward(
            &trace,
            &[0.0, 2.0 * (p - label) * p * (1.0 - p)],
            masks,
            &mut grads,
        );
        Ok(((p - label) * (p - label), grads))
    }
}
