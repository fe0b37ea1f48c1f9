//! The per-user read-probability network.
//!
//! Ten dense layers. The leading embedding slice of the feature vector goes
//! through a four-layer bottleneck (ReLU, ReLU, ReLU, Tanh), the result is
//! concatenated with the remaining features, standardized per example and
//! passed through a six-layer trunk ending in two linear outputs. The read
//! probability is the sigmoid of output 1; training minimizes its squared
//! error against the 0/1 label. Dropout sits after the standardization and
//! in front of the last layer.
//!
//! Feature sets without an embedding slice skip the bottleneck and feed the
//! categorical vector straight into the trunk.

mod dense;
mod model;
mod train;

pub use dense::{
    Activation, Dense, DropoutMasks, Gradients, LayerGradients, Network, Scalar, Trace,
};
pub use model::{Example, UserModel};
pub use train::Adam;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const BOTTLENECK_LAYERS: usize = 4;
pub const TRUNK_LAYERS: usize = 6;
pub const DEFAULT_BOTTLENECK: [usize; BOTTLENECK_LAYERS] = [256, 128, 64, 64];
pub const DEFAULT_TRUNK: [usize; TRUNK_LAYERS] = [256, 128, 64, 32, 16, 2];
pub const DEFAULT_EPOCHS: usize = 15;
pub const DEFAULT_BATCH_SIZE: usize = 60;
pub const DEFAULT_DROPOUT: f32 = 0.2;
pub const DEFAULT_LEARNING_RATE: f32 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

impl OptimizerKind {
    pub fn code(self) -> u8 {
        match self {
            OptimizerKind::Adam => 0,
            OptimizerKind::Sgd => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(OptimizerKind::Adam),
            1 => Some(OptimizerKind::Sgd),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    /// Feature vector length.
    pub input_dim: usize,
    /// Length of the leading slice routed through the bottleneck; 0 skips it.
    pub embed_dim: usize,
    /// Output widths of the bottleneck layers (empty when `embed_dim` is 0).
    pub bottleneck: Vec<usize>,
    /// Output widths of the trunk layers; the last must be 2.
    pub trunk: Vec<usize>,
    pub dropout: f32,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

impl NetworkConfig {
    /// Default architecture and training schedule for the given layout.
    pub fn new(input_dim: usize, embed_dim: usize) -> Self {
        NetworkConfig {
            input_dim,
            embed_dim,
            bottleneck: if embed_dim > 0 {
                DEFAULT_BOTTLENECK.to_vec()
            } else {
                Vec::new()
            },
            trunk: DEFAULT_TRUNK.to_vec(),
            dropout: DEFAULT_DROPOUT,
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            learning_rate: DEFAULT_LEARNING_RATE,
            optimizer: OptimizerKind::Adam,
            seed: 0,
        }
    }

    /// Width entering the trunk after the concatenation.
    pub fn concat_width(&self) -> usize {
        match self.bottleneck.last() {
            Some(&w) if self.embed_dim > 0 => w + self.input_dim - self.embed_dim,
            _ => self.input_dim,
        }
    }

    pub fn layer_count(&self) -> usize {
        self.bottleneck.len() + self.trunk.len()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: alloc::string::String| Err(Error::Config(msg));
        if self.input_dim == 0 {
            return fail("input_dim must be positive".into());
        }
        if self.embed_dim > self.input_dim {
            return fail(format!(
                "embed_dim {} exceeds input_dim {}",
                self.embed_dim, self.input_dim
            ));
        }
        if self.trunk.len() != TRUNK_LAYERS {
            return fail(format!(
                "trunk has {} layers, expected {TRUNK_LAYERS}",
                self.trunk.len()
            ));
        }
        if self.trunk.last() != Some(&2) {
            return fail("the output layer must have width 2".into());
        }
        let expected_bottleneck = if self.embed_dim > 0 {
            BOTTLENECK_LAYERS
        } else {
            0
        };
        if self.bottleneck.len() != expected_bottleneck {
            return fail(format!(
                "bottleneck has {} layers, expected {expected_bottleneck} (network would have {} layers)",
                self.bottleneck.len(),
                self.layer_count()
            ));
        }
        if self.bottleneck.iter().chain(&self.trunk).any(|&w| w == 0) {
            return fail("layer widths must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return fail("epochs and batch_size must be positive".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return fail(format!(
                "learning rate {} must be positive",
                self.learning_rate
            ));
        }
        Ok(())
    }

    /// `(inputs, outputs, activation)` for every layer, bottleneck first.
    pub fn layer_shapes(&self) -> Vec<(usize, usize, Activation)> {
        let mut shapes = vec![];
        let mut width = self.embed_dim;
        for (k, &w) in self.bottleneck.iter().enumerate() {
            let act = if k + 1 == self.bottleneck.len() {
                Activation::Tanh
            } else {
                Activation::Relu
            };
            shapes.push((width, w, act));
            width = w;
        }
        width = self.concat_width();
        for (k, &w) in self.trunk.iter().enumerate() {
            let act = if k + 1 == self.trunk.len() {
                Activation::Linear
            } else {
                Activation::Relu
            };
            shapes.push((width, w, act));
            width = w;
        }
        shapes
    }
}
