use alloc::vec;
use alloc::vec::Vec;

use super::dense::{Gradients, Network, Scalar};
use super::OptimizerKind;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

/// Adam (or plain SGD) state for one network; moments are kept in `f64`.
#[derive(Debug, Clone)]
pub struct Adam {
    kind: OptimizerKind,
    learning_rate: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new<T: Scalar>(net: &Network<T>, kind: OptimizerKind, learning_rate: f64) -> Self {
        let sizes: Vec<usize> = net
            .layers
            .iter()
            .flat_map(|l| [l.weights.len(), l.biases.len()])
            .collect();
        let zeros = || sizes.iter().map(|&n| vec![0.0; n]).collect::<Vec<_>>();
        Adam {
            kind,
            learning_rate,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn apply<T: Scalar>(&mut self, net: &mut Network<T>, grads: &Gradients) {
        self.step += 1;
        let bias1 = 1.0 - libm::pow(BETA1, f64::from(self.step));
        let bias2 = 1.0 - libm::pow(BETA2, f64::from(self.step));
        let params = net
            .layers
            .iter_mut()
            .flat_map(|l| [&mut l.weights, &mut l.biases]);
        let grads = grads.layers.iter().flat_map(|g| [&g.weights, &g.biases]);
        for (((p, g), m), v) in params.zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                let delta = match self.kind {
                    OptimizerKind::Sgd => self.learning_rate * g[i],
                    OptimizerKind::Adam => {
                        m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
                        v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
                        let m_hat = m[i] / bias1;
                        let v_hat = v[i] / bias2;
                        self.learning_rate * m_hat / (libm::sqrt(v_hat) + EPSILON)
                    }
                };
                p[i] = T::of(p[i].into() - delta);
            }
        }
    }
}
