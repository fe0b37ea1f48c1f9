use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dense::{sigmoid, DropoutMasks, Gradients, Network};
use super::train::Adam;
use super::NetworkConfig;
use crate::error::{Error, Result};

/// One labelled feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: Vec<f32>,
    /// 1.0 for read, 0.0 for negative.
    pub label: f32,
}

/// A user's trained network together with the config it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct UserModel {
    pub user_id: String,
    pub config: NetworkConfig,
    pub network: Network<f32>,
    /// Mean training loss of every epoch.
    pub loss_trace: Vec<f64>,
}

impl UserModel {
    /// Fresh weights drawn from `config.seed`.
    pub fn init(user_id: &str, config: NetworkConfig) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let network = Network::init(&config, &mut rng)?;
        Ok(UserModel {
            user_id: user_id.to_string(),
            config,
            network,
            loss_trace: Vec::new(),
        })
    }

    /// Read probability with dropout disabled.
    pub fn read_probability(&self, features: &[f32]) -> Result<f64> {
        Ok(self.network.forward(features, None)?.read_probability())
    }

    /// Read probability with freshly sampled dropout masks.
    pub fn read_probability_train<R: rand::Rng>(
        &self,
        features: &[f32],
        rng: &mut R,
    ) -> Result<f64> {
        let masks = DropoutMasks::sample(&self.network, f64::from(self.config.dropout), rng);
        Ok(self
            .network
            .forward(features, Some(&masks))?
            .read_probability())
    }

    /// Scores every row in input order.
    pub fn predict<'a>(&self, rows: impl IntoIterator<Item = &'a [f32]>) -> Result<Vec<f64>> {
        rows.into_iter().map(|r| self.read_probability(r)).collect()
    }

    /// Mini-batch training on squared error of the read probability.
    ///
    /// Every epoch visits the examples in a fresh shuffled order, in batches
    /// of `config.batch_size` (the last one may be shorter). Shuffling and
    /// dropout draw from a stream seeded by `config.seed`, so the result is a
    /// pure function of the model, the examples and the config.
    pub fn train(&mut self, examples: &[Example]) -> Result<()> {
        if examples.is_empty() {
            return Err(Error::EmptyPool);
        }
        if let Some(e) = examples
            .iter()
            .find(|e| e.features.len() != self.config.input_dim)
        {
            return Err(Error::DimensionMismatch {
                expected: self.config.input_dim,
                found: e.features.len(),
            });
        }
        let positives = examples.iter().filter(|e| e.label > 0.5).count();
        if positives == 0 || positives == examples.len() {
            log::warn!("user {}: training pool holds a single class", self.user_id);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(1);
        let mut optimizer = Adam::new(
            &self.network,
            self.config.optimizer,
            f64::from(self.config.learning_rate),
        );
        let mut grads = Gradients::zeros_like(&self.network);
        let mut order: Vec<usize> = (0..examples.len()).collect();
        let dropout = f64::from(self.config.dropout);
        self.loss_trace.clear();
        for epoch in 0..self.config.epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for batch in order.chunks(self.config.batch_size) {
                grads.clear();
                let scale = 1.0 / batch.len() as f64;
                for &i in batch {
                    let ex = &examples[i];
                    let masks = (dropout > 0.0)
                        .then(|| DropoutMasks::sample(&self.network, dropout, &mut rng));
                    let trace = self.network.forward(&ex.features, masks.as_ref())?;
                    let p = sigmoid(trace.logits()[1].into());
                    let err = p - f64::from(ex.label);
                    epoch_loss += err * err;
                    let g = 2.0 * err * p * (1.0 - p) * scale;
                    self.network
                        .backward(&trace, &[0.0, g], masks.as_ref(), &mut grads);
                }
                optimizer.apply(&mut self.network, &grads);
            }
            let mean = epoch_loss / examples.len() as f64;
            if !mean.is_finite() {
                return Err(Error::NonFinite(format!(
                    "training loss diverged in epoch {}",
                    epoch + 1
                )));
            }
            self.loss_trace.push(mean);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn small_config(seed: u64) -> NetworkConfig {
        let mut c = NetworkConfig::new(20, 12);
        c.bottleneck = vec![10, 8, 6, 6];
        c.trunk = vec![12, 10, 8, 6, 4, 2];
        c.seed = seed;
        c
    }

    #[test]
    fn init_is_deterministic() {
        let a = UserModel::init("u", small_config(5)).unwrap();
        let b = UserModel::init("u", small_config(5)).unwrap();
        assert_eq!(a, b);
        assert_ne!(
            a.network,
            UserModel::init("u", small_config(6)).unwrap().network
        );
    }

    #[test]
    fn inference_is_repeatable_and_bounded() {
        let m = UserModel::init("u", small_config(1)).unwrap();
        let x: Vec<f32> = (0..20).map(|i| (i as f32).cos()).collect();
        let p = m.read_probability(&x).unwrap();
        assert_eq!(p, m.read_probability(&x).unwrap());
        assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn zero_logit_gives_one_half() {
        let mut m = UserModel::init("u", small_config(1)).unwrap();
        let last = m.network.layers.last_mut().unwrap();
        last.weights.iter_mut().for_each(|w| *w = 0.0);
        assert_eq!(m.read_probability(&[0.3; 20]).unwrap(), 0.5);
    }

    #[test]
    fn empty_and_mismatched_pools() {
        let mut m = UserModel::init("u", small_config(1)).unwrap();
        assert_eq!(m.train(&[]), Err(Error::EmptyPool));
        let bad = [Example {
            features: vec![0.0; 3],
            label: 1.0,
        }];
        assert!(matches!(
            m.train(&bad),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn constant_target_is_learned() {
        let mut cfg = small_config(3);
        cfg.learning_rate = 1e-2;
        cfg.epochs = 40;
        let mut m = UserModel::init("u", cfg).unwrap();
        let examples: Vec<Example> = (0..30)
            .map(|k| Example {
                features: (0..20)
                    .map(|i| ((i * 7 + k * 3) as f32 * 0.1).sin())
                    .collect(),
                label: 1.0,
            })
            .collect();
        m.train(&examples).unwrap();
        assert_eq!(m.loss_trace.len(), 40);
        for e in &examples {
            assert!(m.read_probability(&e.features).unwrap() >= 0.9);
        }
    }
}
