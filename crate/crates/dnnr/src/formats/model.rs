//! `DNNR-MOD`: one trained user network.
//!
//! ```text
//! magic "DNNRMOD1" | u32 version
//! u16 user-id length | user-id bytes
//! config: u32 input_dim | u32 embed_dim
//!         u32 n | n × u32 bottleneck widths
//!         u32 n | n × u32 trunk widths
//!         f32 dropout | u32 epochs | u32 batch_size | f32 learning_rate
//!         u8 optimizer (0 Adam, 1 SGD) | u64 seed
//! u32 n | n × f64 per-epoch loss
//! per layer, bottleneck first: u32 rows | u32 cols | rows × cols f32 weights | cols f32 biases
//! u64 FNV-1a checksum
//! ```
//!
//! `rows` is the layer's input width and `cols` its output width.

use std::path::Path;

use dnnr_core::network::{Dense, Network};
use dnnr_core::{NetworkConfig, OptimizerKind, UserModel};

use super::{Reader, Writer};
use crate::error::{DnnrError, Result};
use crate::fsutil;

pub const MAGIC: &[u8; 8] = b"DNNRMOD1";
pub const VERSION: u32 = 1;

fn u32_of(v: usize) -> Result<u32, String> {
    u32::try_from(v).map_err(|_| format!("{v} does not fit u32"))
}

pub fn encode(model: &UserModel) -> Result<Vec<u8>, String> {
    let c = &model.config;
    let mut w = Writer::default();
    w.bytes(MAGIC);
    w.u32(VERSION);
    w.short_str(&model.user_id)?;
    w.u32(u32_of(c.input_dim)?);
    w.u32(u32_of(c.embed_dim)?);
    for widths in [&c.bottleneck, &c.trunk] {
        w.u32(u32_of(widths.len())?);
        for &x in widths.iter() {
            w.u32(u32_of(x)?);
        }
    }
    w.f32(c.dropout);
    w.u32(u32_of(c.epochs)?);
    w.u32(u32_of(c.batch_size)?);
    w.f32(c.learning_rate);
    w.u8(c.optimizer.code());
    w.u64(c.seed);
    w.u32(u32_of(model.loss_trace.len())?);
    model.loss_trace.iter().for_each(|&l| w.f64(l));
    for layer in &model.network.layers {
        w.u32(u32_of(layer.inputs)?);
        w.u32(u32_of(layer.outputs)?);
        layer.weights.iter().for_each(|&x| w.f32(x));
        layer.biases.iter().for_each(|&x| w.f32(x));
    }
    Ok(w.finish())
}

pub fn decode(bytes: &[u8]) -> Result<UserModel, String> {
    let mut r = Reader::checked(bytes)?;
    if r.take(8)? != MAGIC {
        return Err("bad magic, not a DNNR-MOD file".into());
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let user_id = r.short_str()?;
    let input_dim = r.u32()? as usize;
    let embed_dim = r.u32()? as usize;
    let mut widths = || -> Result<Vec<usize>, String> {
        let n = r.u32()? as usize;
        if n > 64 {
            return Err(format!("implausible layer count {n}"));
        }
        (0..n).map(|_| r.u32().map(|v| v as usize)).collect()
    };
    let bottleneck = widths()?;
    let trunk = widths()?;
    let dropout = r.f32()?;
    let epochs = r.u32()? as usize;
    let batch_size = r.u32()? as usize;
    let learning_rate = r.f32()?;
    let optimizer = OptimizerKind::from_code(r.u8()?).ok_or("unknown optimizer code")?;
    let seed = r.u64()?;
    let config = NetworkConfig {
        input_dim,
        embed_dim,
        bottleneck,
        trunk,
        dropout,
        epochs,
        batch_size,
        learning_rate,
        optimizer,
        seed,
    };
    config.validate().map_err(|e| e.to_string())?;
    let n_loss = r.u32()? as usize;
    let loss_trace = (0..n_loss)
        .map(|_| r.f64())
        .collect::<Result<Vec<_>, _>>()?;
    let mut layers = Vec::new();
    for (k, (inputs, outputs, activation)) in config.layer_shapes().into_iter().enumerate() {
        let (rows, cols) = (r.u32()? as usize, r.u32()? as usize);
        if (rows, cols) != (inputs, outputs) {
            return Err(format!(
                "layer {}: shape {rows}x{cols}, config implies {inputs}x{outputs}",
                k + 1
            ));
        }
        let mut layer = Dense {
            inputs,
            outputs,
            weights: Vec::new(),
            biases: Vec::new(),
            activation,
        };
        r.f32s(rows * cols, &mut layer.weights)?;
        r.f32s(cols, &mut layer.biases)?;
        layers.push(layer);
    }
    r.expect_end()?;
    let network = Network {
        input_dim,
        embed_dim,
        layers,
        bottleneck_len: config.bottleneck.len(),
    };
    Ok(UserModel {
        user_id,
        config,
        network,
        loss_trace,
    })
}

pub fn save(path: &Path, model: &UserModel) -> Result<()> {
    let bytes = encode(model).map_err(|m| DnnrError::format(path, m))?;
    fsutil::write_atomic(path, &bytes)
}

pub fn load(path: &Path) -> Result<UserModel> {
    decode(&fsutil::read(path)?).map_err(|m| DnnrError::format(path, m))
}

/// File name for a user's model inside a models directory.
pub fn file_name(user_id: &str) -> String {
    let safe: String = user_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{safe}.dnnrmod")
}

/// `manifest.json` of a models directory.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelManifest {
    pub format: String,
    pub version: u32,
    pub sampler: String,
    pub feature_set: String,
    pub max_samples: usize,
    pub seed: u64,
    pub input_dim: usize,
    pub embed_dim: usize,
    pub users: Vec<ManifestEntry>,
    /// Users without a model and why.
    pub skipped: Vec<ManifestSkip>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ManifestEntry {
    pub user: String,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ManifestSkip {
    pub user: String,
    pub reason: String,
}

pub const MANIFEST: &str = "manifest.json";
pub const MANIFEST_FORMAT: &str = "dnnr-models";

impl ModelManifest {
    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        fsutil::write_atomic(&dir.join(MANIFEST), s.as_bytes())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let bytes = fsutil::read(&path)?;
        let m: ModelManifest =
            serde_json::from_slice(&bytes).map_err(|e| DnnrError::format(&path, e.to_string()))?;
        if m.format != MANIFEST_FORMAT || m.version != VERSION {
            return Err(DnnrError::format(
                &path,
                format!("not a {MANIFEST_FORMAT} v{VERSION} manifest"),
            ));
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> UserModel {
        let mut c = NetworkConfig::new(612, 384);
        c.seed = 99;
        let mut m = UserModel::init("U397059", c).unwrap();
        m.loss_trace = vec![0.25, 0.2, 0.125];
        m
    }

    #[test]
    fn round_trip_is_bitwise() {
        let m = model();
        let back = decode(&encode(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        for (a, b) in m.network.layers.iter().zip(&back.network.layers) {
            let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.weights), bits(&b.weights));
        }
    }

    #[test]
    fn rejects_bad_magic_and_checksum() {
        let bytes = encode(&model()).unwrap();
        let mut bad = bytes.clone();
        bad[3] ^= 0xff;
        assert!(decode(&bad).unwrap_err().contains("checksum"));
        let mut payload = bytes[..bytes.len() - 8].to_vec();
        payload[..8].copy_from_slice(b"DNNREMB1");
        let sum = dnnr_core::hashing::fnv1a(&payload);
        payload.extend_from_slice(&sum.to_le_bytes());
        assert!(decode(&payload).unwrap_err().contains("magic"));
    }

    #[test]
    fn rejects_other_versions() {
        let bytes = encode(&model()).unwrap();
        let mut payload = bytes[..bytes.len() - 8].to_vec();
        payload[8..12].copy_from_slice(&2u32.to_le_bytes());
        let sum = dnnr_core::hashing::fnv1a(&payload);
        payload.extend_from_slice(&sum.to_le_bytes());
        assert!(decode(&payload).unwrap_err().contains("version"));
    }

    #[test]
    fn file_names_are_path_safe() {
        assert_eq!(file_name("U1"), "U1.dnnrmod");
        assert_eq!(file_name("../x"), "___x.dnnrmod");
    }
}
