use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Activation, DenseLayer, Matrix, Network};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRecord {
    #[serde(rename = "in")]
    inputs: usize,
    out: usize,
    activation: Activation,
    weights: Vec<f64>,
    bias: Vec<f64>,
    mask: Vec<u8>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    version: u32,
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    role: Option<String>,
    layers: Vec<LayerRecord>,
}

/// A network snapshot plus the seed that produced it.
///
/// Serialized as versioned JSON. Floats are written in shortest round-trip form,
/// so `load(save(net))` reproduces every value bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    /// Optional tag, e.g. `"qnet"` for agent networks.
    pub role: Option<String>,
    pub network: Network,
}

impl Checkpoint {
    pub fn new(network: Network, seed: u64) -> Self {
        Self {
            seed,
            role: None,
            network,
        }
    }

    pub fn with_role(mut self, role: impl Into<String>) -> Self {
        self.role = Some(role.into());
        self
    }

    pub fn to_json(&self) -> Result<String> {
        let file = CheckpointFile {
            version: CHECKPOINT_VERSION,
            seed: self.seed,
            role: self.role.clone(),
            layers: self
                .network
                .layers()
                .iter()
                .map(|l| LayerRecord {
                    inputs: l.inputs(),
                    out: l.outputs(),
                    activation: l.activation(),
                    weights: l.weights().as_slice().to_vec(),
                    bias: l.bias().to_vec(),
                    mask: l.mask().iter().map(|&m| m as u8).collect(),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CheckpointFile =
            serde_json::from_str(text).map_err(|e| Error::Checkpoint(format!("malformed checkpoint: {e}")))?;
        if file.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                file.version
            )));
        }
        let mut layers = Vec::with_capacity(file.layers.len());
        for (i, rec) in file.layers.into_iter().enumerate() {
            let bad = |msg: String| Error::Checkpoint(format!("layer {i}: {msg}"));
            let weights = Matrix::new(rec.out, rec.inputs, rec.weights).map_err(|e| bad(e.to_string()))?;
            if rec.mask.len() != weights.len() {
                return Err(bad(format!(
                    "mask has {} entries, expected {}",
                    rec.mask.len(),
                    weights.len()
                )));
            }
            let mut mask = Vec::with_capacity(rec.mask.len());
            for (flat, &m) in rec.mask.iter().enumerate() {
                match m {
                    0 if weights.as_slice()[flat] != 0.0 => {
                        return Err(bad(format!("masked weight {flat} is nonzero")));
                    }
                    0 => mask.push(false),
                    1 => mask.push(true),
                    other => return Err(bad(format!("mask entry {flat} is {other}, expected 0 or 1"))),
                }
            }
            let layer =
                DenseLayer::with_mask(weights, rec.bias, mask, rec.activation).map_err(|e| bad(e.to_string()))?;
            layers.push(layer);
        }
        let network = Network::new(layers).map_err(|e| Error::Checkpoint(e.to_string()))?;
        Ok(Self {
            seed: file.seed,
            role: file.role,
            network,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

pub fn save_checkpoint(net: &Network, seed: u64, path: impl AsRef<Path>) -> Result<()> {
    Checkpoint::new(net.clone(), seed).save(path)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Network> {
    Ok(Checkpoint::load(path)?.network)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> Network {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut net = Network::random(&[5, 7, 3], &mut rng).unwrap();
        net.layer_mut(0).prune(3);
        net.layer_mut(1).bias_mut()[2] = 1.0 / 3.0;
        net
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = Checkpoint::new(sample(), 42).with_role("qnet");
        let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.network.checksum(), ck.network.checksum());
    }

    #[test]
    fn file_layout_uses_documented_keys() {
        let json = Checkpoint::new(sample(), 1).to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["version"], 1);
        let l0 = &v["layers"][0];
        assert_eq!(l0["in"], 5);
        assert_eq!(l0["out"], 7);
        assert_eq!(l0["activation"], "relu");
        assert_eq!(l0["mask"][3], 0);
        assert!(v.get("role").is_none());
    }

    #[test]
    fn rejects_version_and_garbage() {
        let json = Checkpoint::new(sample(), 1)
            .to_json()
            .unwrap()
            .replacen("\"version\":1", "\"version\":2", 1);
        assert!(matches!(Checkpoint::from_json(&json), Err(Error::Checkpoint(_))));
        assert!(matches!(Checkpoint::from_json("{not json"), Err(Error::Checkpoint(_))));
        let bad_mask = r#"{"version":1,"seed":0,"layers":[{"in":1,"out":1,"activation":"identity","weights":[2.0],"bias":[0.0],"mask":[0]}]}"#;
        assert!(Checkpoint::from_json(bad_mask).is_err());
    }
}
