//! Checkpoint file: a versioned JSON document mapping parameter names to
//! shape + flat value arrays. Keys are sorted so serialization is
//! byte-stable.

use super::network::Network;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Entry {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Checkpoint {
    pub format_version: u32,
    pub entries: BTreeMap<String, Entry>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: &str, shape: Vec<usize>, values: Vec<f64>) {
        self.entries.insert(name.to_string(), Entry { shape, values });
    }

    pub fn insert_scalar(&mut self, name: &str, value: f64) {
        self.insert(name, vec![1], vec![value]);
    }

    pub fn get(&self, name: &str) -> Result<&Entry> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::Format(format!("checkpoint missing entry '{name}'")))
    }

    pub fn get_scalar(&self, name: &str) -> Result<f64> {
        let e = self.get(name)?;
        if e.values.len() != 1 {
            return Err(Error::Format(format!("entry '{name}' is not a scalar")));
        }
        Ok(e.values[0])
    }

    /// Store every named state array of `net` under `prefix/layerNN/name`.
    pub fn export_network(&mut self, prefix: &str, net: &Network) {
        for (i, layer) in net.layers.iter().enumerate() {
            for (name, shape, values) in layer.state_views() {
                self.insert(&format!("{prefix}/layer{i:02}/{name}"), shape, values.clone());
            }
        }
    }

    /// Restore a network's state arrays in place, validating shapes.
    pub fn import_network(&self, prefix: &str, net: &mut Network) -> Result<()> {
        for (i, layer) in net.layers.iter_mut().enumerate() {
            for (name, shape, values) in layer.state_views_mut() {
                let key = format!("{prefix}/layer{i:02}/{name}");
                let entry = self.get(&key)?;
                if entry.shape != shape {
                    return Err(Error::Shape(format!(
                        "checkpoint entry '{key}' has shape {:?}, expected {:?}",
                        entry.shape, shape
                    )));
                }
                values.copy_from_slice(&entry.values);
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        if ckpt.format_version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {}",
                ckpt.format_version
            )));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl Default for Checkpoint {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::super::layers::{BatchNorm1d, Conv1d, Layer, Relu};
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_net(seed: u64) -> Network {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Network::new(vec![
            Layer::Conv1d(Conv1d::new(2, 4, 3, &mut rng)),
            Layer::BatchNorm1d(BatchNorm1d::new(4)),
            Layer::Relu(Relu::new()),
        ])
    }

    #[test]
    fn round_trip_restores_every_value() {
        let net = small_net(7);
        let mut ckpt = Checkpoint::new();
        ckpt.export_network("net", &net);
        let json = ckpt.to_json().unwrap();
        let loaded = Checkpoint::from_json(&json).unwrap();

        let mut other = small_net(8);
        loaded.import_network("net", &mut other).unwrap();
        for (a, b) in net.layers.iter().zip(&other.layers) {
            for ((_, _, va), (_, _, vb)) in a.state_views().iter().zip(b.state_views()) {
                assert_eq!(*va, vb);
            }
        }
    }

    #[test]
    fn serialization_is_byte_stable() {
        let net = small_net(7);
        let mut ckpt = Checkpoint::new();
        ckpt.export_network("net", &net);
        assert_eq!(ckpt.to_json().unwrap(), ckpt.to_json().unwrap());
    }

    #[test]
    fn missing_entry_is_format_error() {
        let ckpt = Checkpoint::new();
        let mut net = small_net(1);
        assert!(matches!(
            ckpt.import_network("net", &mut net),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let net = small_net(7);
        let mut ckpt = Checkpoint::new();
        ckpt.export_network("net", &net);
        // Corrupt one entry's shape.
        let key = "net/layer00/bias";
        let mut entry = ckpt.get(key).unwrap().clone();
        entry.shape = vec![5];
        entry.values = vec![0.0; 5];
        ckpt.entries.insert(key.into(), entry);
        let mut other = small_net(8);
        assert!(matches!(
            ckpt.import_network("net", &mut other),
            Err(Error::Shape(_))
        ));
    }
}
