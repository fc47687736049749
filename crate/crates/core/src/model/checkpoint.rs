//! Self-describing weight files.
//!
//! A checkpoint is a single safetensors file whose header metadata carries
//! the model configuration as JSON, so a model can be rebuilt from the
//! file alone. All variables are stored, including normalisation running
//! statistics.

use std::borrow::Cow;
use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use safetensors::{Dtype, SafeTensors, View};
use tch::{Kind, Tensor};

use super::{Model, ModelConfig};
use crate::error::{Error, Result};

const FORMAT: &str = "affordance-checkpoint/1";
const KEY_FORMAT: &str = "format";
const KEY_CONFIG: &str = "model_config";
const KEY_INFO: &str = "info";

#[derive(Debug)]
pub struct Checkpoint {
    pub config: ModelConfig,
    tensors: BTreeMap<String, Tensor>,
    /// Free-form annotations such as the epoch the weights come from.
    pub info: BTreeMap<String, String>,
}

struct F32Blob {
    shape: Vec<usize>,
    bytes: Vec<u8>,
}

impl View for &F32Blob {
    fn dtype(&self) -> Dtype {
        Dtype::F32
    }

    fn shape(&self) -> &[usize] {
        &self.shape
    }

    fn data(&self) -> Cow<'_, [u8]> {
        Cow::Borrowed(&self.bytes)
    }

    fn data_len(&self) -> usize {
        self.bytes.len()
    }
}

/// Rewrites the JSON header with its keys in sorted order so that equal
/// checkpoints produce equal files.
fn sorted_header(mut bytes: Vec<u8>) -> Vec<u8> {
    let Some(len) = bytes.get(..8).map(|b| u64::from_le_bytes(b.try_into().unwrap()) as usize) else {
        return bytes;
    };
    let Some(header) = bytes.get(8..8 + len) else {
        return bytes;
    };
    let Ok(value) = serde_json::from_slice::<serde_json::Value>(header) else {
        return bytes;
    };
    let text = value.to_string();
    if text.len() <= len {
        let slot = &mut bytes[8..8 + len];
        slot.fill(b' ');
        slot[..text.len()].copy_from_slice(text.as_bytes());
    }
    bytes
}

impl Checkpoint {
    /// Deep copy of the model's current variables.
    pub fn capture(model: &Model) -> Checkpoint {
        let tensors = tch::no_grad(|| {
            model
                .var_store()
                .variables()
                .into_iter()
                .map(|(name, t)| (name, t.detach().copy()))
                .collect()
        });
        Checkpoint {
            config: *model.config(),
            tensors,
            info: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub(super) fn restore_into(&self, model: &mut Model) -> Result<()> {
        if self.config != *model.config() {
            return Err(Error::ModelConfig(format!(
                "checkpoint config {:?} does not match model config {:?}",
                self.config,
                model.config()
            )));
        }
        let mut vars = model.var_store().variables();
        if vars.len() != self.tensors.len() {
            return Err(Error::ModelConfig(format!(
                "checkpoint has {} tensors, model has {}",
                self.tensors.len(),
                vars.len()
            )));
        }
        tch::no_grad(|| {
            for (name, src) in &self.tensors {
                let dst = vars.get_mut(name).ok_or_else(|| {
                    Error::ModelConfig(format!("checkpoint tensor {name} not in model"))
                })?;
                if dst.size() != src.size() {
                    return Err(Error::ShapeMismatch {
                        tensor: name.clone(),
                        expected: format!("{:?}", dst.size()),
                        actual: format!("{:?}", src.size()),
                    });
                }
                dst.copy_(src);
            }
            Ok(())
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let blobs = self
            .tensors
            .iter()
            .map(|(name, t)| {
                let flat = t.to_kind(Kind::Float).contiguous().flatten(0, -1);
                let values = Vec::<f32>::try_from(&flat)?;
                let bytes = values.iter().flat_map(|v| v.to_le_bytes()).collect();
                let shape = t.size().iter().map(|&d| d as usize).collect();
                Ok((name.clone(), F32Blob { shape, bytes }))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut meta = HashMap::new();
        meta.insert(KEY_FORMAT.to_string(), FORMAT.to_string());
        meta.insert(
            KEY_CONFIG.to_string(),
            serde_json::to_string(&self.config).expect("config serializes"),
        );
        meta.insert(
            KEY_INFO.to_string(),
            serde_json::to_string(&self.info).expect("info serializes"),
        );
        let bytes = safetensors::serialize(blobs.iter().map(|(n, b)| (n.as_str(), b)), Some(meta))
            .map_err(|e| Error::Checkpoint {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        std::fs::write(path, sorted_header(bytes)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let bad = |message: String| Error::Checkpoint {
            path: path.to_path_buf(),
            message,
        };
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let (_, header) = SafeTensors::read_metadata(&bytes).map_err(|e| bad(e.to_string()))?;
        let meta = header
            .metadata()
            .as_ref()
            .ok_or_else(|| bad("missing metadata".into()))?;
        if meta.get(KEY_FORMAT).map(String::as_str) != Some(FORMAT) {
            return Err(bad(format!("not a {FORMAT} file")));
        }
        let config: ModelConfig = serde_json::from_str(
            meta.get(KEY_CONFIG)
                .ok_or_else(|| bad("missing model config".into()))?,
        )
        .map_err(|e| bad(format!("model config: {e}")))?;
        let info = match meta.get(KEY_INFO) {
            Some(s) => serde_json::from_str(s).map_err(|e| bad(format!("info: {e}")))?,
            None => BTreeMap::new(),
        };

        let st = SafeTensors::deserialize(&bytes).map_err(|e| bad(e.to_string()))?;
        let mut tensors = BTreeMap::new();
        for (name, view) in st.tensors() {
            if view.dtype() != Dtype::F32 {
                return Err(bad(format!("tensor {name} has dtype {:?}", view.dtype())));
            }
            let values: Vec<f32> = view
                .data()
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            let shape: Vec<i64> = view.shape().iter().map(|&d| d as i64).collect();
            tensors.insert(name, Tensor::from_slice(&values).reshape(&shape));
        }
        Ok(Checkpoint {
            config,
            tensors,
            info,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Depth, FusionVariant, HeadMode};
    use tch::Device;

    #[test]
    fn save_load_restores_identical_outputs() {
        let cfg = ModelConfig::new(Depth::R18, FusionVariant::SharedCentral1C1N, HeadMode::Dual);
        let a = Model::new(cfg, 3).unwrap();
        let mut ck = Checkpoint::capture(&a);
        ck.info.insert("best_epoch".into(), "7".into());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.safetensors");
        ck.save(&path).unwrap();
        let again = dir.path().join("m2.safetensors");
        ck.save(&again).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());

        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded.config, cfg);
        assert_eq!(loaded.info["best_epoch"], "7");
        assert_eq!(loaded.len(), ck.len());
        let b = Model::from_checkpoint(&loaded).unwrap();

        let x = Tensor::randn([2, 3, 32, 32], (Kind::Float, Device::Cpu));
        let y = Tensor::randn([2, 3, 32, 32], (Kind::Float, Device::Cpu));
        let inputs = [x, y];
        let la = tch::no_grad(|| a.forward_inputs(&inputs, None, false)).unwrap();
        let lb = tch::no_grad(|| b.forward_inputs(&inputs, None, false)).unwrap();
        assert!(la.tool.unwrap().equal(&lb.tool.unwrap()));
        assert!(la.action.unwrap().equal(&lb.action.unwrap()));
    }

    #[test]
    fn mismatched_config_is_rejected() {
        let a = Model::new(
            ModelConfig::new(Depth::R18, FusionVariant::SharedCentral1C1N, HeadMode::Dual),
            0,
        )
        .unwrap();
        let mut b = Model::new(
            ModelConfig::new(Depth::R18, FusionVariant::SharedCentral1C1N, HeadMode::Tool),
            0,
        )
        .unwrap();
        assert!(b.load_weights(&Checkpoint::capture(&a)).is_err());
    }

    #[test]
    fn rejects_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.safetensors");
        std::fs::write(&path, b"not a checkpoint").unwrap();
        assert!(matches!(
            Checkpoint::load(&path),
            Err(Error::Checkpoint { .. })
        ));
    }
}
