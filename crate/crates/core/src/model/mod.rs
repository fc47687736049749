//! Fusion architectures over residual encoders.

mod checkpoint;
mod config;
mod resnet;

pub use checkpoint::Checkpoint;
pub use config::{
    Depth, FusionVariant, HeadKind, HeadMode, ModelConfig, FIRST_KERNELS, FIRST_STRIDES,
};
pub use resnet::{build_backbone, Block, Encoder};

use tch::nn::{self, Module, ModuleT};
use tch::{Device, Kind, Tensor};

use crate::dataset::Batch;
use crate::error::{Error, Result};
use crate::seed::TORCH_RNG;

/// Raw classifier outputs; no softmax applied.
#[derive(Debug)]
pub struct Logits {
    pub tool: Option<Tensor>,
    pub action: Option<Tensor>,
    pub joint: Option<Tensor>,
}

impl Logits {
    pub fn get(&self, kind: HeadKind) -> Option<&Tensor> {
        match kind {
            HeadKind::Tool => self.tool.as_ref(),
            HeadKind::Action => self.action.as_ref(),
            HeadKind::Joint => self.joint.as_ref(),
        }
    }
}

#[derive(Debug)]
enum Classifier {
    Linear(nn::Linear),
    Hidden(nn::Linear, nn::Linear),
}

impl Module for Classifier {
    fn forward(&self, xs: &Tensor) -> Tensor {
        match self {
            Classifier::Linear(l) => xs.apply(l),
            Classifier::Hidden(a, b) => xs.apply(a).relu().apply(b),
        }
    }
}

/// A fusion model. Owns its variables; the encoder list has one entry per
/// distinct weight set, so shared variants hold fewer encoders than inputs.
pub struct Model {
    config: ModelConfig,
    vs: nn::VarStore,
    encoders: Vec<Encoder>,
    heads: Vec<(HeadKind, Classifier)>,
}

impl std::fmt::Debug for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Model")
            .field("config", &self.config)
            .field("encoders", &self.encoders.len())
            .field("parameters", &self.parameter_count())
            .finish()
    }
}

impl Model {
    /// Builds the model for `config` with weights drawn from `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Model> {
        config.validate()?;
        let _guard = TORCH_RNG.lock().unwrap_or_else(|e| e.into_inner());
        tch::manual_seed(seed as i64);
        Self::build(config)
    }

    fn build(config: ModelConfig) -> Result<Model> {
        let vs = nn::VarStore::new(Device::Cpu);
        let root = vs.root();
        let encoders = (0..config.variant.encoder_count())
            .map(|i| {
                build_backbone(
                    &(&root / format!("encoder{i}")),
                    config.depth,
                    config.first_kernel,
                    config.first_stride,
                    config.variant.in_channels(),
                )
            })
            .collect::<Result<Vec<_>>>()?;

        let mut features = config.feature_width() as i64;
        if config.head.uses_action_input() {
            features += 4;
        }
        let heads = config
            .head
            .heads()
            .iter()
            .map(|&kind| {
                let p = &root / format!("{}_head", kind.name());
                let classes = kind.classes() as i64;
                let classifier = match config.head_hidden {
                    None => Classifier::Linear(nn::linear(
                        &p / "fc",
                        features,
                        classes,
                        Default::default(),
                    )),
                    Some(h) => Classifier::Hidden(
                        nn::linear(&p / "fc1", features, h as i64, Default::default()),
                        nn::linear(&p / "fc2", h as i64, classes, Default::default()),
                    ),
                };
                (kind, classifier)
            })
            .collect();
        drop(root);
        Ok(Model {
            config,
            vs,
            encoders,
            heads,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn var_store(&self) -> &nn::VarStore {
        &self.vs
    }

    pub fn encoders(&self) -> &[Encoder] {
        &self.encoders
    }

    pub fn encoders_mut(&mut self) -> &mut [Encoder] {
        &mut self.encoders
    }

    pub fn parameter_count(&self) -> i64 {
        count_parameters(&self.vs)
    }

    fn check_inputs(&self, inputs: &[Tensor]) -> Result<i64> {
        let variant = self.config.variant;
        let names = variant.input_names();
        if inputs.len() != variant.input_count() {
            return Err(Error::ShapeMismatch {
                tensor: "inputs".into(),
                expected: format!("{} tensors ({})", names.len(), names.join(", ")),
                actual: format!("{} tensors", inputs.len()),
            });
        }
        let channels = variant.in_channels() as i64;
        let reference = inputs[0].size();
        for (t, name) in inputs.iter().zip(&names) {
            let size = t.size();
            let ok = size.len() == 4
                && size[1] == channels
                && size[0] == reference[0]
                && reference.len() == 4
                && size[2..] == reference[2..];
            if !ok {
                let (b, h, w) = if reference.len() == 4 {
                    (
                        reference[0].to_string(),
                        reference[2].to_string(),
                        reference[3].to_string(),
                    )
                } else {
                    ("B".into(), "H".into(), "W".into())
                };
                return Err(Error::ShapeMismatch {
                    tensor: name.clone(),
                    expected: format!("[{b}, {channels}, {h}, {w}]"),
                    actual: format!("{size:?}"),
                });
            }
        }
        Ok(reference[0])
    }

    /// Per-input embeddings, in input order. An encoder shared by several
    /// inputs sees them as one batch, so its batch statistics cover all of
    /// them.
    pub fn embed(&self, inputs: &[Tensor], train: bool) -> Result<Vec<Tensor>> {
        let batch = self.check_inputs(inputs)?;
        let variant = self.config.variant;
        let mut out: Vec<Option<Tensor>> = inputs.iter().map(|_| None).collect();
        for (e, encoder) in self.encoders.iter().enumerate() {
            let mine: Vec<usize> = (0..inputs.len())
                .filter(|&i| variant.encoder_for_input(i) == e)
                .collect();
            let stacked = match mine.as_slice() {
                [i] => inputs[*i].shallow_clone(),
                _ => Tensor::cat(&mine.iter().map(|&i| &inputs[i]).collect::<Vec<_>>(), 0),
            };
            let features = encoder.forward_t(&stacked, train);
            let sizes = vec![batch; mine.len()];
            for (chunk, &i) in features.split_with_sizes(&sizes, 0).into_iter().zip(&mine) {
                out[i] = Some(chunk);
            }
        }
        Ok(out.into_iter().map(|t| t.expect("every input has an encoder")).collect())
    }

    /// Applies the heads to concatenated embeddings.
    pub fn classify(&self, features: &Tensor, action_onehot: Option<&Tensor>) -> Result<Logits> {
        let batch = features.size()[0];
        let features = if self.config.head.uses_action_input() {
            let onehot = action_onehot.ok_or_else(|| Error::ShapeMismatch {
                tensor: "action_onehot".into(),
                expected: format!("[{batch}, 4]"),
                actual: "absent".into(),
            })?;
            if onehot.size() != [batch, 4] {
                return Err(Error::ShapeMismatch {
                    tensor: "action_onehot".into(),
                    expected: format!("[{batch}, 4]"),
                    actual: format!("{:?}", onehot.size()),
                });
            }
            Tensor::cat(&[features, &onehot.to_kind(Kind::Float)], 1)
        } else {
            features.shallow_clone()
        };
        let mut logits = Logits {
            tool: None,
            action: None,
            joint: None,
        };
        for (kind, classifier) in &self.heads {
            let out = classifier.forward(&features);
            match kind {
                HeadKind::Tool => logits.tool = Some(out),
                HeadKind::Action => logits.action = Some(out),
                HeadKind::Joint => logits.joint = Some(out),
            }
        }
        Ok(logits)
    }

    pub fn forward_inputs(
        &self,
        inputs: &[Tensor],
        action_onehot: Option<&Tensor>,
        train: bool,
    ) -> Result<Logits> {
        let embeddings = self.embed(inputs, train)?;
        let features = Tensor::cat(&embeddings, 1);
        self.classify(&features, action_onehot)
    }

    pub fn forward(&self, batch: &Batch, train: bool) -> Result<Logits> {
        self.forward_inputs(&batch.inputs, batch.action_onehot.as_ref(), train)
    }

    /// Copies every variable of `checkpoint` into this model.
    pub fn load_weights(&mut self, checkpoint: &Checkpoint) -> Result<()> {
        checkpoint.restore_into(self)
    }

    pub fn from_checkpoint(checkpoint: &Checkpoint) -> Result<Model> {
        let mut model = Model::new(checkpoint.config, 0)?;
        model.load_weights(checkpoint)?;
        Ok(model)
    }
}

/// Number of trainable scalars in a variable store.
pub fn count_parameters(vs: &nn::VarStore) -> i64 {
    vs.trainable_variables()
        .iter()
        .map(Tensor::numel)
        .map(|n| n as i64)
        .sum()
}

/// Classes of the reference classifier used for parameter parity.
pub const PARITY_CLASSES: i64 = 1000;

/// Parameters of a standard single encoder (3-channel input, 7×7 stride-2
/// stem) with a 1000-way linear classifier, for comparison with published
/// model sizes.
pub fn parity_parameter_count(depth: Depth) -> Result<i64> {
    let vs = nn::VarStore::new(Device::Cpu);
    let root = vs.root();
    let _encoder = build_backbone(&(&root / "encoder"), depth, 7, 2, 3)?;
    let _fc = nn::linear(
        &root / "fc",
        depth.embedding_width() as i64,
        PARITY_CLASSES,
        Default::default(),
    );
    Ok(count_parameters(&vs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rand_inputs(cfg: &ModelConfig, batch: i64, side: i64) -> Vec<Tensor> {
        (0..cfg.variant.input_count())
            .map(|_| {
                Tensor::randn(
                    [batch, cfg.variant.in_channels() as i64, side, side],
                    (Kind::Float, Device::Cpu),
                )
            })
            .collect()
    }

    #[test]
    fn backbone_widths() {
        let vs = nn::VarStore::new(Device::Cpu);
        let e18 = build_backbone(&vs.root(), Depth::R18, 7, 2, 3).unwrap();
        let e50 = build_backbone(&(vs.root() / "b"), Depth::R50, 7, 2, 3).unwrap();
        let e18x = build_backbone(&(vs.root() / "c"), Depth::R18, 3, 1, 18).unwrap();
        let x = Tensor::randn([2, 3, 32, 32], (Kind::Float, Device::Cpu));
        assert_eq!(e18.forward_t(&x, false).size(), [2, 512]);
        assert_eq!(e50.forward_t(&x, false).size(), [2, 2048]);
        let x18 = Tensor::randn([2, 18, 32, 32], (Kind::Float, Device::Cpu));
        assert_eq!(e18x.forward_t(&x18, false).size(), [2, 512]);
        assert_eq!(e18x.in_channels(), 18);
        assert!(build_backbone(&vs.root(), Depth::R18, 4, 2, 3).is_err());
    }

    #[test]
    fn architecture_arithmetic() {
        let m = Model::new(
            ModelConfig::new(Depth::R18, FusionVariant::SharedCentral1C1N, HeadMode::Dual),
            0,
        )
        .unwrap();
        assert_eq!(m.encoders().len(), 1);
        assert_eq!(m.config().feature_width(), 1024);
        let vars = m.var_store().variables();
        assert_eq!(vars["tool_head.fc.weight"].size(), [4, 1024]);
        assert_eq!(vars["action_head.fc.weight"].size(), [4, 1024]);

        let m = Model::new(
            ModelConfig::new(Depth::R18, FusionVariant::Stacked3C1N, HeadMode::Joint16),
            0,
        )
        .unwrap();
        let vars = m.var_store().variables();
        assert_eq!(vars["encoder0.conv1.weight"].size(), [64, 18, 7, 7]);
        assert_eq!(vars["joint_head.fc.weight"].size(), [16, 512]);

        let m = Model::new(
            ModelConfig::new(
                Depth::R18,
                FusionVariant::SeparateCentral1C2N,
                HeadMode::ToolWithAction,
            ),
            0,
        )
        .unwrap();
        assert_eq!(m.encoders().len(), 2);
        assert_eq!(
            m.var_store().variables()["tool_head.fc.weight"].size(),
            [4, 1028]
        );
    }

    #[test]
    fn forward_shapes_on_small_inputs() {
        for head in HeadMode::ALL {
            let cfg = ModelConfig::new(Depth::R18, FusionVariant::Shared3C3N, head);
            let m = Model::new(cfg, 1).unwrap();
            let inputs = rand_inputs(&cfg, 3, 32);
            let onehot = Tensor::eye(4, (Kind::Float, Device::Cpu)).narrow(0, 0, 3);
            let logits = tch::no_grad(|| m.forward_inputs(&inputs, Some(&onehot), false)).unwrap();
            for kind in head.heads() {
                assert_eq!(
                    logits.get(*kind).unwrap().size(),
                    [3, kind.classes() as i64]
                );
            }
            let produced = [HeadKind::Tool, HeadKind::Action, HeadKind::Joint]
                .iter()
                .filter(|k| logits.get(**k).is_some())
                .count();
            assert_eq!(produced, head.heads().len());
        }
    }

    #[test]
    fn shape_errors_name_the_tensor() {
        let cfg = ModelConfig::new(
            Depth::R18,
            FusionVariant::SharedCentral1C1N,
            HeadMode::ToolWithAction,
        );
        let m = Model::new(cfg, 0).unwrap();
        let mut inputs = rand_inputs(&cfg, 2, 32);
        let err = m.forward_inputs(&inputs[..1], None, false).unwrap_err();
        assert!(err.to_string().contains("inputs"), "{err}");
        inputs[1] = Tensor::randn([2, 4, 32, 32], (Kind::Float, Device::Cpu));
        let err = m.forward_inputs(&inputs, None, false).unwrap_err();
        assert!(err.to_string().contains("center_final"), "{err}");
        let inputs = rand_inputs(&cfg, 2, 32);
        let err = m.forward_inputs(&inputs, None, false).unwrap_err();
        assert!(err.to_string().contains("action_onehot"), "{err}");
    }

    #[test]
    fn same_seed_same_weights() {
        let cfg = ModelConfig::new(Depth::R18, FusionVariant::SharedCentral1C1N, HeadMode::Tool);
        let a = Model::new(cfg, 5).unwrap();
        let b = Model::new(cfg, 5).unwrap();
        let c = Model::new(cfg, 6).unwrap();
        let (va, vb, vc) = (
            a.var_store().variables(),
            b.var_store().variables(),
            c.var_store().variables(),
        );
        let w = "encoder0.layer1.0.conv1.weight";
        assert!(va[w].equal(&vb[w]));
        assert!(!va[w].equal(&vc[w]));
    }

    #[test]
    fn zeroed_residual_blocks_pass_their_input() {
        for depth in [Depth::R18, Depth::R50] {
            let vs = nn::VarStore::new(Device::Cpu);
            let mut enc = build_backbone(&vs.root(), depth, 7, 2, 3).unwrap();
            let image = Tensor::randn([2, 3, 32, 32], (Kind::Float, Device::Cpu));
            let mut x = tch::no_grad(|| enc.stem_t(&image, false));
            for stage in enc.stages_mut() {
                for block in stage.iter_mut() {
                    block.zero_residual();
                    let out = tch::no_grad(|| block.forward_t(&x, false));
                    let expected = tch::no_grad(|| block.shortcut_t(&x, false).relu());
                    let diff = (&out - &expected).abs().max().double_value(&[]);
                    assert!(diff < 1e-6, "depth {depth}: {diff}");
                    if out.size() == x.size() {
                        // identity shortcut on a non-negative input
                        let diff = (&out - &x).abs().max().double_value(&[]);
                        assert!(diff < 1e-6, "depth {depth}: {diff}");
                    }
                    x = out;
                }
            }
        }
    }
}
