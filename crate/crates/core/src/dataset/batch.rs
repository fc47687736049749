//! Model-ready tensors.
//!
//! [`TensorSet`] holds preprocessed views for a list of samples in memory;
//! batches are slices of it arranged for one fusion variant.

use rayon::prelude::*;
use tch::{Kind, Tensor};

use super::image::{load_image, preprocess, ImageTensor, CHANNELS, INPUT_SIZE};
use super::labels::{encode_joint_label, Action, ImageSlot, Tool};
use super::manifest::{Manifest, Sample, SampleKey};
use crate::error::{Error, Result};
use crate::model::{FusionVariant, HeadMode};

/// Integer class labels, one entry per sample.
#[derive(Debug)]
pub struct Labels {
    pub tool: Tensor,
    pub action: Tensor,
    pub joint: Tensor,
}

impl Labels {
    pub fn from_pairs(pairs: &[(Tool, Action)]) -> Labels {
        let tool: Vec<i64> = pairs.iter().map(|(t, _)| t.code() as i64).collect();
        let action: Vec<i64> = pairs.iter().map(|(_, a)| a.code() as i64).collect();
        let joint: Vec<i64> = pairs
            .iter()
            .map(|&(t, a)| encode_joint_label(t, a) as i64)
            .collect();
        Labels {
            tool: Tensor::from_slice(&tool),
            action: Tensor::from_slice(&action),
            joint: Tensor::from_slice(&joint),
        }
    }

    pub fn len(&self) -> usize {
        self.tool.size()[0] as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug)]
pub struct Batch {
    /// Inputs in the variant's order: one `B×18×H×W` tensor for stacked
    /// input, otherwise one `B×3×H×W` tensor per view.
    pub inputs: Vec<Tensor>,
    /// `B×4` one-hot actions, present only for `tool_with_action`.
    pub action_onehot: Option<Tensor>,
    pub labels: Labels,
    pub keys: Vec<SampleKey>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

/// Preprocessed views of a list of samples.
#[derive(Debug)]
pub struct TensorSet {
    /// `N × S × 3 × 128 × 128`, `S = slots.len()`.
    images: Tensor,
    slots: Vec<ImageSlot>,
    pairs: Vec<(Tool, Action)>,
    keys: Vec<SampleKey>,
}

// SAFETY: `images` is never written after construction and every method
// only reads it through out-of-place libtorch ops, which are safe to run
// concurrently on a shared input tensor.
unsafe impl Sync for TensorSet {}

impl TensorSet {
    /// Loads and preprocesses `slots` for each sample. Decoding runs in
    /// parallel; the result order follows `samples`.
    pub fn load(
        manifest: &Manifest,
        samples: &[&Sample],
        slots: &[ImageSlot],
    ) -> Result<TensorSet> {
        const CHUNK: usize = 64;
        let side = INPUT_SIZE as i64;
        let view_shape = [slots.len() as i64, CHANNELS as i64, side, side];
        let images = Tensor::zeros(
            [
                samples.len() as i64,
                view_shape[0],
                view_shape[1],
                side,
                side,
            ],
            (Kind::Float, tch::Device::Cpu),
        );
        for (c, chunk) in samples.chunks(CHUNK).enumerate() {
            let decoded: Vec<Vec<f32>> = chunk
                .par_iter()
                .map(|s| {
                    let mut buf = Vec::with_capacity(slots.len() * ImageTensor::LEN);
                    for &slot in slots {
                        let path = manifest.image_path(s, slot);
                        let raw = load_image(&path).map_err(|e| Error::InSample {
                            sample: format!("{} {slot}", s.key()),
                            source: Box::new(e),
                        })?;
                        buf.extend_from_slice(preprocess(&raw).as_slice());
                    }
                    Ok(buf)
                })
                .collect::<Result<_>>()?;
            for (j, buf) in decoded.into_iter().enumerate() {
                let mut dst = images.get((c * CHUNK + j) as i64);
                dst.copy_(&Tensor::from_slice(&buf).view(view_shape));
            }
        }
        Ok(TensorSet {
            images,
            slots: slots.to_vec(),
            pairs: samples.iter().map(|s| (s.tool, s.action)).collect(),
            keys: samples.iter().map(|s| s.key()).collect(),
        })
    }

    /// Builds a set from in-memory image data. `images[i]` holds the
    /// `slots.len()` views of sample `i`, channel-major, each `3 × size × size`.
    pub fn from_parts(
        images: Vec<Vec<f32>>,
        slots: Vec<ImageSlot>,
        pairs: Vec<(Tool, Action)>,
        keys: Vec<SampleKey>,
        size: usize,
    ) -> TensorSet {
        assert_eq!(images.len(), pairs.len());
        assert_eq!(keys.len(), pairs.len());
        let n = images.len() as i64;
        let per = slots.len() * CHANNELS * size * size;
        let mut flat = Vec::with_capacity(images.len() * per);
        for img in images {
            assert_eq!(img.len(), per, "image data size");
            flat.extend(img);
        }
        let size = size as i64;
        let images =
            Tensor::from_slice(&flat).view([n, slots.len() as i64, CHANNELS as i64, size, size]);
        TensorSet {
            images,
            slots,
            pairs,
            keys,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn slots(&self) -> &[ImageSlot] {
        &self.slots
    }

    pub fn pairs(&self) -> &[(Tool, Action)] {
        &self.pairs
    }

    pub fn keys(&self) -> &[SampleKey] {
        &self.keys
    }

    /// New set holding the samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<TensorSet> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::Eval(format!(
                "sample index {bad} out of range for set of {}",
                self.len()
            )));
        }
        let idx: Vec<i64> = indices.iter().map(|&i| i as i64).collect();
        Ok(TensorSet {
            images: self.images.index_select(0, &Tensor::from_slice(&idx)),
            slots: self.slots.clone(),
            pairs: indices.iter().map(|&i| self.pairs[i]).collect(),
            keys: indices.iter().map(|&i| self.keys[i]).collect(),
        })
    }

    /// Arranges the samples at `indices` for `variant`.
    pub fn batch(
        &self,
        indices: &[usize],
        variant: FusionVariant,
        head: HeadMode,
    ) -> Result<Batch> {
        let positions = variant
            .slots()
            .iter()
            .map(|slot| {
                self.slots.iter().position(|s| s == slot).ok_or_else(|| {
                    Error::ModelConfig(format!(
                        "variant {variant} needs view {slot}, which was not loaded"
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::Eval(format!(
                "sample index {bad} out of range for set of {}",
                self.len()
            )));
        }

        let idx: Vec<i64> = indices.iter().map(|&i| i as i64).collect();
        let idx = Tensor::from_slice(&idx);
        let selected = self.images.index_select(0, &idx);
        let size = selected.size();
        let (b, h, w) = (size[0], size[3], size[4]);
        let inputs = if variant == FusionVariant::Stacked3C1N {
            let pos: Vec<i64> = positions.iter().map(|&p| p as i64).collect();
            let views = selected.index_select(1, &Tensor::from_slice(&pos));
            vec![views.reshape([b, (pos.len() * CHANNELS) as i64, h, w])]
        } else {
            positions
                .iter()
                .map(|&p| selected.select(1, p as i64).contiguous())
                .collect()
        };

        let pairs: Vec<(Tool, Action)> = indices.iter().map(|&i| self.pairs[i]).collect();
        let action_onehot = head.uses_action_input().then(|| {
            let codes: Vec<i64> = pairs.iter().map(|(_, a)| a.code() as i64).collect();
            Tensor::from_slice(&codes)
                .one_hot(Action::COUNT as i64)
                .to_kind(Kind::Float)
        });
        Ok(Batch {
            inputs,
            action_onehot,
            labels: Labels::from_pairs(&pairs),
            keys: indices.iter().map(|&i| self.keys[i]).collect(),
        })
    }
}

/// Loads the views `variant` needs for `samples` and arranges one batch.
pub fn make_batch(
    manifest: &Manifest,
    samples: &[&Sample],
    variant: FusionVariant,
    head: HeadMode,
) -> Result<Batch> {
    let set = TensorSet::load(manifest, samples, variant.slots())?;
    let all: Vec<usize> = (0..set.len()).collect();
    set.batch(&all, variant, head)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::manifest::REPETITIONS;

    fn toy_set(n: usize, size: usize) -> TensorSet {
        let slots = ImageSlot::ALL.to_vec();
        let per = CHANNELS * size * size;
        // each view filled with its slot index plus a per-sample offset
        let images = (0..n)
            .map(|i| {
                slots
                    .iter()
                    .flat_map(|s| std::iter::repeat_n((i * 10 + s.index()) as f32, per))
                    .collect()
            })
            .collect();
        let pairs = (0..n)
            .map(|i| (Tool::ALL[i % 4], Action::ALL[(i / 4) % 4]))
            .collect();
        let keys = (0..n)
            .map(|i| SampleKey {
                object_id: 1,
                tool: Tool::ALL[i % 4],
                action: Action::ALL[(i / 4) % 4],
                repetition: (i as u32 % REPETITIONS) + 1,
            })
            .collect();
        TensorSet::from_parts(images, slots, pairs, keys, size)
    }

    #[test]
    fn stacked_layout_has_eighteen_channels() {
        let set = toy_set(16, 8);
        let idx: Vec<usize> = (0..16).collect();
        let b = set
            .batch(&idx, FusionVariant::Stacked3C1N, HeadMode::Dual)
            .unwrap();
        assert_eq!(b.inputs.len(), 1);
        assert_eq!(b.inputs[0].size(), [16, 18, 8, 8]);
        // channels 9..12 are center_final (slot 3) of sample 2
        let v = b.inputs[0].double_value(&[2, 10, 0, 0]);
        assert_eq!(v, 23.0);
        assert!(b.action_onehot.is_none());
    }

    #[test]
    fn central_variants_use_two_center_views() {
        let set = toy_set(16, 8);
        let idx: Vec<usize> = (0..16).collect();
        for v in [
            FusionVariant::SharedCentral1C1N,
            FusionVariant::SeparateCentral1C2N,
        ] {
            let b = set.batch(&idx, v, HeadMode::Tool).unwrap();
            assert_eq!(b.inputs.len(), 2);
            for t in &b.inputs {
                assert_eq!(t.size(), [16, 3, 8, 8]);
            }
            assert_eq!(b.inputs[0].double_value(&[1, 0, 0, 0]), 12.0);
            assert_eq!(b.inputs[1].double_value(&[1, 0, 0, 0]), 13.0);
        }
        let b = set
            .batch(&idx, FusionVariant::Shared3C3N, HeadMode::Tool)
            .unwrap();
        assert_eq!(b.inputs.len(), 6);
    }

    #[test]
    fn tool_with_action_attaches_one_hot() {
        let set = toy_set(16, 8);
        let idx: Vec<usize> = (0..16).collect();
        let b = set
            .batch(
                &idx,
                FusionVariant::SharedCentral1C1N,
                HeadMode::ToolWithAction,
            )
            .unwrap();
        let onehot = b.action_onehot.as_ref().unwrap();
        assert_eq!(onehot.size(), [16, 4]);
        let sums = Vec::<f32>::try_from(onehot.sum_dim_intlist(1, false, Kind::Float)).unwrap();
        assert!(sums.iter().all(|s| *s == 1.0));
        // sample 5 has action index 1
        assert_eq!(onehot.double_value(&[5, 1]), 1.0);
        let joint = Vec::<i64>::try_from(&b.labels.joint).unwrap();
        let tool = Vec::<i64>::try_from(&b.labels.tool).unwrap();
        let action = Vec::<i64>::try_from(&b.labels.action).unwrap();
        for i in 0..16 {
            assert_eq!(joint[i], tool[i] * 4 + action[i]);
        }
    }

    #[test]
    fn missing_views_are_reported() {
        let set = TensorSet::from_parts(
            vec![vec![0.0; 2 * 3 * 4 * 4]],
            ImageSlot::CENTER.to_vec(),
            vec![(Tool::Ruler, Action::Push)],
            vec![SampleKey {
                object_id: 1,
                tool: Tool::Ruler,
                action: Action::Push,
                repetition: 1,
            }],
            4,
        );
        assert!(set
            .batch(&[0], FusionVariant::Shared3C3N, HeadMode::Dual)
            .is_err());
        assert!(set
            .batch(&[1], FusionVariant::SharedCentral1C1N, HeadMode::Dual)
            .is_err());
    }
}
