//! Dataset schema, manifests, the repetition-wise split and model inputs.

mod batch;
mod image;
mod labels;
mod manifest;
mod split;

pub use self::image::{
    load_image, preprocess, preprocess_unit, resize_bilinear, ImageTensor, RawImage, CHANNELS,
    INPUT_SIZE, NORM_MEAN, NORM_STD,
};
pub use batch::{make_batch, Batch, Labels, TensorSet};
pub use labels::{
    decode_joint_label, encode_action, encode_joint_label, Action, CameraId, ImageSlot, OneHot4,
    Phase, Tool, JOINT_CLASSES,
};
pub use manifest::{
    load_manifest, meta, validate_manifest, GroupKey, ImagePaths, Issue, Manifest, Sample,
    SampleKey, ValidationReport, DEFAULT_IMAGE_HEIGHT, DEFAULT_IMAGE_WIDTH, FULL_OBJECTS,
    FULL_SAMPLE_COUNT, REPETITIONS,
};
pub use split::{split_by_repetition, Part, SplitRatios, SplitSet};
