//! C interface to `affordance-core`.
//!
//! Objects cross the boundary as opaque handles created by a `*_new` or
//! `*_load` function and released with the matching `*_free`. Fallible
//! functions return an [`AffStatus`]; on failure [`aff_last_error`] describes
//! the most recent error on the calling thread. Labels are passed as `int32_t`
//! codes (see the `AFF_TOOL_*`, `AFF_ACTION_*`, `AFF_VARIANT_*`, `AFF_HEAD_*`
//! and `AFF_PART_*` constants).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use affordance_core::dataset::{
    self, decode_joint_label, encode_joint_label, split_by_repetition, validate_manifest, Action,
    Manifest, Part, SplitRatios, SplitSet, Tool,
};
use affordance_core::eval;
use affordance_core::model::{self, Checkpoint, Depth, FusionVariant, HeadKind, HeadMode, Model, ModelConfig};
use affordance_core::synth::{self, Counts, Point, SceneSpec};
use affordance_core::Error;
use tch::{Kind, Tensor};

/// Result of a fallible call.
#[repr(C)]
#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AffStatus {
    AFF_OK = 0,
    /// A required pointer argument was null.
    AFF_ERR_NULL = 1,
    /// An argument is outside its documented range.
    AFF_ERR_ARGUMENT = 2,
    AFF_ERR_IO = 3,
    /// Malformed manifest, checkpoint or other input file.
    AFF_ERR_FORMAT = 4,
    /// Invalid model or training configuration.
    AFF_ERR_CONFIG = 5,
    /// Zero displacement: labels cannot be inferred.
    AFF_ERR_AMBIGUOUS = 6,
    /// A caller-provided buffer is too small.
    AFF_ERR_BUFFER = 7,
    AFF_ERR_RUNTIME = 8,
    /// A panic was caught at the boundary.
    AFF_ERR_PANIC = 9,
}

use AffStatus::*;

pub const AFF_TOOL_BOOMERANG: i32 = 0;
pub const AFF_TOOL_RULER: i32 = 1;
pub const AFF_TOOL_SLINGSHOT: i32 = 2;
pub const AFF_TOOL_SPATULA: i32 = 3;

pub const AFF_ACTION_PUSH: i32 = 0;
pub const AFF_ACTION_PULL: i32 = 1;
pub const AFF_ACTION_LEFT_TO_RIGHT: i32 = 2;
pub const AFF_ACTION_RIGHT_TO_LEFT: i32 = 3;

pub const AFF_VARIANT_STACKED_3C1N: i32 = 0;
pub const AFF_VARIANT_SEPARATE_3C6N: i32 = 1;
pub const AFF_VARIANT_SEPARATE_CENTRAL_1C2N: i32 = 2;
pub const AFF_VARIANT_SHARED_3C3N: i32 = 3;
pub const AFF_VARIANT_SHARED_CENTRAL_1C1N: i32 = 4;

pub const AFF_HEAD_TOOL: i32 = 0;
pub const AFF_HEAD_TOOL_WITH_ACTION: i32 = 1;
pub const AFF_HEAD_DUAL: i32 = 2;
pub const AFF_HEAD_ACTION: i32 = 3;
pub const AFF_HEAD_JOINT16: i32 = 4;

pub const AFF_PART_TRAIN: i32 = 0;
pub const AFF_PART_VAL: i32 = 1;
pub const AFF_PART_TEST: i32 = 2;

/// Side length of model input images.
pub const AFF_INPUT_SIZE: usize = 128;

/// Written to prediction outputs for heads the model does not have.
pub const AFF_NO_PREDICTION: i32 = -1;

/// Opaque dataset manifest.
pub struct AffManifest(Manifest);

/// Opaque train/validation/test partition of a manifest.
pub struct AffSplit(SplitSet);

/// Opaque model with its weights.
pub struct AffModel(Model);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(AffStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => AFF_ERR_IO,
            Error::Schema { .. } | Error::Image { .. } | Error::Checkpoint { .. } | Error::DuplicateSample(_) => {
                AFF_ERR_FORMAT
            }
            Error::ModelConfig(_) | Error::TrainConfig(_) | Error::Config(_) | Error::Scene(_) | Error::Split(_) => {
                AFF_ERR_CONFIG
            }
            Error::AmbiguousDisplacement => AFF_ERR_AMBIGUOUS,
            Error::Parse { .. } | Error::LabelOutOfRange { .. } | Error::ShapeMismatch { .. } => AFF_ERR_ARGUMENT,
            _ => AFF_ERR_RUNTIME,
        };
        Failure(status, e.to_string())
    }
}

fn fail<T>(status: AffStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, msg.into()))
}

/// Runs `f`, recording any error or panic for [`aff_last_error`].
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AffStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            AFF_OK
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("panic: {msg}"));
            AFF_ERR_PANIC
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    match p.as_ref() {
        Some(r) => Ok(r),
        None => fail(AFF_ERR_NULL, format!("{name} is null")),
    }
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    match p.as_mut() {
        Some(r) => Ok(r),
        None => fail(AFF_ERR_NULL, format!("{name} is null")),
    }
}

unsafe fn path_arg(p: *const c_char, name: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return fail(AFF_ERR_NULL, format!("{name} is null"));
    }
    match CStr::from_ptr(p).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => fail(AFF_ERR_ARGUMENT, format!("{name} is not valid UTF-8")),
    }
}

unsafe fn slice<'a, T>(p: *const T, n: usize, name: &str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return fail(AFF_ERR_NULL, format!("{name} is null"));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn slice_mut<'a, T>(p: *mut T, n: usize, name: &str) -> Result<&'a mut [T], Failure> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return fail(AFF_ERR_NULL, format!("{name} is null"));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

fn code<T>(v: i32, what: &str, from: impl Fn(usize) -> Option<T>) -> Result<T, Failure> {
    usize::try_from(v)
        .ok()
        .and_then(from)
        .map_or_else(|| fail(AFF_ERR_ARGUMENT, format!("{what} code {v} out of range")), Ok)
}

fn tool(v: i32) -> Result<Tool, Failure> {
    code(v, "tool", Tool::from_code)
}

fn action(v: i32) -> Result<Action, Failure> {
    code(v, "action", Action::from_code)
}

fn variant(v: i32) -> Result<FusionVariant, Failure> {
    code(v, "variant", |i| FusionVariant::ALL.get(i).copied())
}

fn head(v: i32) -> Result<HeadMode, Failure> {
    code(v, "head mode", |i| HeadMode::ALL.get(i).copied())
}

fn part(v: i32) -> Result<Part, Failure> {
    code(v, "part", |i| [Part::Train, Part::Val, Part::Test].get(i).copied())
}

fn depth(v: u32) -> Result<Depth, Failure> {
    Depth::try_from(v).map_err(|e| Failure(AFF_ERR_ARGUMENT, e.to_string()))
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call into the library on the same
/// thread.
#[no_mangle]
pub extern "C" fn aff_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn aff_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---------------------------------------------------------------- labels

/// Joint class `tool * 4 + action` in `0..16`.
///
/// # Safety
/// `out` must be null or point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn aff_encode_joint(tool_code: i32, action_code: i32, out_label: *mut i32) -> AffStatus {
    guard(|| {
        let o = out(out_label, "out_label")?;
        *o = encode_joint_label(tool(tool_code)?, action(action_code)?) as i32;
        Ok(())
    })
}

/// Inverse of [`aff_encode_joint`].
///
/// # Safety
/// Output pointers must be null or point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn aff_decode_joint(label: i32, out_tool: *mut i32, out_action: *mut i32) -> AffStatus {
    guard(|| {
        let t = out(out_tool, "out_tool")?;
        let a_out = out(out_action, "out_action")?;
        let (tl, ac) = usize::try_from(label)
            .ok()
            .and_then(decode_joint_label)
            .map_or_else(|| fail(AFF_ERR_ARGUMENT, format!("joint label {label} outside 0..16")), Ok)?;
        *t = tl.code() as i32;
        *a_out = ac.code() as i32;
        Ok(())
    })
}

// ----------------------------------------------------------- synthetic data

/// Recovers (action, tool) from an object's start and end position with the
/// default effect table.
///
/// # Safety
/// Output pointers must be null or point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn aff_oracle_infer(
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    out_action: *mut i32,
    out_tool: *mut i32,
) -> AffStatus {
    guard(|| {
        let a_out = out(out_action, "out_action")?;
        let t_out = out(out_tool, "out_tool")?;
        let (a, t) = synth::oracle_infer(Point::new(x0, y0), Point::new(x1, y1))?;
        *a_out = a.code() as i32;
        *t_out = t.code() as i32;
        Ok(())
    })
}

/// Renders a synthetic dataset with the default scene into `out_dir`,
/// writing its manifest there.
///
/// # Safety
/// `out_dir` must be a NUL-terminated string; `out_samples` null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn aff_generate_dataset(
    out_dir: *const c_char,
    objects: u32,
    repetitions: u32,
    seed: u64,
    out_samples: *mut usize,
) -> AffStatus {
    guard(|| {
        let dir = path_arg(out_dir, "out_dir")?;
        let n = out(out_samples, "out_samples")?;
        let m = synth::generate_dataset(&SceneSpec::default(), Counts { objects, repetitions }, seed, &dir)?;
        *n = m.len();
        Ok(())
    })
}

// ---------------------------------------------------------------- manifest

/// Loads a manifest JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_manifest` null or writable.
#[no_mangle]
pub unsafe extern "C" fn aff_manifest_load(path: *const c_char, out_manifest: *mut *mut AffManifest) -> AffStatus {
    guard(|| {
        let p = path_arg(path, "path")?;
        let o = out(out_manifest, "out_manifest")?;
        let m = dataset::load_manifest(&p)?;
        *o = Box::into_raw(Box::new(AffManifest(m)));
        Ok(())
    })
}

/// Number of samples; 0 for a null handle.
///
/// # Safety
/// `manifest` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aff_manifest_len(manifest: *const AffManifest) -> usize {
    manifest.as_ref().map_or(0, |m| m.0.len())
}

/// Key and labels of sample `index`.
///
/// # Safety
/// `manifest` must be a live handle; output pointers writable.
#[no_mangle]
pub unsafe extern "C" fn aff_manifest_sample(
    manifest: *const AffManifest,
    index: usize,
    out_object: *mut u32,
    out_tool: *mut i32,
    out_action: *mut i32,
    out_repetition: *mut u32,
) -> AffStatus {
    guard(|| {
        let m = &deref(manifest, "manifest")?.0;
        let s = m.samples.get(index).map_or_else(
            || fail(AFF_ERR_ARGUMENT, format!("sample {index} out of range for {}", m.len())),
            Ok,
        )?;
        *out(out_object, "out_object")? = s.object_id;
        *out(out_tool, "out_tool")? = s.tool.code() as i32;
        *out(out_action, "out_action")? = s.action.code() as i32;
        *out(out_repetition, "out_repetition")? = s.repetition;
        Ok(())
    })
}

/// Checks combinations, duplicates and referenced files; stores the number
/// of issues found.
///
/// # Safety
/// `manifest` must be a live handle; `out_issues` writable.
#[no_mangle]
pub unsafe extern "C" fn aff_manifest_validate(manifest: *const AffManifest, out_issues: *mut usize) -> AffStatus {
    guard(|| {
        let m = &deref(manifest, "manifest")?.0;
        let n = out(out_issues, "out_issues")?;
        *n = validate_manifest(m).issues.len();
        Ok(())
    })
}

/// # Safety
/// `manifest` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn aff_manifest_free(manifest: *mut AffManifest) {
    if !manifest.is_null() {
        drop(Box::from_raw(manifest));
    }
}

// ------------------------------------------------------------------- split

/// Repetition-wise 6/2/2 split of every (object, tool, action) group.
///
/// # Safety
/// `manifest` must be a live handle; `out_split` writable.
#[no_mangle]
pub unsafe extern "C" fn aff_split_new(manifest: *const AffManifest, seed: u64, out_split: *mut *mut AffSplit) -> AffStatus {
    guard(|| {
        let m = &deref(manifest, "manifest")?.0;
        let o = out(out_split, "out_split")?;
        let s = split_by_repetition(m, SplitRatios::default(), seed)?;
        *o = Box::into_raw(Box::new(AffSplit(s)));
        Ok(())
    })
}

/// Size of one part; 0 for a null handle or unknown part.
///
/// # Safety
/// `split` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aff_split_len(split: *const AffSplit, part_code: i32) -> usize {
    match (split.as_ref(), part(part_code)) {
        (Some(s), Ok(p)) => s.0.part(p).len(),
        _ => 0,
    }
}

/// Copies the manifest indices of one part, ascending, into `out_indices`.
///
/// # Safety
/// `split` must be a live handle and `out_indices` hold `capacity` elements.
#[no_mangle]
pub unsafe extern "C" fn aff_split_indices(
    split: *const AffSplit,
    part_code: i32,
    out_indices: *mut usize,
    capacity: usize,
) -> AffStatus {
    guard(|| {
        let s = &deref(split, "split")?.0;
        let idx = s.part(part(part_code)?);
        if capacity < idx.len() {
            return fail(AFF_ERR_BUFFER, format!("need {} slots, got {capacity}", idx.len()));
        }
        slice_mut(out_indices, idx.len(), "out_indices")?.copy_from_slice(idx);
        Ok(())
    })
}

/// # Safety
/// `split` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn aff_split_free(split: *mut AffSplit) {
    if !split.is_null() {
        drop(Box::from_raw(split));
    }
}

// ------------------------------------------------------------------- model

/// Builds a randomly initialised model with the default first block.
///
/// # Safety
/// `out_model` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aff_model_new(
    depth_layers: u32,
    variant_code: i32,
    head_code: i32,
    seed: u64,
    out_model: *mut *mut AffModel,
) -> AffStatus {
    guard(|| {
        let o = out(out_model, "out_model")?;
        let cfg = ModelConfig::new(depth(depth_layers)?, variant(variant_code)?, head(head_code)?);
        *o = Box::into_raw(Box::new(AffModel(Model::new(cfg, seed)?)));
        Ok(())
    })
}

/// Loads a model from a checkpoint file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_model` writable.
#[no_mangle]
pub unsafe extern "C" fn aff_model_load(path: *const c_char, out_model: *mut *mut AffModel) -> AffStatus {
    guard(|| {
        let p = path_arg(path, "path")?;
        let o = out(out_model, "out_model")?;
        let ck = Checkpoint::load(&p)?;
        *o = Box::into_raw(Box::new(AffModel(Model::from_checkpoint(&ck)?)));
        Ok(())
    })
}

/// Writes the model as a self-describing checkpoint.
///
/// # Safety
/// `model` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn aff_model_save(model: *const AffModel, path: *const c_char) -> AffStatus {
    guard(|| {
        let m = &deref(model, "model")?.0;
        let p = path_arg(path, "path")?;
        Checkpoint::capture(m).save(&p)?;
        Ok(())
    })
}

/// Trainable parameter count; -1 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aff_model_parameter_count(model: *const AffModel) -> i64 {
    model.as_ref().map_or(-1, |m| m.0.parameter_count())
}

/// Number of input tensors and channels per input the model expects.
///
/// # Safety
/// `model` must be a live handle; output pointers writable.
#[no_mangle]
pub unsafe extern "C" fn aff_model_input_layout(
    model: *const AffModel,
    out_inputs: *mut usize,
    out_channels: *mut usize,
) -> AffStatus {
    guard(|| {
        let v = deref(model, "model")?.0.config().variant;
        *out(out_inputs, "out_inputs")? = v.input_count();
        *out(out_channels, "out_channels")? = v.in_channels();
        Ok(())
    })
}

/// Predicts labels for `batch` samples in evaluation mode.
///
/// `images` holds `batch × inputs × channels × side × side` normalised
/// floats, sample-major, inputs in the order of [`aff_model_input_layout`].
/// `actions` (length `batch`) is read only by tool-with-action models and
/// may be null otherwise. Outputs have length `batch`; heads the model lacks
/// yield [`AFF_NO_PREDICTION`]. A joint-16 model fills both outputs.
///
/// # Safety
/// Pointers must be valid for the lengths above; outputs may be null only
/// if unwanted.
#[no_mangle]
pub unsafe extern "C" fn aff_model_predict(
    model: *const AffModel,
    images: *const f32,
    batch: usize,
    side: usize,
    actions: *const i32,
    out_tool: *mut i32,
    out_action: *mut i32,
) -> AffStatus {
    guard(|| {
        let m = &deref(model, "model")?.0;
        let cfg = *m.config();
        if batch == 0 || side == 0 {
            return fail(AFF_ERR_ARGUMENT, "batch and side must be positive");
        }
        let (inputs, channels) = (cfg.variant.input_count(), cfg.variant.in_channels());
        let per_input = channels * side * side;
        let data = slice(images, batch * inputs * per_input, "images")?;
        let x = Tensor::from_slice(data).view([batch as i64, inputs as i64, channels as i64, side as i64, side as i64]);
        let xs: Vec<Tensor> = (0..inputs as i64).map(|i| x.select(1, i).contiguous()).collect();
        let onehot = if cfg.head.uses_action_input() {
            let codes = slice(actions, batch, "actions")?
                .iter()
                .map(|&a| action(a).map(|a| a.code() as i64))
                .collect::<Result<Vec<_>, _>>()?;
            Some(Tensor::from_slice(&codes).one_hot(4).to_kind(Kind::Float))
        } else {
            None
        };
        let logits = tch::no_grad(|| m.forward_inputs(&xs, onehot.as_ref(), false))?;
        let argmax = |k: HeadKind| -> Option<Vec<i64>> {
            logits.get(k).map(|t| Vec::<i64>::try_from(t.argmax(1, false)).expect("int64 argmax"))
        };
        let (mut tools, mut acts) = (argmax(HeadKind::Tool), argmax(HeadKind::Action));
        if let Some(joint) = argmax(HeadKind::Joint) {
            let pairs: Vec<(Tool, Action)> = joint
                .iter()
                .map(|&j| decode_joint_label(j as usize).expect("16-way head"))
                .collect();
            tools = Some(pairs.iter().map(|p| p.0.code() as i64).collect());
            acts = Some(pairs.iter().map(|p| p.1.code() as i64).collect());
        }
        for (dst, src, name) in [(out_tool, tools, "out_tool"), (out_action, acts, "out_action")] {
            if dst.is_null() {
                continue;
            }
            let dst = slice_mut(dst, batch, name)?;
            match src {
                Some(v) => dst.iter_mut().zip(v).for_each(|(d, s)| *d = s as i32),
                None => dst.fill(AFF_NO_PREDICTION),
            }
        }
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn aff_model_free(model: *mut AffModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Parameters of a standard encoder with a 1000-way classifier, for
/// comparison with published model sizes.
///
/// # Safety
/// `out_count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aff_parity_parameter_count(depth_layers: u32, out_count: *mut i64) -> AffStatus {
    guard(|| {
        let o = out(out_count, "out_count")?;
        *o = model::parity_parameter_count(depth(depth_layers)?)?;
        Ok(())
    })
}

// -------------------------------------------------------------- evaluation

/// Mean and half-width `z * s / sqrt(n)` of at least two values.
///
/// # Safety
/// `values` must hold `n` doubles; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn aff_confidence_interval(
    values: *const f64,
    n: usize,
    z: f64,
    out_mean: *mut f64,
    out_half_width: *mut f64,
) -> AffStatus {
    guard(|| {
        let v = slice(values, n, "values")?;
        let (mean, half) = eval::confidence_interval_z(v, z).map_err(|e| Failure(AFF_ERR_ARGUMENT, e.to_string()))?;
        *out(out_mean, "out_mean")? = mean;
        *out(out_half_width, "out_half_width")? = half;
        Ok(())
    })
}

/// Confusion matrix of `n` predictions over `classes` classes, row = true
/// class. `out_counts` receives `classes²` counts row-major; `out_normalized`
/// (nullable) the row-normalised values, zero rows for absent classes.
///
/// # Safety
/// `pred` and `truth` must hold `n` values; outputs `classes²`.
#[no_mangle]
pub unsafe extern "C" fn aff_confusion(
    pred: *const usize,
    truth: *const usize,
    n: usize,
    classes: usize,
    out_counts: *mut u64,
    out_normalized: *mut f64,
) -> AffStatus {
    guard(|| {
        let p = slice(pred, n, "pred")?;
        let t = slice(truth, n, "truth")?;
        let m = eval::confusion(p, t, classes, false).map_err(|e| Failure(AFF_ERR_ARGUMENT, e.to_string()))?;
        let counts = slice_mut(out_counts, classes * classes, "out_counts")?;
        for (dst, src) in counts.chunks_mut(classes.max(1)).zip(&m.counts) {
            dst.copy_from_slice(src);
        }
        if !out_normalized.is_null() {
            let norm = slice_mut(out_normalized, classes * classes, "out_normalized")?;
            for (dst, src) in norm.chunks_mut(classes.max(1)).zip(m.row_normalized()) {
                dst.copy_from_slice(&src);
            }
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_map_to_status_codes() {
        assert_eq!(Failure::from(Error::AmbiguousDisplacement).0, AFF_ERR_AMBIGUOUS);
        assert_eq!(Failure::from(Error::ModelConfig("x".into())).0, AFF_ERR_CONFIG);
    }

    #[test]
    fn panics_are_contained() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, AFF_ERR_PANIC);
        let msg = unsafe { CStr::from_ptr(aff_last_error()) }.to_str().unwrap();
        assert_eq!(msg, "panic: boom");
    }

    #[test]
    fn code_constants_match_enums() {
        assert_eq!(Tool::from_code(AFF_TOOL_SPATULA as usize), Some(Tool::Spatula));
        assert_eq!(Action::from_code(AFF_ACTION_RIGHT_TO_LEFT as usize), Some(Action::RightToLeft));
        assert_eq!(variant(AFF_VARIANT_SHARED_CENTRAL_1C1N).ok(), Some(FusionVariant::SharedCentral1C1N));
        assert_eq!(variant(AFF_VARIANT_STACKED_3C1N).ok(), Some(FusionVariant::Stacked3C1N));
        assert_eq!(head(AFF_HEAD_JOINT16).ok(), Some(HeadMode::Joint16));
        assert_eq!(head(AFF_HEAD_TOOL_WITH_ACTION).ok(), Some(HeadMode::ToolWithAction));
        assert_eq!(part(AFF_PART_TEST).ok(), Some(Part::Test));
        assert_eq!(AFF_INPUT_SIZE, dataset::INPUT_SIZE);
    }
}
