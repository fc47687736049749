use std::ffi::{CStr, CString};
use std::ptr;

use affordance_ffi::*;
use AffStatus::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(aff_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn joint_labels_round_trip() {
    for t in 0..4 {
        for a in 0..4 {
            let mut j = -1;
            assert_eq!(unsafe { aff_encode_joint(t, a, &mut j) }, AFF_OK);
            assert_eq!(j, t * 4 + a);
            let (mut t2, mut a2) = (-1, -1);
            assert_eq!(unsafe { aff_decode_joint(j, &mut t2, &mut a2) }, AFF_OK);
            assert_eq!((t2, a2), (t, a));
        }
    }
    let mut j = 0;
    assert_eq!(unsafe { aff_encode_joint(4, 0, &mut j) }, AFF_ERR_ARGUMENT);
    assert!(last_error().contains("tool"));
    assert_eq!(unsafe { aff_decode_joint(16, &mut j, &mut j.clone()) }, AFF_ERR_ARGUMENT);
    assert_eq!(unsafe { aff_encode_joint(0, 0, ptr::null_mut()) }, AFF_ERR_NULL);
}

#[test]
fn oracle_matches_effect_table() {
    let (mut a, mut t) = (-1, -1);
    // 60 px to the right: third magnitude, left-to-right
    assert_eq!(unsafe { aff_oracle_infer(100.0, 100.0, 160.0, 101.0, &mut a, &mut t) }, AFF_OK);
    assert_eq!((a, t), (AFF_ACTION_LEFT_TO_RIGHT, AFF_TOOL_SLINGSHOT));
    assert_eq!(unsafe { aff_oracle_infer(5.0, 5.0, 5.0, 5.0, &mut a, &mut t) }, AFF_ERR_AMBIGUOUS);
    assert!(!last_error().is_empty());
}

#[test]
fn confidence_interval_closed_form() {
    let v = [0.0, 1.0];
    let (mut m, mut h) = (0.0, 0.0);
    assert_eq!(unsafe { aff_confidence_interval(v.as_ptr(), 2, 1.96, &mut m, &mut h) }, AFF_OK);
    assert_eq!(m, 0.5);
    assert!((h - 0.98).abs() < 1e-12);
    assert_eq!(unsafe { aff_confidence_interval(v.as_ptr(), 1, 1.96, &mut m, &mut h) }, AFF_ERR_ARGUMENT);
}

#[test]
fn confusion_counts_and_rows() {
    let pred = [0usize, 1, 1, 2];
    let truth = [0usize, 1, 2, 2];
    let mut counts = [0u64; 9];
    let mut norm = [0f64; 9];
    assert_eq!(
        unsafe { aff_confusion(pred.as_ptr(), truth.as_ptr(), 4, 3, counts.as_mut_ptr(), norm.as_mut_ptr()) },
        AFF_OK
    );
    assert_eq!(counts, [1, 0, 0, 0, 1, 0, 0, 1, 1]);
    assert_eq!(&norm[6..], &[0.0, 0.5, 0.5]);
    let bad = [3usize];
    assert_eq!(
        unsafe { aff_confusion(bad.as_ptr(), truth.as_ptr(), 1, 3, counts.as_mut_ptr(), ptr::null_mut()) },
        AFF_ERR_ARGUMENT
    );
}

#[test]
fn parity_counts() {
    let mut n = 0;
    assert_eq!(unsafe { aff_parity_parameter_count(18, &mut n) }, AFF_OK);
    assert_eq!(n, 11_689_512);
    assert_eq!(unsafe { aff_parity_parameter_count(34, &mut n) }, AFF_ERR_ARGUMENT);
}

#[test]
fn model_predict_save_load() {
    let mut model = ptr::null_mut();
    assert_eq!(
        unsafe { aff_model_new(18, AFF_VARIANT_SHARED_CENTRAL_1C1N, AFF_HEAD_DUAL, 1, &mut model) },
        AFF_OK
    );
    let (mut inputs, mut channels) = (0, 0);
    assert_eq!(unsafe { aff_model_input_layout(model, &mut inputs, &mut channels) }, AFF_OK);
    assert_eq!((inputs, channels), (2, 3));
    assert!(unsafe { aff_model_parameter_count(model) } > 11_000_000);

    let side = 32;
    let batch = 3;
    let images: Vec<f32> = (0..batch * inputs * channels * side * side)
        .map(|i| ((i * 7919) % 255) as f32 / 127.5 - 1.0)
        .collect();
    let mut tools = [9i32; 3];
    let mut actions = [9i32; 3];
    let status = unsafe {
        aff_model_predict(model, images.as_ptr(), batch, side, ptr::null(), tools.as_mut_ptr(), actions.as_mut_ptr())
    };
    assert_eq!(status, AFF_OK, "{}", last_error());
    assert!(tools.iter().chain(&actions).all(|v| (0..4).contains(v)));

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("m.safetensors").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { aff_model_save(model, path.as_ptr()) }, AFF_OK);
    let mut loaded = ptr::null_mut();
    assert_eq!(unsafe { aff_model_load(path.as_ptr(), &mut loaded) }, AFF_OK);
    let mut tools2 = [9i32; 3];
    let mut actions2 = [9i32; 3];
    unsafe {
        aff_model_predict(loaded, images.as_ptr(), batch, side, ptr::null(), tools2.as_mut_ptr(), actions2.as_mut_ptr())
    };
    assert_eq!((tools, actions), (tools2, actions2));
    unsafe {
        aff_model_free(model);
        aff_model_free(loaded);
    }
}

#[test]
fn single_head_models_mark_missing_outputs() {
    let mut model = ptr::null_mut();
    assert_eq!(
        unsafe { aff_model_new(18, AFF_VARIANT_STACKED_3C1N, AFF_HEAD_TOOL_WITH_ACTION, 0, &mut model) },
        AFF_OK
    );
    let side = 32;
    let images = vec![0.1f32; 2 * 18 * side * side];
    let mut tools = [9i32; 2];
    let mut acts = [9i32; 2];
    // the action input is required for this head
    assert_eq!(
        unsafe { aff_model_predict(model, images.as_ptr(), 2, side, ptr::null(), tools.as_mut_ptr(), acts.as_mut_ptr()) },
        AFF_ERR_NULL
    );
    let given = [AFF_ACTION_PUSH, AFF_ACTION_PULL];
    assert_eq!(
        unsafe { aff_model_predict(model, images.as_ptr(), 2, side, given.as_ptr(), tools.as_mut_ptr(), acts.as_mut_ptr()) },
        AFF_OK
    );
    assert_eq!(acts, [AFF_NO_PREDICTION; 2]);
    assert!(tools.iter().all(|t| (0..4).contains(t)));
    unsafe { aff_model_free(model) };
}

#[test]
fn bad_handles_and_paths() {
    let mut m = ptr::null_mut();
    let missing = CString::new("/nonexistent/manifest.json").unwrap();
    assert_eq!(unsafe { aff_manifest_load(missing.as_ptr(), &mut m) }, AFF_ERR_IO);
    assert!(m.is_null());
    assert_eq!(unsafe { aff_manifest_len(ptr::null()) }, 0);
    assert_eq!(unsafe { aff_model_parameter_count(ptr::null()) }, -1);
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { aff_split_new(ptr::null(), 0, &mut s) }, AFF_ERR_NULL);
    unsafe {
        aff_manifest_free(ptr::null_mut());
        aff_split_free(ptr::null_mut());
        aff_model_free(ptr::null_mut());
    }
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { aff_model_new(18, 7, AFF_HEAD_DUAL, 0, &mut model) }, AFF_ERR_ARGUMENT);
}

#[test]
fn generated_dataset_through_handles() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("ds");
    let c_root = CString::new(root.to_str().unwrap()).unwrap();
    let mut n = 0;
    // one object, ten repetitions: 160 samples
    let status = unsafe { aff_generate_dataset(c_root.as_ptr(), 1, 10, 3, &mut n) };
    assert_eq!(status, AFF_OK, "{}", last_error());
    assert_eq!(n, 160);

    let mpath = CString::new(root.join("manifest.json").to_str().unwrap()).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { aff_manifest_load(mpath.as_ptr(), &mut m) }, AFF_OK);
    assert_eq!(unsafe { aff_manifest_len(m) }, 160);
    let mut issues = 99;
    assert_eq!(unsafe { aff_manifest_validate(m, &mut issues) }, AFF_OK);
    assert_eq!(issues, 0);
    let (mut obj, mut tool, mut act, mut rep) = (0, -1, -1, 0);
    assert_eq!(unsafe { aff_manifest_sample(m, 0, &mut obj, &mut tool, &mut act, &mut rep) }, AFF_OK);
    assert_eq!(obj, 1);
    assert!((1..=10).contains(&rep));
    assert_eq!(
        unsafe { aff_manifest_sample(m, 160, &mut obj, &mut tool, &mut act, &mut rep) },
        AFF_ERR_ARGUMENT
    );

    let mut split = ptr::null_mut();
    assert_eq!(unsafe { aff_split_new(m, 5, &mut split) }, AFF_OK);
    let sizes: Vec<usize> = [AFF_PART_TRAIN, AFF_PART_VAL, AFF_PART_TEST]
        .iter()
        .map(|&p| unsafe { aff_split_len(split, p) })
        .collect();
    assert_eq!(sizes, vec![96, 32, 32]);
    let mut idx = vec![0usize; 32];
    assert_eq!(unsafe { aff_split_indices(split, AFF_PART_TEST, idx.as_mut_ptr(), 32) }, AFF_OK);
    assert!(idx.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(unsafe { aff_split_indices(split, AFF_PART_TRAIN, idx.as_mut_ptr(), 32) }, AFF_ERR_BUFFER);
    unsafe {
        aff_split_free(split);
        aff_manifest_free(m);
    }
}
