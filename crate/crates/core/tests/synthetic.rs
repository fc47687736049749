use std::collections::BTreeMap;
use std::path::Path;

use affordance_core::dataset::{load_manifest, CameraId};
use affordance_core::synth::{
    generate_dataset, plan_dataset, render_scene, Counts, Point, SceneSpec,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Intensity-weighted centre of the magenta pixels within `radius` of
/// `near`.
fn magenta_centroid(img: &affordance_core::dataset::RawImage, near: Point, radius: f64) -> Point {
    let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
    for y in 0..img.height {
        for x in 0..img.width {
            let (cx, cy) = (f64::from(x) + 0.5, f64::from(y) + 0.5);
            if (cx - near.x).hypot(cy - near.y) > radius {
                continue;
            }
            let [r, g, b] = img.pixel(x, y).map(f64::from);
            let w = (r.min(b) - g) / 255.0;
            if w > 0.3 {
                sx += w * cx;
                sy += w * cy;
                sw += w;
            }
        }
    }
    assert!(sw > 0.0, "no marker pixels near ({:.1}, {:.1})", near.x, near.y);
    Point::new(sx / sw, sy / sw)
}

#[test]
fn side_cameras_follow_their_affine_map() {
    let spec = SceneSpec::default();
    let object = spec.object_style(1);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let centre = spec.camera(CameraId::Center).affine(spec.width, spec.height).apply(spec.marker);
    for cam in [CameraId::Left, CameraId::Right, CameraId::Center] {
        let img = render_scene(&spec, &object, spec.start_center, 0.0, cam, &mut rng).unwrap();
        let map = spec.camera(cam).affine(spec.width, spec.height);
        let expected = map.apply(spec.marker);
        let found = magenta_centroid(&img, expected, 2.0 * spec.marker_radius + 6.0);
        assert!(found.distance(expected) < 0.5, "{cam}: found {found:?}, expected {expected:?}");
        // mapping the detection back lands on the desk marker
        let back = map.inverse().apply(found);
        assert!(back.distance(spec.marker) < 0.6, "{cam}: {back:?}");
        if cam != CameraId::Center {
            assert!(found.distance(centre) > 10.0, "{cam} view is not displaced");
        }
    }
}

fn hash_tree(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, hex::encode(Sha256::digest(std::fs::read(&p).unwrap())));
            }
        }
    }
    out
}

#[test]
fn generation_is_reproducible_across_thread_counts() {
    let counts = Counts {
        objects: 1,
        repetitions: 2,
    };
    let spec = SceneSpec::default();
    let dir = tempfile::tempdir().unwrap();
    let mut trees = Vec::new();
    for threads in [1, 3] {
        let out = dir.path().join(format!("t{threads}"));
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let m = pool.install(|| generate_dataset(&spec, counts, 42, &out)).unwrap();
        assert_eq!(m.len(), 32);
        assert_eq!(load_manifest(out.join("manifest.json")).unwrap().samples, m.samples);
        trees.push(hash_tree(&out));
    }
    assert_eq!(trees[0].len(), 32 * 6 + 2);
    assert_eq!(trees[0], trees[1]);

    let other = dir.path().join("seed43");
    generate_dataset(&spec, counts, 43, &other).unwrap();
    let changed = hash_tree(&other);
    assert_ne!(changed, trees[0]);
}

#[test]
fn invalid_output_location_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("occupied");
    std::fs::write(&file, b"x").unwrap();
    let counts = Counts {
        objects: 1,
        repetitions: 1,
    };
    assert!(generate_dataset(&SceneSpec::default(), counts, 0, &file).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn planned_objects_stay_inside_every_frame(seed in any::<u64>(), objects in 1u32..=20) {
        let spec = SceneSpec::default();
        let counts = Counts { objects, repetitions: 10 };
        for plan in plan_dataset(&spec, counts, seed) {
            let r = spec.object_style(plan.object_id).bounding_radius();
            for cam in CameraId::ALL {
                let c = spec.camera(cam);
                let map = c.affine(spec.width, spec.height);
                for p in [plan.start, plan.end] {
                    let q = map.apply(p);
                    let rr = r * c.scale;
                    prop_assert!(q.x - rr >= 0.0 && q.y - rr >= 0.0, "{cam} {:?}", plan.key());
                    prop_assert!(q.x + rr <= f64::from(spec.width) && q.y + rr <= f64::from(spec.height));
                }
            }
        }
    }
}
