use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::labels::{Action, ImageSlot, Tool};
use crate::error::{Error, Result};

/// Objects in the complete acquisition grid.
pub const FULL_OBJECTS: u32 = 20;
/// Repetitions per (object, tool, action) combination.
pub const REPETITIONS: u32 = 10;
/// Samples in a complete manifest: 20 × 4 × 4 × 10.
pub const FULL_SAMPLE_COUNT: usize =
    FULL_OBJECTS as usize * Tool::COUNT * Action::COUNT * REPETITIONS as usize;

pub const DEFAULT_IMAGE_WIDTH: u32 = 640;
pub const DEFAULT_IMAGE_HEIGHT: u32 = 480;

/// Metadata keys understood by the loader and validator.
pub mod meta {
    pub const SOURCE: &str = "source";
    pub const IMAGE_WIDTH: &str = "image_width";
    pub const IMAGE_HEIGHT: &str = "image_height";
    pub const GENERATOR_SEED: &str = "generator_seed";
    /// Object count of the grid the manifest is meant to cover.
    pub const OBJECTS: &str = "objects";
    /// Repetition count of the grid the manifest is meant to cover.
    pub const REPETITIONS: &str = "repetitions";
}

/// Paths of the six views of one trial, relative to the manifest directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImagePaths {
    pub left_initial: PathBuf,
    pub left_final: PathBuf,
    pub center_initial: PathBuf,
    pub center_final: PathBuf,
    pub right_initial: PathBuf,
    pub right_final: PathBuf,
}

impl ImagePaths {
    pub fn from_fn(mut f: impl FnMut(ImageSlot) -> PathBuf) -> Self {
        let [li, lf, ci, cf, ri, rf] = ImageSlot::ALL;
        ImagePaths {
            left_initial: f(li),
            left_final: f(lf),
            center_initial: f(ci),
            center_final: f(cf),
            right_initial: f(ri),
            right_final: f(rf),
        }
    }

    pub fn get(&self, slot: ImageSlot) -> &Path {
        match slot.index() {
            0 => &self.left_initial,
            1 => &self.left_final,
            2 => &self.center_initial,
            3 => &self.center_final,
            4 => &self.right_initial,
            _ => &self.right_final,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (ImageSlot, &Path)> {
        ImageSlot::ALL.into_iter().map(move |s| (s, self.get(s)))
    }
}

/// Identity of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SampleKey {
    pub object_id: u32,
    pub tool: Tool,
    pub action: Action,
    pub repetition: u32,
}

impl SampleKey {
    pub fn group(&self) -> GroupKey {
        GroupKey {
            object_id: self.object_id,
            tool: self.tool,
            action: self.action,
        }
    }
}

impl fmt::Display for SampleKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(object={}, tool={}, action={}, rep={})",
            self.object_id, self.tool, self.action, self.repetition
        )
    }
}

/// The repetitions of one (object, tool, action) combination form a group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupKey {
    pub object_id: u32,
    pub tool: Tool,
    pub action: Action,
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(object={}, tool={}, action={})",
            self.object_id, self.tool, self.action
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sample {
    #[serde(rename = "object")]
    pub object_id: u32,
    pub tool: Tool,
    pub action: Action,
    #[serde(rename = "rep")]
    pub repetition: u32,
    pub images: ImagePaths,
}

impl Sample {
    pub fn key(&self) -> SampleKey {
        SampleKey {
            object_id: self.object_id,
            tool: self.tool,
            action: self.action,
            repetition: self.repetition,
        }
    }
}

/// Index of a dataset. Image paths are resolved against `root`, the
/// directory holding the manifest file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub metadata: BTreeMap<String, Value>,
    pub samples: Vec<Sample>,
    #[serde(skip)]
    pub root: PathBuf,
}

impl Manifest {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Manifest {
            metadata: BTreeMap::new(),
            samples: Vec::new(),
            root: root.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.root.join(path)
        }
    }

    pub fn image_path(&self, sample: &Sample, slot: ImageSlot) -> PathBuf {
        self.resolve(sample.images.get(slot))
    }

    fn meta_u32(&self, key: &str) -> Option<u32> {
        self.metadata
            .get(key)
            .and_then(Value::as_u64)
            .and_then(|v| u32::try_from(v).ok())
    }

    /// Resolution declared in metadata, defaulting to 640×480.
    pub fn declared_image_size(&self) -> (u32, u32) {
        (
            self.meta_u32(meta::IMAGE_WIDTH)
                .unwrap_or(DEFAULT_IMAGE_WIDTH),
            self.meta_u32(meta::IMAGE_HEIGHT)
                .unwrap_or(DEFAULT_IMAGE_HEIGHT),
        )
    }

    /// Grid extents (objects, repetitions) the manifest claims to cover.
    pub fn declared_grid(&self) -> (u32, u32) {
        (
            self.meta_u32(meta::OBJECTS).unwrap_or(FULL_OBJECTS),
            self.meta_u32(meta::REPETITIONS).unwrap_or(REPETITIONS),
        )
    }

    /// Checks ranges and key uniqueness.
    pub fn check(&self, path: &Path) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.samples.len());
        for (i, s) in self.samples.iter().enumerate() {
            if !(1..=FULL_OBJECTS).contains(&s.object_id) {
                return Err(Error::Schema {
                    path: path.to_path_buf(),
                    message: format!(
                        "samples[{i}]: object {} outside 1..={FULL_OBJECTS}",
                        s.object_id
                    ),
                });
            }
            if !(1..=REPETITIONS).contains(&s.repetition) {
                return Err(Error::Schema {
                    path: path.to_path_buf(),
                    message: format!(
                        "samples[{i}]: rep {} outside 1..={REPETITIONS}",
                        s.repetition
                    ),
                });
            }
            if !seen.insert(s.key()) {
                return Err(Error::DuplicateSample(s.key().to_string()));
            }
        }
        Ok(())
    }

    /// Parses a manifest document; `root` is used to resolve image paths.
    pub fn from_json_str(json: &str, root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        let mut m: Manifest = serde_json::from_str(json).map_err(|e| Error::Schema {
            path: root.clone(),
            message: e.to_string(),
        })?;
        m.root = root;
        let origin = m.root.clone();
        m.check(&origin)?;
        Ok(m)
    }

    pub fn to_json_string(&self) -> String {
        // Only plain maps and strings; serialization cannot fail.
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json_string();
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let root = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let m = Manifest::from_json_str(&text, root).map_err(|e| match e {
        Error::Schema { message, .. } => Error::Schema {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })?;
    if m.is_empty() {
        log::warn!("manifest {} has no samples", path.display());
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Issue {
    MissingCombination(SampleKey),
    MissingFile {
        sample: SampleKey,
        slot: ImageSlot,
        path: PathBuf,
    },
    UnreadableImage {
        sample: SampleKey,
        slot: ImageSlot,
        path: PathBuf,
        message: String,
    },
    DimensionMismatch {
        sample: SampleKey,
        slot: ImageSlot,
        path: PathBuf,
        expected: (u32, u32),
        actual: (u32, u32),
    },
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::MissingCombination(k) => write!(f, "missing combination {k}"),
            Issue::MissingFile { sample, slot, path } => {
                write!(f, "missing file {} for {sample} {slot}", path.display())
            }
            Issue::UnreadableImage {
                sample,
                slot,
                path,
                message,
            } => write!(
                f,
                "unreadable image {} for {sample} {slot}: {message}",
                path.display()
            ),
            Issue::DimensionMismatch {
                sample,
                slot,
                path,
                expected,
                actual,
            } => write!(
                f,
                "dimension mismatch {} for {sample} {slot}: expected {}x{}, found {}x{}",
                path.display(),
                expected.0,
                expected.1,
                actual.0,
                actual.1
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
    pub samples_checked: usize,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn missing_combinations(&self) -> impl Iterator<Item = &SampleKey> {
        self.issues.iter().filter_map(|i| match i {
            Issue::MissingCombination(k) => Some(k),
            _ => None,
        })
    }
}

/// Lists missing grid combinations, missing image files and images whose
/// size differs from the declared resolution. Never fails.
pub fn validate_manifest(m: &Manifest) -> ValidationReport {
    let mut report = ValidationReport {
        samples_checked: m.len(),
        ..Default::default()
    };
    let present: BTreeSet<SampleKey> = m.samples.iter().map(Sample::key).collect();
    let (objects, reps) = m.declared_grid();
    for object_id in 1..=objects {
        for tool in Tool::ALL {
            for action in Action::ALL {
                for repetition in 1..=reps {
                    let key = SampleKey {
                        object_id,
                        tool,
                        action,
                        repetition,
                    };
                    if !present.contains(&key) {
                        report.issues.push(Issue::MissingCombination(key));
                    }
                }
            }
        }
    }

    let expected = m.declared_image_size();
    for sample in &m.samples {
        for (slot, rel) in sample.images.iter() {
            let path = m.resolve(rel);
            if !path.is_file() {
                report.issues.push(Issue::MissingFile {
                    sample: sample.key(),
                    slot,
                    path,
                });
                continue;
            }
            match image::image_dimensions(&path) {
                Ok(actual) if actual != expected => report.issues.push(Issue::DimensionMismatch {
                    sample: sample.key(),
                    slot,
                    path,
                    expected,
                    actual,
                }),
                Ok(_) => {}
                Err(e) => report.issues.push(Issue::UnreadableImage {
                    sample: sample.key(),
                    slot,
                    path,
                    message: e.to_string(),
                }),
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(object_id: u32, tool: Tool, action: Action, repetition: u32) -> Sample {
        Sample {
            object_id,
            tool,
            action,
            repetition,
            images: ImagePaths::from_fn(|slot| {
                PathBuf::from(format!(
                    "o{object_id}_{tool}_{action}_{repetition}_{slot}.png"
                ))
            }),
        }
    }

    fn full_manifest() -> Manifest {
        let mut m = Manifest::new(".");
        for o in 1..=FULL_OBJECTS {
            for t in Tool::ALL {
                for a in Action::ALL {
                    for r in 1..=REPETITIONS {
                        m.samples.push(sample(o, t, a, r));
                    }
                }
            }
        }
        m
    }

    #[test]
    fn full_manifest_round_trips_through_json() {
        let m = full_manifest();
        assert_eq!(m.len(), FULL_SAMPLE_COUNT);
        assert_eq!(FULL_SAMPLE_COUNT, 3200);
        let back = Manifest::from_json_str(&m.to_json_string(), ".").unwrap();
        assert_eq!(back.len(), 3200);
        assert_eq!(back, m);
    }

    #[test]
    fn empty_sample_list_is_valid() {
        let m = Manifest::from_json_str(r#"{"metadata": {}, "samples": []}"#, ".").unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn duplicate_key_is_rejected() {
        let mut m = Manifest::new(".");
        m.samples.push(sample(1, Tool::Ruler, Action::Pull, 3));
        m.samples.push(sample(1, Tool::Ruler, Action::Pull, 3));
        let err = Manifest::from_json_str(&m.to_json_string(), ".").unwrap_err();
        assert!(matches!(err, Error::DuplicateSample(_)), "{err}");
    }

    #[test]
    fn schema_violations() {
        let bad_tool = r#"{"samples": [{"object": 1, "tool": "hammer", "action": "push", "rep": 1,
            "images": {"left_initial": "a", "left_final": "a", "center_initial": "a",
                       "center_final": "a", "right_initial": "a", "right_final": "a"}}]}"#;
        assert!(matches!(
            Manifest::from_json_str(bad_tool, "."),
            Err(Error::Schema { .. })
        ));
        let five_images = r#"{"samples": [{"object": 1, "tool": "ruler", "action": "push", "rep": 1,
            "images": {"left_initial": "a", "left_final": "a", "center_initial": "a",
                       "center_final": "a", "right_initial": "a"}}]}"#;
        assert!(matches!(
            Manifest::from_json_str(five_images, "."),
            Err(Error::Schema { .. })
        ));
        let mut m = Manifest::new(".");
        m.samples.push(sample(21, Tool::Ruler, Action::Pull, 3));
        assert!(matches!(
            Manifest::from_json_str(&m.to_json_string(), "."),
            Err(Error::Schema { .. })
        ));
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let err = load_manifest("/nonexistent/manifest.json").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn validation_names_missing_repetition() {
        let mut m = full_manifest();
        let removed = m.samples.remove(1234).key();
        let report = validate_manifest(&m);
        let missing: Vec<_> = report.missing_combinations().copied().collect();
        assert_eq!(missing, vec![removed]);
    }

    #[test]
    fn validation_flags_dimension_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let img = image::RgbImage::new(100, 100);
        img.save(dir.path().join("small.png")).unwrap();
        let mut m = Manifest::new(dir.path());
        m.metadata.insert(meta::OBJECTS.into(), 1.into());
        m.metadata.insert(meta::REPETITIONS.into(), 1.into());
        m.metadata.insert(meta::IMAGE_WIDTH.into(), 640.into());
        m.metadata.insert(meta::IMAGE_HEIGHT.into(), 480.into());
        for t in Tool::ALL {
            for a in Action::ALL {
                let mut s = sample(1, t, a, 1);
                s.images = ImagePaths::from_fn(|_| PathBuf::from("small.png"));
                m.samples.push(s);
            }
        }
        m.samples[0].images.right_final = PathBuf::from("absent.png");
        let report = validate_manifest(&m);
        let dims = report
            .issues
            .iter()
            .filter(|i| {
                matches!(
                    i,
                    Issue::DimensionMismatch {
                        actual: (100, 100),
                        expected: (640, 480),
                        ..
                    }
                )
            })
            .count();
        assert_eq!(dims, 16 * 6 - 1);
        assert!(report
            .issues
            .iter()
            .any(|i| matches!(i, Issue::MissingFile { slot, .. } if slot.key() == "right_final")));
        assert_eq!(report.missing_combinations().count(), 0);
    }
}
