//! Dataset manifests: loading, validation, and benchmark assembly.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{BBox, GuidanceLabel, VqaSample};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("malformed manifest at line {line}, column {column}: {message}")]
    MalformedManifest { line: usize, column: usize, message: String },
    #[error("sample {id:?}: field {field}: {message}")]
    InvalidField { id: String, field: &'static str, message: String },
    #[error("sample {id:?}: image {path} is missing or unreadable")]
    MissingImage { id: String, path: PathBuf },
    #[error("sample {id:?}: box {bbox} exceeds image bounds {img_w}x{img_h}")]
    BoundsViolation { id: String, bbox: BBox, img_w: u32, img_h: u32 },
    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),
    #[error("polygon has zero width or height")]
    DegeneratePolygon,
    #[error("pool has {available} samples, {requested} requested")]
    InsufficientPool { available: usize, requested: usize },
    #[error("sample {id:?}: expected label {expected}, found {found}")]
    LabelMismatch { id: String, expected: &'static str, found: String },
}

/// Samples plus the directory their `image_ref`s are relative to.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    pub image_root: PathBuf,
    pub samples: Vec<VqaSample>,
}

impl DatasetManifest {
    pub fn image_path(&self, sample: &VqaSample) -> PathBuf {
        self.image_root.join(&sample.image_ref)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn label_counts(&self) -> BTreeMap<GuidanceLabel, usize> {
        let mut counts = BTreeMap::new();
        for s in &self.samples {
            if let Some(l) = s.label {
                *counts.entry(l).or_insert(0) += 1;
            }
        }
        counts
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    image_root: String,
    samples: Vec<RawSample>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSample {
    id: String,
    image: String,
    question: String,
    answers: Vec<String>,
    #[serde(default)]
    bbox: Option<BBox>,
    #[serde(default)]
    polygon: Option<Vec<[i64; 2]>>,
    #[serde(default)]
    label: Option<GuidanceLabel>,
    #[serde(default)]
    split: Option<String>,
}

/// Tight axis-aligned box around polygon vertices.
pub fn bbox_from_polygon(points: &[(i64, i64)]) -> Result<BBox, IngestError> {
    if points.len() < 3 {
        return Err(IngestError::DegeneratePolygon);
    }
    let (mut x0, mut y0, mut x1, mut y1) = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
    for &(x, y) in points {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    if x1 == x0 || y1 == y0 {
        return Err(IngestError::DegeneratePolygon);
    }
    let fits = |v: i64| u32::try_from(v).is_ok();
    if !(fits(x0) && fits(y0) && fits(x1 - x0) && fits(y1 - y0)) {
        return Err(IngestError::DegeneratePolygon);
    }
    Ok(BBox::new(x0 as u32, y0 as u32, (x1 - x0) as u32, (y1 - y0) as u32))
}

/// Parses manifest JSON and checks schema-level invariants (ids, box/polygon exclusivity).
/// Image files are not touched. A relative `image_root` is resolved against `base_dir`.
pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<DatasetManifest, IngestError> {
    let raw: RawManifest = serde_json::from_str(text).map_err(|e| IngestError::MalformedManifest {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let root = PathBuf::from(&raw.image_root);
    let image_root = if root.is_absolute() { root } else { base_dir.join(root) };

    let mut seen = HashSet::new();
    let mut samples = Vec::with_capacity(raw.samples.len());
    for s in raw.samples {
        if s.id.is_empty() {
            return Err(IngestError::InvalidField { id: s.id, field: "id", message: "empty id".into() });
        }
        if !seen.insert(s.id.clone()) {
            return Err(IngestError::DuplicateId(s.id));
        }
        let bbox = match (s.bbox, s.polygon) {
            (Some(_), Some(_)) => {
                return Err(IngestError::InvalidField {
                    id: s.id,
                    field: "bbox",
                    message: "bbox and polygon are mutually exclusive".into(),
                })
            }
            (Some(b), None) => {
                if b.w == 0 || b.h == 0 {
                    return Err(IngestError::InvalidField {
                        id: s.id,
                        field: "bbox",
                        message: "zero width or height".into(),
                    });
                }
                Some(b)
            }
            (None, Some(poly)) => {
                let pts: Vec<(i64, i64)> = poly.iter().map(|p| (p[0], p[1])).collect();
                Some(bbox_from_polygon(&pts).map_err(|e| IngestError::InvalidField {
                    id: s.id.clone(),
                    field: "polygon",
                    message: e.to_string(),
                })?)
            }
            (None, None) => None,
        };
        samples.push(VqaSample {
            id: s.id,
            image_ref: s.image,
            question: s.question,
            answers: s.answers,
            bbox,
            split_tag: s.split,
            label: s.label,
        });
    }
    Ok(DatasetManifest { image_root, samples })
}

fn read_text(path: &Path) -> Result<String, IngestError> {
    std::fs::read_to_string(path).map_err(|e| IngestError::Io { path: path.to_path_buf(), message: e.to_string() })
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Parses without checking image files.
pub fn read_manifest(path: &Path) -> Result<DatasetManifest, IngestError> {
    parse_manifest(&read_text(path)?, &base_dir(path))
}

/// Parses and validates every image reference and box against the image's dimensions.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest, IngestError> {
    let manifest = read_manifest(path)?;
    validate_images(&manifest)?;
    Ok(manifest)
}

pub fn validate_images(manifest: &DatasetManifest) -> Result<(), IngestError> {
    for s in &manifest.samples {
        let path = manifest.image_path(s);
        let (w, h) = image::image_dimensions(&path)
            .map_err(|_| IngestError::MissingImage { id: s.id.clone(), path: path.clone() })?;
        if let Some(b) = s.bbox {
            if b.validate(w, h).is_err() {
                return Err(IngestError::BoundsViolation { id: s.id.clone(), bbox: b, img_w: w, img_h: h });
            }
        }
    }
    Ok(())
}

pub fn manifest_to_json(manifest: &DatasetManifest) -> String {
    let raw = RawManifest {
        image_root: manifest.image_root.to_string_lossy().into_owned(),
        samples: manifest
            .samples
            .iter()
            .map(|s| RawSample {
                id: s.id.clone(),
                image: s.image_ref.clone(),
                question: s.question.clone(),
                answers: s.answers.clone(),
                bbox: s.bbox,
                polygon: None,
                label: s.label,
                split: s.split_tag.clone(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&raw).expect("manifest serializes")
}

pub fn save_manifest(manifest: &DatasetManifest, path: &Path) -> Result<(), IngestError> {
    std::fs::write(path, manifest_to_json(manifest) + "\n")
        .map_err(|e| IngestError::Io { path: path.to_path_buf(), message: e.to_string() })
}

fn absolutize(manifest: &DatasetManifest, sample: &VqaSample) -> VqaSample {
    VqaSample { image_ref: manifest.image_path(sample).to_string_lossy().into_owned(), ..sample.clone() }
}

/// Joins human-labeled reframing and unanswerable samples with `n_answerable`
/// seeded draws from a grounded pool (labeled unchanged). Output is sorted by id;
/// image references are rewritten to full paths and `image_root` is left empty.
pub fn assemble_benchmark(
    reframe: &DatasetManifest,
    none: &DatasetManifest,
    answerable_pool: &DatasetManifest,
    n_answerable: usize,
    seed: u64,
) -> Result<DatasetManifest, IngestError> {
    if answerable_pool.len() < n_answerable {
        return Err(IngestError::InsufficientPool { available: answerable_pool.len(), requested: n_answerable });
    }
    let mut out = Vec::with_capacity(reframe.len() + none.len() + n_answerable);
    for s in &reframe.samples {
        match s.label {
            Some(l) if l.is_directional() => out.push(absolutize(reframe, s)),
            other => {
                return Err(IngestError::LabelMismatch {
                    id: s.id.clone(),
                    expected: "a direction",
                    found: format!("{other:?}"),
                })
            }
        }
    }
    for s in &none.samples {
        if s.label != Some(GuidanceLabel::None) {
            return Err(IngestError::LabelMismatch {
                id: s.id.clone(),
                expected: "none",
                found: format!("{:?}", s.label),
            });
        }
        out.push(absolutize(none, s));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = index::sample(&mut rng, answerable_pool.len(), n_answerable).into_vec();
    picks.sort_unstable();
    for i in picks {
        let s = &answerable_pool.samples[i];
        out.push(VqaSample {
            label: Some(GuidanceLabel::Unchanged),
            split_tag: Some("benchmark".into()),
            ..absolutize(answerable_pool, s)
        });
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    for w in out.windows(2) {
        if w[0].id == w[1].id {
            return Err(IngestError::DuplicateId(w[0].id.clone()));
        }
    }
    Ok(DatasetManifest { image_root: PathBuf::new(), samples: out })
}

/// Minimal view of a VizWiz VQA annotation record.
#[derive(Debug, Deserialize)]
pub struct VizwizRecord {
    pub image: String,
    pub question: String,
    pub answers: Vec<VizwizAnswer>,
    #[serde(default)]
    pub answerable: Option<u8>,
}

#[derive(Debug, Deserialize)]
pub struct VizwizAnswer {
    pub answer: String,
    #[serde(default)]
    pub answer_confidence: Option<String>,
}

/// Converts VizWiz VQA annotations plus optional grounding polygons (keyed by
/// image file name) into a manifest. Ids are the image file stems; answers keep
/// their annotation order with duplicates and "unanswerable" removed.
pub fn convert_vizwiz(
    records: &[VizwizRecord],
    grounding: &BTreeMap<String, Vec<[i64; 2]>>,
    image_root: &Path,
    split: Option<&str>,
) -> Result<DatasetManifest, IngestError> {
    let mut samples = Vec::with_capacity(records.len());
    for r in records {
        let id = Path::new(&r.image)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| r.image.clone());
        let mut answers: Vec<String> = Vec::new();
        for a in &r.answers {
            let text = a.answer.trim();
            if text.is_empty() || text == "unanswerable" || answers.iter().any(|x| x == text) {
                continue;
            }
            answers.push(text.to_string());
        }
        let bbox = match grounding.get(&r.image) {
            Some(poly) => {
                let pts: Vec<(i64, i64)> = poly.iter().map(|p| (p[0], p[1])).collect();
                Some(bbox_from_polygon(&pts)?)
            }
            None => None,
        };
        samples.push(VqaSample {
            id,
            image_ref: r.image.clone(),
            question: r.question.clone(),
            answers,
            bbox,
            split_tag: split.map(str::to_string),
            label: None,
        });
    }
    Ok(DatasetManifest { image_root: image_root.to_path_buf(), samples })
}
