//! Directional crop perturbations.
//!
//! The target box is split into ten equal zones along the cut axis. A spec
//! `(d, r)` places the cut `r` of the way into the box from side `d` and drops
//! everything on that side of the cut, image margin included. The other three
//! image edges are kept.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use image::codecs::jpeg::JpegEncoder;
use image::{DynamicImage, ImageError};
use thiserror::Error;

use crate::types::{BBox, Direction, PerturbationSpec, Ratio, TypeError};

pub const JPEG_QUALITY: u8 = 95;

#[derive(Debug, Error)]
pub enum PerturbError {
    #[error(transparent)]
    InvalidGeometry(#[from] TypeError),
    #[error("crop {spec} of bbox {bbox} leaves an empty region")]
    EmptyCrop { bbox: BBox, spec: PerturbationSpec },
    #[error("perturbation range {lo}..{hi} step {step} is empty")]
    EmptyRange { lo: u8, hi: u8, step: u8 },
    #[error("cannot decode {path}: {source}")]
    Decode { path: PathBuf, source: ImageError },
    #[error("cannot write {path}: {message}")]
    Write { path: PathBuf, message: String },
}

/// Retained region of the source image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CropRect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl std::fmt::Display for CropRect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{},{}", self.x, self.y, self.w, self.h)
    }
}

pub fn compute_crop(img_w: u32, img_h: u32, bbox: BBox, spec: PerturbationSpec) -> Result<CropRect, PerturbError> {
    bbox.validate(img_w, img_h)?;
    let r = spec.ratio;
    let rect = match spec.direction {
        Direction::Left => {
            let x = bbox.x + r.scale(bbox.w);
            CropRect { x, y: 0, w: img_w - x, h: img_h }
        }
        Direction::Right => {
            let end = bbox.x + bbox.w - r.scale(bbox.w);
            CropRect { x: 0, y: 0, w: end, h: img_h }
        }
        Direction::Up => {
            let y = bbox.y + r.scale(bbox.h);
            CropRect { x: 0, y, w: img_w, h: img_h - y }
        }
        Direction::Down => {
            let end = bbox.y + bbox.h - r.scale(bbox.h);
            CropRect { x: 0, y: 0, w: img_w, h: end }
        }
    };
    if rect.w == 0 || rect.h == 0 {
        return Err(PerturbError::EmptyCrop { bbox, spec });
    }
    Ok(rect)
}

/// Fraction of the bbox extent along `direction`'s axis that lies inside `rect`.
pub fn visible_fraction(bbox: BBox, direction: Direction, rect: CropRect) -> f64 {
    let (b0, b1, r0, r1) = match direction {
        Direction::Left | Direction::Right => {
            (bbox.x as u64, bbox.right(), rect.x as u64, rect.x as u64 + rect.w as u64)
        }
        Direction::Up | Direction::Down => {
            (bbox.y as u64, bbox.bottom(), rect.y as u64, rect.y as u64 + rect.h as u64)
        }
    };
    let overlap = b1.min(r1).saturating_sub(b0.max(r0));
    overlap as f64 / (b1 - b0) as f64
}

/// All `(direction, ratio)` pairs on the grid, directions outermost.
/// Bounds and step are in tenths.
pub fn perturbation_grid(lo: Ratio, hi: Ratio, step_tenths: u8) -> Result<Vec<PerturbationSpec>, PerturbError> {
    if lo > hi || step_tenths == 0 {
        return Err(PerturbError::EmptyRange { lo: lo.tenths(), hi: hi.tenths(), step: step_tenths });
    }
    let ratios: Vec<Ratio> = (lo.tenths()..=hi.tenths())
        .step_by(step_tenths as usize)
        .map(Ratio::from_tenths)
        .collect::<Result<_, _>>()?;
    Ok(Direction::ALL
        .iter()
        .flat_map(|&d| ratios.iter().map(move |&r| PerturbationSpec::new(d, r)))
        .collect())
}

/// `{id}_{direction}_{tenths}.jpg`
pub fn output_name(out_id: &str, spec: PerturbationSpec) -> String {
    format!("{out_id}_{}_{}.jpg", spec.direction, spec.ratio.tenths())
}

pub fn decode(path: &Path) -> Result<DynamicImage, PerturbError> {
    let reader = image::ImageReader::open(path)
        .map_err(|e| PerturbError::Decode { path: path.to_path_buf(), source: ImageError::IoError(e) })?
        .with_guessed_format()
        .map_err(|e| PerturbError::Decode { path: path.to_path_buf(), source: ImageError::IoError(e) })?;
    reader
        .decode()
        .map_err(|source| PerturbError::Decode { path: path.to_path_buf(), source })
}

/// Crops an already-decoded image and writes it as baseline JPEG without metadata.
pub fn write_crop(
    img: &DynamicImage,
    rect: CropRect,
    out_dir: &Path,
    out_id: &str,
    spec: PerturbationSpec,
) -> Result<PathBuf, PerturbError> {
    let out = out_dir.join(output_name(out_id, spec));
    write_jpeg(&img.crop_imm(rect.x, rect.y, rect.w, rect.h), &out)?;
    Ok(out)
}

pub fn write_jpeg(img: &DynamicImage, out: &Path) -> Result<(), PerturbError> {
    let werr = |message: String| PerturbError::Write { path: out.to_path_buf(), message };
    if let Some(parent) = out.parent() {
        std::fs::create_dir_all(parent).map_err(|e| werr(e.to_string()))?;
    }
    let file = File::create(out).map_err(|e| werr(e.to_string()))?;
    let mut writer = BufWriter::new(file);
    let rgb = img.to_rgb8();
    JpegEncoder::new_with_quality(&mut writer, JPEG_QUALITY)
        .encode_image(&rgb)
        .map_err(|e| werr(e.to_string()))?;
    std::io::Write::flush(&mut writer).map_err(|e| werr(e.to_string()))
}

/// Decodes `image_ref`, crops to `rect` and writes `{out_id}_{dir}_{tenths}.jpg` into `out_dir`.
pub fn apply_crop(
    image_ref: &Path,
    rect: CropRect,
    out_dir: &Path,
    out_id: &str,
    spec: PerturbationSpec,
) -> Result<PathBuf, PerturbError> {
    let img = decode(image_ref)?;
    if rect.w == 0 || rect.h == 0 || rect.x + rect.w > img.width() || rect.y + rect.h > img.height() {
        return Err(PerturbError::InvalidGeometry(TypeError::BBoxOutOfBounds {
            bbox: BBox::new(rect.x, rect.y, rect.w, rect.h),
            img_w: img.width(),
            img_h: img.height(),
        }));
    }
    write_crop(&img, rect, out_dir, out_id, spec)
}
