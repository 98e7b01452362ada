//! Domain types shared by every stage of the pipeline.
//!
//! Nothing here holds pixel data; images are referenced by path and only
//! decoded inside [`crate::perturb`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TypeError {
    #[error("invalid ratio {0:?}: expected a multiple of 0.1 strictly between 0 and 1")]
    InvalidRatio(String),
    #[error("unknown direction {0:?}")]
    UnknownDirection(String),
    #[error("unknown guidance label {0:?}")]
    UnknownLabel(String),
    #[error("letter map is not a bijection over the six options")]
    NotABijection,
    #[error("bbox {bbox} does not fit a {img_w}x{img_h} image")]
    BBoxOutOfBounds { bbox: BBox, img_w: u32, img_h: u32 },
    #[error("bbox has zero width or height")]
    EmptyBBox,
}

/// Camera-move direction. A perturbation is named by the move that undoes it:
/// an image truncated on its left side is fixed by moving the camera left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Left,
    Right,
    Up,
    Down,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Left, Direction::Right, Direction::Up, Direction::Down];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Left => "left",
            Direction::Right => "right",
            Direction::Up => "up",
            Direction::Down => "down",
        }
    }

    pub fn label(self) -> GuidanceLabel {
        match self {
            Direction::Left => GuidanceLabel::Left,
            Direction::Right => GuidanceLabel::Right,
            Direction::Up => GuidanceLabel::Up,
            Direction::Down => GuidanceLabel::Down,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = TypeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" => Ok(Direction::Left),
            "right" => Ok(Direction::Right),
            "up" => Ok(Direction::Up),
            "down" => Ok(Direction::Down),
            _ => Err(TypeError::UnknownDirection(s.to_string())),
        }
    }
}

/// The six guidance classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GuidanceLabel {
    Left,
    Right,
    Up,
    Down,
    Unchanged,
    None,
}

impl GuidanceLabel {
    /// Report order: the four directions, then O, then X.
    pub const ALL: [GuidanceLabel; 6] = [
        GuidanceLabel::Left,
        GuidanceLabel::Right,
        GuidanceLabel::Up,
        GuidanceLabel::Down,
        GuidanceLabel::Unchanged,
        GuidanceLabel::None,
    ];

    /// Option order of the multiple-choice template (A..F).
    pub const TEMPLATE_ORDER: [GuidanceLabel; 6] = [
        GuidanceLabel::Unchanged,
        GuidanceLabel::Left,
        GuidanceLabel::Right,
        GuidanceLabel::Up,
        GuidanceLabel::Down,
        GuidanceLabel::None,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GuidanceLabel::Left => "left",
            GuidanceLabel::Right => "right",
            GuidanceLabel::Up => "up",
            GuidanceLabel::Down => "down",
            GuidanceLabel::Unchanged => "unchanged",
            GuidanceLabel::None => "none",
        }
    }

    /// Text used for the option in prompts.
    pub fn display(self) -> &'static str {
        match self {
            GuidanceLabel::Left => "Left",
            GuidanceLabel::Right => "Right",
            GuidanceLabel::Up => "Up",
            GuidanceLabel::Down => "Down",
            GuidanceLabel::Unchanged => "Leave it unchanged",
            GuidanceLabel::None => "None of the other options",
        }
    }

    /// Heatmap / CSV axis label.
    pub fn short(self) -> &'static str {
        match self {
            GuidanceLabel::Left => "Left",
            GuidanceLabel::Right => "Right",
            GuidanceLabel::Up => "Up",
            GuidanceLabel::Down => "Down",
            GuidanceLabel::Unchanged => "O",
            GuidanceLabel::None => "X",
        }
    }

    pub fn direction(self) -> Option<Direction> {
        match self {
            GuidanceLabel::Left => Some(Direction::Left),
            GuidanceLabel::Right => Some(Direction::Right),
            GuidanceLabel::Up => Some(Direction::Up),
            GuidanceLabel::Down => Some(Direction::Down),
            _ => None,
        }
    }

    pub fn is_directional(self) -> bool {
        self.direction().is_some()
    }
}

impl fmt::Display for GuidanceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GuidanceLabel {
    type Err = TypeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_lowercase();
        match lower.as_str() {
            "left" => Ok(GuidanceLabel::Left),
            "right" => Ok(GuidanceLabel::Right),
            "up" => Ok(GuidanceLabel::Up),
            "down" => Ok(GuidanceLabel::Down),
            "unchanged" | "o" | "leave it unchanged" => Ok(GuidanceLabel::Unchanged),
            "none" | "x" | "none of the other options" => Ok(GuidanceLabel::None),
            _ => Err(TypeError::UnknownLabel(s.to_string())),
        }
    }
}

/// Axis-aligned box in integer pixels, origin top-left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl BBox {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        BBox { x, y, w, h }
    }

    pub fn right(&self) -> u64 {
        self.x as u64 + self.w as u64
    }

    pub fn bottom(&self) -> u64 {
        self.y as u64 + self.h as u64
    }

    pub fn validate(&self, img_w: u32, img_h: u32) -> Result<(), TypeError> {
        if self.w == 0 || self.h == 0 {
            return Err(TypeError::EmptyBBox);
        }
        if self.right() > img_w as u64 || self.bottom() > img_h as u64 {
            return Err(TypeError::BBoxOutOfBounds { bbox: *self, img_w, img_h });
        }
        Ok(())
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.x, self.y, self.w, self.h)
    }
}

/// Crop ratio stored as integer tenths (1..=9).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Ratio(u8);

impl Ratio {
    pub fn from_tenths(tenths: u8) -> Result<Self, TypeError> {
        if (1..=9).contains(&tenths) {
            Ok(Ratio(tenths))
        } else {
            Err(TypeError::InvalidRatio(format!("{tenths}/10")))
        }
    }

    pub fn tenths(self) -> u8 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 10.0
    }

    /// `round(self * extent)`, rounding halves away from zero, in exact integer arithmetic.
    pub fn scale(self, extent: u32) -> u32 {
        ((self.0 as u64 * extent as u64 * 2 + 10) / 20) as u32
    }
}

impl TryFrom<u8> for Ratio {
    type Error = TypeError;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Ratio::from_tenths(v)
    }
}

impl From<Ratio> for u8 {
    fn from(r: Ratio) -> u8 {
        r.0
    }
}

impl FromStr for Ratio {
    type Err = TypeError;

    /// Parses a decimal like `0.3`; anything off the tenths grid is rejected.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || TypeError::InvalidRatio(s.to_string());
        let v: f64 = s.trim().parse().map_err(|_| bad())?;
        let scaled = v * 10.0;
        let tenths = scaled.round();
        if !v.is_finite() || (scaled - tenths).abs() > 1e-9 || !(1.0..=9.0).contains(&tenths) {
            return Err(bad());
        }
        Ok(Ratio(tenths as u8))
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0.{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub direction: Direction,
    pub ratio: Ratio,
}

impl PerturbationSpec {
    pub fn new(direction: Direction, ratio: Ratio) -> Self {
        PerturbationSpec { direction, ratio }
    }

    /// The guidance that undoes this perturbation.
    pub fn guidance(&self) -> GuidanceLabel {
        self.direction.label()
    }
}

impl fmt::Display for PerturbationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.direction, self.ratio)
    }
}

/// One grounded image-question record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqaSample {
    pub id: String,
    pub image_ref: String,
    pub question: String,
    pub answers: Vec<String>,
    pub bbox: Option<BBox>,
    pub split_tag: Option<String>,
    /// Pre-annotated guidance (benchmark manifests only).
    pub label: Option<GuidanceLabel>,
}

pub const LETTERS: [char; 6] = ['A', 'B', 'C', 'D', 'E', 'F'];

/// Bijection from option letters A..F to the six guidance options.
/// Entry `i` is the option shown under letter `LETTERS[i]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<GuidanceLabel>", into = "Vec<GuidanceLabel>")]
pub struct LetterMap([GuidanceLabel; 6]);

impl LetterMap {
    pub fn template() -> Self {
        LetterMap(GuidanceLabel::TEMPLATE_ORDER)
    }

    pub fn new(options: [GuidanceLabel; 6]) -> Result<Self, TypeError> {
        let mut seen = [false; 6];
        for o in options {
            if std::mem::replace(&mut seen[o.index()], true) {
                return Err(TypeError::NotABijection);
            }
        }
        Ok(LetterMap(options))
    }

    pub fn options(&self) -> &[GuidanceLabel; 6] {
        &self.0
    }

    pub fn option_at(&self, letter: char) -> Option<GuidanceLabel> {
        let i = LETTERS.iter().position(|&l| l == letter.to_ascii_uppercase())?;
        Some(self.0[i])
    }

    pub fn letter_of(&self, label: GuidanceLabel) -> char {
        let i = self.0.iter().position(|&l| l == label).expect("bijection covers every label");
        LETTERS[i]
    }

    pub fn is_bijection(&self) -> bool {
        LetterMap::new(self.0).is_ok()
    }

    /// `A.Leave it unchanged. B.Left. ...` in letter order.
    pub fn render_options(&self) -> String {
        LETTERS
            .iter()
            .zip(self.0.iter())
            .map(|(l, o)| format!("{l}.{}.", o.display()))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl Default for LetterMap {
    fn default() -> Self {
        LetterMap::template()
    }
}

impl TryFrom<Vec<GuidanceLabel>> for LetterMap {
    type Error = TypeError;

    fn try_from(v: Vec<GuidanceLabel>) -> Result<Self, Self::Error> {
        let arr: [GuidanceLabel; 6] = v.try_into().map_err(|_| TypeError::NotABijection)?;
        LetterMap::new(arr)
    }
}

impl From<LetterMap> for Vec<GuidanceLabel> {
    fn from(m: LetterMap) -> Self {
        m.0.to_vec()
    }
}

/// Where a guidance sample came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    Perturbation { source_id: String, spec: PerturbationSpec },
    Mismatch { question_source_id: String, image_source_id: String },
    Benchmark { source_id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidanceSample {
    pub id: String,
    pub image_ref: String,
    pub question: String,
    pub label: GuidanceLabel,
    pub letter_map: LetterMap,
    pub provenance: Provenance,
}

impl GuidanceSample {
    /// Letter of the correct option under this sample's map.
    pub fn answer_letter(&self) -> char {
        self.letter_map.letter_of(self.label)
    }
}
