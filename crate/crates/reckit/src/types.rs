//! Core geometry and label types shared by every stage of the pipeline.
//!
//! All box coordinates downstream of [`normalize_box`] live on a fixed
//! 1000x1000 grid, so boxes compare exactly and can key maps. Pixel-space
//! input exists only at the ingestion boundary.

use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Upper bound (inclusive) for normalized coordinates.
pub const NORM_MAX: u16 = 999;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// The pixel box collapsed to zero width or height on the normalized grid.
    #[error("box has zero area after normalization")]
    ZeroArea,
    #[error("semantic tag is empty after canonicalization")]
    EmptyTag,
    #[error("relation endpoints are identical (same tag and box)")]
    SelfRelation,
}

/// Axis-aligned box on the normalized grid. Invariant: `x1 < x2`, `y1 < y2`,
/// all coordinates in `0..=999`. Corners are grid points, so two boxes that
/// denote the same region are equal as values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NormBox {
    x1: u16,
    y1: u16,
    x2: u16,
    y2: u16,
}

impl NormBox {
    pub fn new(x1: u16, y1: u16, x2: u16, y2: u16) -> Result<Self, DomainError> {
        if x2 > NORM_MAX || y2 > NORM_MAX {
            return Err(DomainError::InvalidBox(format!(
                "coordinates must be <= {NORM_MAX}, got [{x1}, {y1}, {x2}, {y2}]"
            )));
        }
        if x1 >= x2 || y1 >= y2 {
            return Err(DomainError::InvalidBox(format!(
                "box must have positive extent, got [{x1}, {y1}, {x2}, {y2}]"
            )));
        }
        Ok(NormBox { x1, y1, x2, y2 })
    }

    pub fn x1(&self) -> u16 {
        self.x1
    }

    pub fn y1(&self) -> u16 {
        self.y1
    }

    pub fn x2(&self) -> u16 {
        self.x2
    }

    pub fn y2(&self) -> u16 {
        self.y2
    }

    pub fn coords(&self) -> [u16; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    pub fn area(&self) -> f64 {
        f64::from(self.x2 - self.x1) * f64::from(self.y2 - self.y1)
    }

    /// Compact form without spaces, used by the DOT renderer.
    pub fn compact(&self) -> String {
        format!("[{},{},{},{}]", self.x1, self.y1, self.x2, self.y2)
    }
}

/// Canonical text form, identical to how a box renders inside markup.
impl fmt::Display for NormBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}, {}, {}]", self.x1, self.y1, self.x2, self.y2)
    }
}

impl Serialize for NormBox {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.coords().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for NormBox {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let [x1, y1, x2, y2] = <[u16; 4]>::deserialize(deserializer)?;
        NormBox::new(x1, y1, x2, y2).map_err(D::Error::custom)
    }
}

/// Raw pixel-space box, unvalidated until [`normalize_box`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl PixelBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        PixelBox { x1, y1, x2, y2 }
    }
}

/// Image dimensions in pixels, both at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageSize {
    width: u32,
    height: u32,
}

impl ImageSize {
    pub fn new(width: u32, height: u32) -> Result<Self, DomainError> {
        if width == 0 || height == 0 {
            return Err(DomainError::InvalidInput(format!(
                "image size must be positive, got {width}x{height}"
            )));
        }
        Ok(ImageSize { width, height })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }
}

/// Map a pixel box into the normalized grid: each coordinate becomes
/// `floor(c * 1000 / extent)`, clamped to `0..=999`. The mapping is monotone,
/// so nesting of pixel boxes is preserved coordinate-wise.
pub fn normalize_box(bx: &PixelBox, size: ImageSize) -> Result<NormBox, DomainError> {
    let w = f64::from(size.width());
    let h = f64::from(size.height());
    for c in [bx.x1, bx.y1, bx.x2, bx.y2] {
        if !c.is_finite() {
            return Err(DomainError::InvalidInput(format!(
                "pixel coordinate {c} is not finite"
            )));
        }
    }
    if bx.x1 < 0.0 || bx.y1 < 0.0 || bx.x2 > w || bx.y2 > h {
        return Err(DomainError::InvalidInput(format!(
            "pixel box [{}, {}, {}, {}] exceeds image bounds {}x{}",
            bx.x1, bx.y1, bx.x2, bx.y2, size.width(), size.height()
        )));
    }
    if bx.x1 >= bx.x2 || bx.y1 >= bx.y2 {
        return Err(DomainError::InvalidInput(format!(
            "pixel box [{}, {}, {}, {}] has no positive extent",
            bx.x1, bx.y1, bx.x2, bx.y2
        )));
    }
    let scale = |c: f64, d: f64| -> u16 { ((c * 1000.0 / d).floor().clamp(0.0, 999.0)) as u16 };
    let (x1, y1) = (scale(bx.x1, w), scale(bx.y1, h));
    let (x2, y2) = (scale(bx.x2, w), scale(bx.y2, h));
    if x1 == x2 || y1 == y2 {
        return Err(DomainError::ZeroArea);
    }
    NormBox::new(x1, y1, x2, y2).map_err(|_| DomainError::ZeroArea)
}

/// Intersection-over-union of two normalized boxes, treating coordinates as
/// continuous extents. Always in `[0, 1]`; boxes that only share a boundary
/// line intersect with area zero.
pub fn iou(a: &NormBox, b: &NormBox) -> f64 {
    let iw = f64::from(a.x2.min(b.x2)) - f64::from(a.x1.max(b.x1));
    let ih = f64::from(a.y2.min(b.y2)) - f64::from(a.y1.max(b.y1));
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    inter / (a.area() + b.area() - inter)
}

/// Object or predicate label in canonical form: Unicode-lowercased, runs of
/// whitespace collapsed to single spaces, trimmed, never empty.
///
/// The literal `"Unknown"` (capital U) is reserved for nodes whose label was
/// never stated; it can only be produced by [`SemanticTag::unknown`]. Feeding
/// the text `"Unknown"` through [`SemanticTag::new`] yields the ordinary tag
/// `"unknown"`, so the two never collide.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SemanticTag(String);

pub const UNKNOWN_TAG: &str = "Unknown";

impl SemanticTag {
    pub fn new(text: &str) -> Result<Self, DomainError> {
        let canonical = text
            .to_lowercase()
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ");
        if canonical.is_empty() {
            return Err(DomainError::EmptyTag);
        }
        Ok(SemanticTag(canonical))
    }

    pub fn unknown() -> Self {
        SemanticTag(UNKNOWN_TAG.to_owned())
    }

    pub fn is_unknown(&self) -> bool {
        self.0 == UNKNOWN_TAG
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SemanticTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for SemanticTag {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for SemanticTag {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        if s == UNKNOWN_TAG {
            return Ok(SemanticTag::unknown());
        }
        SemanticTag::new(&s).map_err(D::Error::custom)
    }
}

/// One grounded relation: both endpoints carry their tag and box. Endpoints
/// may share a box (a relation between an object and itself is nonsense, but
/// two labels on one region are not), just not both box and tag.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct RelationTriplet {
    pub subject_tag: SemanticTag,
    pub subject_box: NormBox,
    pub predicate: SemanticTag,
    pub object_tag: SemanticTag,
    pub object_box: NormBox,
}

impl RelationTriplet {
    pub fn new(
        subject_tag: SemanticTag,
        subject_box: NormBox,
        predicate: SemanticTag,
        object_tag: SemanticTag,
        object_box: NormBox,
    ) -> Result<Self, DomainError> {
        if subject_box == object_box && subject_tag == object_tag {
            return Err(DomainError::SelfRelation);
        }
        Ok(RelationTriplet {
            subject_tag,
            subject_box,
            predicate,
            object_tag,
            object_box,
        })
    }
}

#[derive(Deserialize)]
struct RelationTripletWire {
    subject_tag: SemanticTag,
    subject_box: NormBox,
    predicate: SemanticTag,
    object_tag: SemanticTag,
    object_box: NormBox,
}

impl<'de> Deserialize<'de> for RelationTriplet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let w = RelationTripletWire::deserialize(deserializer)?;
        RelationTriplet::new(w.subject_tag, w.subject_box, w.predicate, w.object_tag, w.object_box)
            .map_err(D::Error::custom)
    }
}
