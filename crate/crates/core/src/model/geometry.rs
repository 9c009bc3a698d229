use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::scalar::Scalar;

use super::ModelError;

/// Default canvas side in pixels.
pub const DEFAULT_CANVAS_SIDE: u32 = 512;

/// Pixel dimensions of the drawing surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Canvas {
    pub w: u32,
    pub h: u32,
}

impl Canvas {
    pub const fn new(w: u32, h: u32) -> Self {
        Self { w, h }
    }

    pub fn area(&self) -> u64 {
        u64::from(self.w) * u64::from(self.h)
    }

    pub fn full_box(&self) -> BBox {
        BBox { x1: 0, y1: 0, x2: self.w, y2: self.h }
    }
}

impl Default for Canvas {
    fn default() -> Self {
        Self::new(DEFAULT_CANVAS_SIDE, DEFAULT_CANVAS_SIDE)
    }
}

/// Half-open integer pixel rectangle `[x1, x2) x [y1, y2)`.
///
/// Construction guarantees positive area. Containment in a particular canvas
/// is checked separately with [`BBox::check_within`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BBox {
    x1: u32,
    y1: u32,
    x2: u32,
    y2: u32,
}

impl BBox {
    pub fn new(x1: u32, y1: u32, x2: u32, y2: u32) -> Result<Self, ModelError> {
        if x1 >= x2 || y1 >= y2 {
            return Err(ModelError::InvalidBox([x1, y1, x2, y2]));
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    /// Builds a box from signed coordinates, clipping to the canvas.
    /// Returns `None` when nothing is left after clipping.
    pub fn clipped(x1: i64, y1: i64, x2: i64, y2: i64, canvas: Canvas) -> Option<Self> {
        let cx = |v: i64| v.clamp(0, i64::from(canvas.w)) as u32;
        let cy = |v: i64| v.clamp(0, i64::from(canvas.h)) as u32;
        Self::new(cx(x1), cy(y1), cx(x2), cy(y2)).ok()
    }

    pub fn x1(&self) -> u32 {
        self.x1
    }
    pub fn y1(&self) -> u32 {
        self.y1
    }
    pub fn x2(&self) -> u32 {
        self.x2
    }
    pub fn y2(&self) -> u32 {
        self.y2
    }
    pub fn width(&self) -> u32 {
        self.x2 - self.x1
    }
    pub fn height(&self) -> u32 {
        self.y2 - self.y1
    }
    pub fn coords(&self) -> [u32; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width()) * u64::from(self.height())
    }

    pub fn check_within(&self, canvas: Canvas) -> Result<(), ModelError> {
        if self.x2 > canvas.w || self.y2 > canvas.h {
            return Err(ModelError::OutOfCanvas { bbox: self.coords(), canvas });
        }
        Ok(())
    }

    pub fn is_within(&self, canvas: Canvas) -> bool {
        self.check_within(canvas).is_ok()
    }

    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        BBox::new(
            self.x1.max(other.x1),
            self.y1.max(other.y1),
            self.x2.min(other.x2),
            self.y2.min(other.y2),
        )
        .ok()
    }

    pub fn intersection_area(&self, other: &BBox) -> u64 {
        self.intersection(other).map_or(0, |b| b.area())
    }

    /// Smallest box covering both.
    pub fn union_hull(&self, other: &BBox) -> BBox {
        BBox {
            x1: self.x1.min(other.x1),
            y1: self.y1.min(other.y1),
            x2: self.x2.max(other.x2),
            y2: self.y2.max(other.y2),
        }
    }

    pub fn contains_pixel(&self, x: u32, y: u32) -> bool {
        x >= self.x1 && x < self.x2 && y >= self.y1 && y < self.y2
    }

    /// True when the boxes share a pixel or sit 8-adjacent to each other.
    pub fn touches(&self, other: &BBox) -> bool {
        self.x1 <= other.x2 && other.x1 <= self.x2 && self.y1 <= other.y2 && other.y1 <= self.y2
    }

    pub fn touches_canvas_edge(&self, canvas: Canvas) -> bool {
        self.x1 == 0 || self.y1 == 0 || self.x2 == canvas.w || self.y2 == canvas.h
    }

    /// Exact intersection and union pixel counts.
    pub fn overlap_counts(&self, other: &BBox) -> IouCounts {
        let inter = self.intersection_area(other);
        IouCounts { intersection: inter, union: self.area() + other.area() - inter }
    }

    /// Translates by `(dx, dy)` and slides the result back inside the canvas,
    /// keeping its size whenever it fits.
    pub fn shifted_within(&self, dx: i64, dy: i64, canvas: Canvas) -> BBox {
        let w = i64::from(self.width()).min(i64::from(canvas.w));
        let h = i64::from(self.height()).min(i64::from(canvas.h));
        let x1 = (i64::from(self.x1) + dx).clamp(0, i64::from(canvas.w) - w);
        let y1 = (i64::from(self.y1) + dy).clamp(0, i64::from(canvas.h) - h);
        BBox { x1: x1 as u32, y1: y1 as u32, x2: (x1 + w) as u32, y2: (y1 + h) as u32 }
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}, {}, {}]", self.x1, self.y1, self.x2, self.y2)
    }
}

impl Serialize for BBox {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.coords().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BBox {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let [x1, y1, x2, y2] = <[u32; 4]>::deserialize(deserializer)?;
        BBox::new(x1, y1, x2, y2).map_err(serde::de::Error::custom)
    }
}

/// Exact pixel counts behind an IoU value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IouCounts {
    pub intersection: u64,
    pub union: u64,
}

impl IouCounts {
    pub fn ratio<F: Scalar>(&self) -> F {
        F::from_ratio(self.intersection, self.union)
    }
}

/// Intersection over union of two boxes using exact pixel areas.
pub fn iou<F: Scalar>(a: &BBox, b: &BBox) -> F {
    a.overlap_counts(b).ratio()
}

/// Area of the union of a set of boxes, by coordinate compression.
pub fn union_area(boxes: &[BBox]) -> u64 {
    if boxes.is_empty() {
        return 0;
    }
    let mut xs: Vec<u32> = boxes.iter().flat_map(|b| [b.x1, b.x2]).collect();
    let mut ys: Vec<u32> = boxes.iter().flat_map(|b| [b.y1, b.y2]).collect();
    xs.sort_unstable();
    xs.dedup();
    ys.sort_unstable();
    ys.dedup();
    let mut total = 0u64;
    for xw in xs.windows(2) {
        for yw in ys.windows(2) {
            let covered = boxes
                .iter()
                .any(|b| b.x1 <= xw[0] && xw[1] <= b.x2 && b.y1 <= yw[0] && yw[1] <= b.y2);
            if covered {
                total += u64::from(xw[1] - xw[0]) * u64::from(yw[1] - yw[0]);
            }
        }
    }
    total
}

/// Pixels of `target` covered by at least one of `others`.
pub fn covered_area(target: &BBox, others: &[BBox]) -> u64 {
    let clipped: Vec<BBox> = others.iter().filter_map(|o| o.intersection(target)).collect();
    union_area(&clipped)
}
