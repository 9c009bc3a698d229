//! Domain types and exact pixel geometry shared by every other module.

mod geometry;
mod layout;
mod object;
mod raster;

use thiserror::Error;

pub use geometry::{covered_area, iou, union_area, BBox, Canvas, IouCounts, DEFAULT_CANVAS_SIDE};
pub use layout::{Layout, Region, Scene, Skill};
pub use object::{Attributes, Color, Material, ObjectSpec, Shape, NUM_CLASSES};
pub use raster::{background_mask, composite, mask_from_box, union_mask, Image, Mask, Rgb};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid box {0:?}: need x1 < x2 and y1 < y2")]
    InvalidBox([u32; 4]),
    #[error("box {bbox:?} exceeds canvas {}x{}", canvas.w, canvas.h)]
    OutOfCanvas { bbox: [u32; 4], canvas: Canvas },
    #[error("dimension mismatch: expected {}x{}, got {}x{}", expected.w, expected.h, actual.w, actual.h)]
    Dimension { expected: Canvas, actual: Canvas },
    #[error("raw buffer has {actual} bytes, expected {expected}")]
    RawLength { expected: usize, actual: usize },
    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),
    #[error("png codec: {0}")]
    Png(#[from] image::ImageError),
}
