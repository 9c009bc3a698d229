use std::io::Cursor;

use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{ExtendedColorType, ImageEncoder, ImageFormat};

use super::geometry::{BBox, Canvas};
use super::layout::Layout;
use super::ModelError;

pub type Rgb = [u8; 3];

/// 8-bit RGB raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Image {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl Image {
    pub fn filled(canvas: Canvas, color: Rgb) -> Self {
        let n = canvas.area() as usize;
        let mut data = Vec::with_capacity(n * 3);
        for _ in 0..n {
            data.extend_from_slice(&color);
        }
        Self { width: canvas.w, height: canvas.h, data }
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self, ModelError> {
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(ModelError::RawLength { expected, actual: data.len() });
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn canvas(&self) -> Canvas {
        Canvas::new(self.width, self.height)
    }
    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> Rgb {
        let i = self.offset(x, y);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn put(&mut self, x: u32, y: u32, c: Rgb) {
        let i = self.offset(x, y);
        self.data[i..i + 3].copy_from_slice(&c);
    }

    pub fn pixels(&self) -> impl Iterator<Item = Rgb> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }

    pub fn count_not(&self, color: Rgb) -> usize {
        self.pixels().filter(|p| *p != color).count()
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, ModelError> {
        let mut out = Vec::new();
        PngEncoder::new_with_quality(&mut out, CompressionType::Fast, FilterType::Adaptive)
            .write_image(&self.data, self.width, self.height, ExtendedColorType::Rgb8)?;
        Ok(out)
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Self, ModelError> {
        let img = image::load(Cursor::new(bytes), ImageFormat::Png)?.into_rgb8();
        let (w, h) = img.dimensions();
        Self::from_raw(w, h, img.into_raw())
    }
}

/// Binary raster: `true` marks pixels to update, `false` pixels to preserve.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl Mask {
    pub fn zeros(canvas: Canvas) -> Self {
        Self { width: canvas.w, height: canvas.h, bits: vec![false; canvas.area() as usize] }
    }

    pub fn ones(canvas: Canvas) -> Self {
        Self { width: canvas.w, height: canvas.h, bits: vec![true; canvas.area() as usize] }
    }

    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn canvas(&self) -> Canvas {
        Canvas::new(self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        let i = y as usize * self.width as usize + x as usize;
        self.bits[i] = v;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn popcount(&self) -> u64 {
        self.bits.iter().filter(|b| **b).count() as u64
    }

    pub fn fill_box(&mut self, bbox: &BBox, v: bool) {
        let x2 = bbox.x2().min(self.width);
        let y2 = bbox.y2().min(self.height);
        for y in bbox.y1()..y2 {
            let row = y as usize * self.width as usize;
            self.bits[row + bbox.x1() as usize..row + x2 as usize].fill(v);
        }
    }

    pub fn complement(&self) -> Mask {
        Mask { width: self.width, height: self.height, bits: self.bits.iter().map(|b| !b).collect() }
    }

    pub fn union(&self, other: &Mask) -> Result<Mask, ModelError> {
        check_dims(self.canvas(), other.canvas())?;
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect();
        Ok(Mask { width: self.width, height: self.height, bits })
    }

    /// Tightest box around the set bits, `None` for an empty mask.
    pub fn bounding_box(&self) -> Option<BBox> {
        let (mut x1, mut y1, mut x2, mut y2) = (u32::MAX, u32::MAX, 0, 0);
        for y in 0..self.height {
            let row = &self.bits[y as usize * self.width as usize..][..self.width as usize];
            let Some(first) = row.iter().position(|b| *b) else { continue };
            let last = row.iter().rposition(|b| *b).unwrap();
            x1 = x1.min(first as u32);
            x2 = x2.max(last as u32 + 1);
            y1 = y1.min(y);
            y2 = y + 1;
        }
        BBox::new(x1, y1, x2, y2).ok()
    }

    /// Grayscale PNG, 255 = update, 0 = preserve.
    pub fn encode_png(&self) -> Result<Vec<u8>, ModelError> {
        let raw: Vec<u8> = self.bits.iter().map(|b| if *b { 255 } else { 0 }).collect();
        let mut out = Vec::new();
        PngEncoder::new_with_quality(&mut out, CompressionType::Fast, FilterType::Adaptive)
            .write_image(&raw, self.width, self.height, ExtendedColorType::L8)?;
        Ok(out)
    }

    /// Any gray level of 128 or more counts as "update".
    pub fn decode_png(bytes: &[u8]) -> Result<Self, ModelError> {
        let img = image::load(Cursor::new(bytes), ImageFormat::Png)?.into_luma8();
        let (w, h) = img.dimensions();
        let bits = img.into_raw().into_iter().map(|v| v >= 128).collect();
        Ok(Mask { width: w, height: h, bits })
    }
}

fn check_dims(a: Canvas, b: Canvas) -> Result<(), ModelError> {
    if a != b {
        return Err(ModelError::Dimension { expected: a, actual: b });
    }
    Ok(())
}

/// Mask set exactly on the pixels of `bbox`.
pub fn mask_from_box(bbox: &BBox, canvas: Canvas) -> Mask {
    let mut m = Mask::zeros(canvas);
    m.fill_box(bbox, true);
    m
}

/// Union of every region box in the layout.
pub fn union_mask(layout: &Layout) -> Mask {
    let mut m = Mask::zeros(layout.canvas());
    for r in layout.regions() {
        m.fill_box(&r.bbox, true);
    }
    m
}

/// Everything not covered by a region box.
pub fn background_mask(layout: &Layout) -> Mask {
    union_mask(layout).complement()
}

/// Takes `gen` where the mask is set and `ctx` elsewhere.
pub fn composite(ctx: &Image, gen: &Image, mask: &Mask) -> Result<Image, ModelError> {
    check_dims(ctx.canvas(), gen.canvas())?;
    check_dims(ctx.canvas(), mask.canvas())?;
    let mut out = ctx.clone();
    for (i, take) in mask.bits.iter().enumerate() {
        if *take {
            out.data[i * 3..i * 3 + 3].copy_from_slice(&gen.data[i * 3..i * 3 + 3]);
        }
    }
    Ok(out)
}
