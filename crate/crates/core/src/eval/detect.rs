//! Connected-component detector for images drawn in the renderer's palette.
//!
//! Pixels are labelled by (color, material); each 8-connected component of a
//! label becomes one detection. The shape is chosen by fitting the three
//! silhouettes to the component's box, scoring only pixels that are visibly
//! the object or visibly background, so occluders do not count against a
//! candidate shape.

use crate::model::{Attributes, BBox, Color, Image, Material, Shape};
use crate::render::{silhouette_contains, Palette, Tone};

use super::{Detection, UNKNOWN_CLASS};

const BACKGROUND: u8 = 16;
const UNKNOWN: u8 = 17;

/// Score attached to components whose colors are not in the palette.
pub const UNKNOWN_SCORE: f64 = 0.5;

#[derive(Debug, Clone, Default)]
pub struct Detector {
    pub palette: Palette,
}

fn label_of(tone: Tone) -> u8 {
    match tone {
        Tone::Background => BACKGROUND,
        Tone::Unknown => UNKNOWN,
        Tone::Object { color, material, .. } => (color.index() * 2 + material.index()) as u8,
    }
}

struct Component {
    label: u8,
    bbox: BBox,
}

impl Detector {
    pub fn new(palette: Palette) -> Self {
        Self { palette }
    }

    fn label_map(&self, image: &Image) -> Vec<u8> {
        let tones = self.palette.tones();
        let mut cache: Vec<([u8; 3], u8)> = tones.iter().map(|(rgb, t)| (*rgb, label_of(*t))).collect();
        image
            .pixels()
            .map(|px| {
                if let Some((_, l)) = cache.iter().find(|(rgb, _)| *rgb == px) {
                    return *l;
                }
                let l = label_of(self.palette.classify(px));
                cache.push((px, l));
                l
            })
            .collect()
    }

    fn components(labels: &[u8], w: u32, h: u32) -> (Vec<u32>, Vec<Component>) {
        let (wu, hu) = (w as usize, h as usize);
        let mut comp_of = vec![u32::MAX; labels.len()];
        let mut comps = Vec::new();
        let mut stack = Vec::new();
        for start in 0..labels.len() {
            let label = labels[start];
            if label == BACKGROUND || comp_of[start] != u32::MAX {
                continue;
            }
            let id = comps.len() as u32;
            let (mut x1, mut y1, mut x2, mut y2) = (usize::MAX, usize::MAX, 0, 0);
            comp_of[start] = id;
            stack.push(start);
            while let Some(i) = stack.pop() {
                let (x, y) = (i % wu, i / wu);
                x1 = x1.min(x);
                y1 = y1.min(y);
                x2 = x2.max(x + 1);
                y2 = y2.max(y + 1);
                for ny in y.saturating_sub(1)..(y + 2).min(hu) {
                    for nx in x.saturating_sub(1)..(x + 2).min(wu) {
                        let j = ny * wu + nx;
                        if labels[j] == label && comp_of[j] == u32::MAX {
                            comp_of[j] = id;
                            stack.push(j);
                        }
                    }
                }
            }
            let bbox = BBox::new(x1 as u32, y1 as u32, x2 as u32, y2 as u32).expect("non-empty component");
            comps.push(Component { label, bbox });
        }
        (comp_of, comps)
    }

    /// Silhouette with the fewest contradicted pixels. Sides of the box that
    /// border another object may be hidden, so the fit also tries boxes grown
    /// toward those sides and keeps the best box per shape.
    fn fit_shape(labels: &[u8], comp_of: &[u32], w: u32, h: u32, id: u32, bbox: &BBox) -> Shape {
        let grid = FitGrid::new(labels, comp_of, w, h, id, bbox);
        let mut best = (u64::MAX, Shape::Cube);
        for shape in [Shape::Cube, Shape::Cylinder, Shape::Sphere] {
            let miss = grid.best_miss(shape);
            if miss < best.0 {
                best = (miss, shape);
            }
        }
        best.1
    }

    /// Detects every object in `image`, tagging results with `image_id`.
    pub fn detect(&self, image_id: &str, image: &Image) -> Vec<Detection> {
        let (w, h) = (image.width(), image.height());
        let labels = self.label_map(image);
        let (comp_of, comps) = Self::components(&labels, w, h);
        comps
            .iter()
            .enumerate()
            .map(|(id, c)| {
                if c.label == UNKNOWN {
                    return Detection::new(image_id, UNKNOWN_CLASS, c.bbox, UNKNOWN_SCORE);
                }
                let color = Color::from_index(usize::from(c.label / 2)).unwrap();
                let material = Material::from_index(usize::from(c.label % 2)).unwrap();
                let shape = Self::fit_shape(&labels, &comp_of, w, h, id as u32, &c.bbox);
                let class = Attributes::new(color, material, shape).class_id();
                Detection::new(image_id, i64::from(class), c.bbox, 1.0)
            })
            .collect()
    }
}

/// Left end of the silhouette's span on row `y`; spans are symmetric about
/// the box's vertical axis and widen monotonically toward the middle column.
fn row_span(shape: Shape, bbox: &BBox, y: u32) -> Option<(u32, u32)> {
    let mid = bbox.x1() + (bbox.width() - 1) / 2;
    if !silhouette_contains(shape, bbox, mid, y) {
        return None;
    }
    let (mut lo, mut hi) = (bbox.x1(), mid);
    while lo < hi {
        let m = lo + (hi - lo) / 2;
        if silhouette_contains(shape, bbox, m, y) {
            hi = m;
        } else {
            lo = m + 1;
        }
    }
    Some((lo, bbox.x2() - (lo - bbox.x1())))
}

/// Per-row prefix counts of background and own pixels over the search area.
struct FitGrid {
    area: BBox,
    core: BBox,
    grow: [u32; 4],
    bg: Vec<u32>,
    own: Vec<u32>,
}

impl FitGrid {
    fn new(labels: &[u8], comp_of: &[u32], w: u32, h: u32, id: u32, core: &BBox) -> Self {
        let at = |x: u32, y: u32| (y as usize) * (w as usize) + x as usize;
        let foreign = |x: u32, y: u32| {
            let i = at(x, y);
            labels[i] != BACKGROUND && comp_of[i] != id
        };
        let reach = core.width().max(core.height());
        let left = core.x1() > 0 && (core.y1()..core.y2()).any(|y| foreign(core.x1() - 1, y));
        let right = core.x2() < w && (core.y1()..core.y2()).any(|y| foreign(core.x2(), y));
        let top = core.y1() > 0 && (core.x1()..core.x2()).any(|x| foreign(x, core.y1() - 1));
        let bottom = core.y2() < h && (core.x1()..core.x2()).any(|x| foreign(x, core.y2()));
        let grow = [
            if left { reach.min(core.x1()) } else { 0 },
            if top { reach.min(core.y1()) } else { 0 },
            if right { reach.min(w - core.x2()) } else { 0 },
            if bottom { reach.min(h - core.y2()) } else { 0 },
        ];
        let area = BBox::new(core.x1() - grow[0], core.y1() - grow[1], core.x2() + grow[2], core.y2() + grow[3])
            .expect("grown box");
        let stride = area.width() as usize + 1;
        let mut bg = vec![0u32; stride * area.height() as usize];
        let mut own = vec![0u32; stride * area.height() as usize];
        for (r, y) in (area.y1()..area.y2()).enumerate() {
            for (c, x) in (area.x1()..area.x2()).enumerate() {
                let i = at(x, y);
                let k = r * stride + c;
                bg[k + 1] = bg[k] + u32::from(labels[i] == BACKGROUND);
                own[k + 1] = own[k] + u32::from(comp_of[i] == id);
            }
        }
        Self { area, core: *core, grow, bg, own }
    }

    fn count(&self, table: &[u32], y: u32, x1: u32, x2: u32) -> u64 {
        let stride = self.area.width() as usize + 1;
        let row = (y - self.area.y1()) as usize * stride;
        let a = (x1 - self.area.x1()) as usize;
        let b = (x2 - self.area.x1()) as usize;
        u64::from(table[row + b] - table[row + a])
    }

    fn miss(&self, shape: Shape, b: &BBox) -> u64 {
        (b.y1()..b.y2())
            .map(|y| {
                let own_row = self.count(&self.own, y, self.area.x1(), self.area.x2());
                match row_span(shape, b, y) {
                    Some((l, r)) => self.count(&self.bg, y, l, r) + own_row - self.count(&self.own, y, l, r),
                    None => own_row,
                }
            })
            .sum()
    }

    fn boxed(&self, g: [u32; 4]) -> BBox {
        BBox::new(self.core.x1() - g[0], self.core.y1() - g[1], self.core.x2() + g[2], self.core.y2() + g[3])
            .expect("grown box")
    }

    /// Coordinate descent over how far each side is grown, coarse steps
    /// first and then single pixels around the best; ties keep the smaller
    /// box.
    fn best_miss(&self, shape: Shape) -> u64 {
        let mut g = [0u32; 4];
        let mut best = self.miss(shape, &self.core);
        if self.grow == [0; 4] {
            return best;
        }
        for _ in 0..3 {
            let before = best;
            for side in 0..4 {
                let step = (self.grow[side] / 12).max(1);
                let coarse = (0..=self.grow[side]).step_by(step as usize);
                for fine in [false, true] {
                    let centre = g[side];
                    let cands: Vec<u32> = if fine {
                        (centre.saturating_sub(step - 1)..=(centre + step - 1).min(self.grow[side])).collect()
                    } else {
                        coarse.clone().collect()
                    };
                    for d in cands {
                        let mut cand = g;
                        cand[side] = d;
                        let m = self.miss(shape, &self.boxed(cand));
                        if m < best || (m == best && d < g[side]) {
                            best = m;
                            g = cand;
                        }
                    }
                }
            }
            if best == before {
                break;
            }
        }
        best
    }
}
