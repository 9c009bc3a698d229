//! Deterministic 2D raster renderer for CLEVR-style objects.
//!
//! Objects are flat silhouettes fitted to their box: a filled square for
//! cubes, the inscribed ellipse for spheres and a rounded rectangle for
//! cylinders. Rubber is a flat fill; metal is a darker body with a lighter
//! off-center highlight band. There is no anti-aliasing, so every pixel is
//! one of the palette tones.

use crate::model::{Attributes, BBox, Canvas, Color, Image, Layout, Mask, Material, ObjectSpec, Region, Rgb, Scene, Shape};

/// Nearest-tone matching accepts colors up to this L-inf distance.
pub const TONE_TOLERANCE: u8 = 12;

/// What a single pixel depicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tone {
    Background,
    Object { color: Color, material: Material, highlight: bool },
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Palette {
    pub background: Rgb,
    pub base: [Rgb; 8],
    rubber: [Rgb; 8],
    metal_body: [Rgb; 8],
    metal_highlight: [Rgb; 8],
}

impl Default for Palette {
    fn default() -> Self {
        // CLEVR's colors, with brown pulled away from red.
        let base: [Rgb; 8] = [
            [87, 87, 87],
            [173, 35, 35],
            [42, 75, 215],
            [29, 105, 20],
            [120, 80, 30],
            [129, 38, 192],
            [41, 208, 208],
            [255, 238, 51],
        ];
        let map = |f: fn(u8) -> u8| base.map(|c| c.map(f));
        Palette {
            background: [120, 120, 120],
            base,
            rubber: base,
            metal_body: map(|v| (u16::from(v) * 3 / 5) as u8),
            metal_highlight: map(|v| v + ((255 - u16::from(v)) * 2 / 5) as u8),
        }
    }
}

impl Palette {
    pub fn tone_rgb(&self, color: Color, material: Material, highlight: bool) -> Rgb {
        let i = color.index();
        match (material, highlight) {
            (Material::Rubber, _) => self.rubber[i],
            (Material::Metal, false) => self.metal_body[i],
            (Material::Metal, true) => self.metal_highlight[i],
        }
    }

    /// Every distinct tone with its meaning.
    pub fn tones(&self) -> Vec<(Rgb, Tone)> {
        let mut out = vec![(self.background, Tone::Background)];
        for &color in Color::ALL {
            for (material, highlight) in
                [(Material::Rubber, false), (Material::Metal, false), (Material::Metal, true)]
            {
                out.push((
                    self.tone_rgb(color, material, highlight),
                    Tone::Object { color, material, highlight },
                ));
            }
        }
        out
    }

    /// Maps a pixel to the nearest tone within [`TONE_TOLERANCE`].
    pub fn classify(&self, px: Rgb) -> Tone {
        let mut best = (u8::MAX, Tone::Unknown);
        for (rgb, tone) in self.tones() {
            let d = linf(px, rgb);
            if d < best.0 {
                best = (d, tone);
            }
        }
        if best.0 <= TONE_TOLERANCE {
            best.1
        } else {
            Tone::Unknown
        }
    }
}

pub fn linf(a: Rgb, b: Rgb) -> u8 {
    (0..3).map(|i| a[i].abs_diff(b[i])).max().unwrap()
}

/// Whether pixel `(x, y)` belongs to the silhouette of `shape` fitted to `bbox`.
pub fn silhouette_contains(shape: Shape, bbox: &BBox, x: u32, y: u32) -> bool {
    if !bbox.contains_pixel(x, y) {
        return false;
    }
    let w = i64::from(bbox.width());
    let h = i64::from(bbox.height());
    // Doubled coordinates so pixel centers are integers.
    let px = 2 * i64::from(x - bbox.x1()) + 1;
    let py = 2 * i64::from(y - bbox.y1()) + 1;
    match shape {
        Shape::Cube => true,
        Shape::Sphere => {
            let dx = px - w;
            let dy = py - h;
            dx * dx * h * h + dy * dy * w * w <= w * w * h * h
        }
        Shape::Cylinder => {
            let r = w.min(h) / 3;
            if r == 0 {
                return true;
            }
            let cx = if px < 2 * r { 2 * r } else if px > 2 * (w - r) { 2 * (w - r) } else { px };
            let cy = if py < 2 * r { 2 * r } else if py > 2 * (h - r) { 2 * (h - r) } else { py };
            let (dx, dy) = (px - cx, py - cy);
            dx * dx + dy * dy <= 4 * r * r
        }
    }
}

/// Highlight band of the metal shading, a disc centered up and to the left.
fn in_highlight(bbox: &BBox, x: u32, y: u32) -> bool {
    let w = i64::from(bbox.width());
    let h = i64::from(bbox.height());
    let a = 10 * (2 * i64::from(x - bbox.x1()) + 1) - 7 * w;
    let b = 10 * (2 * i64::from(y - bbox.y1()) + 1) - 7 * h;
    a * a * h * h + b * b * w * w < 16 * w * w * h * h
}

fn object_rgb(palette: &Palette, attrs: Attributes, bbox: &BBox, x: u32, y: u32) -> Rgb {
    let highlight = attrs.material == Material::Metal && in_highlight(bbox, x, y);
    palette.tone_rgb(attrs.color, attrs.material, highlight)
}

/// Draws the object's silhouette into `img`, leaving other pixels untouched.
pub fn draw_object(img: &mut Image, palette: &Palette, attrs: Attributes, bbox: &BBox) {
    let x2 = bbox.x2().min(img.width());
    let y2 = bbox.y2().min(img.height());
    for y in bbox.y1()..y2 {
        for x in bbox.x1()..x2 {
            if silhouette_contains(attrs.shape, bbox, x, y) {
                img.put(x, y, object_rgb(palette, attrs, bbox, x, y));
            }
        }
    }
}

/// A rendered object cut to its box.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Patch {
    pub bbox: BBox,
    /// Box-sized image; background outside the silhouette.
    pub image: Image,
    /// Box-sized silhouette.
    pub silhouette: Mask,
}

impl Patch {
    /// Copies silhouette pixels into `img` at the patch's box.
    pub fn paste_into(&self, img: &mut Image) {
        for dy in 0..self.bbox.height() {
            for dx in 0..self.bbox.width() {
                let (x, y) = (self.bbox.x1() + dx, self.bbox.y1() + dy);
                if self.silhouette.get(dx, dy) && x < img.width() && y < img.height() {
                    img.put(x, y, self.image.get(dx, dy));
                }
            }
        }
    }
}

pub fn render_object_patch(palette: &Palette, attrs: Attributes, target: &BBox) -> Patch {
    let local = Canvas::new(target.width(), target.height());
    let mut image = Image::filled(local, palette.background);
    let mut silhouette = Mask::zeros(local);
    for dy in 0..target.height() {
        for dx in 0..target.width() {
            let (x, y) = (target.x1() + dx, target.y1() + dy);
            if silhouette_contains(attrs.shape, target, x, y) {
                image.put(dx, dy, object_rgb(palette, attrs, target, x, y));
                silhouette.set(dx, dy, true);
            }
        }
    }
    Patch { bbox: *target, image, silhouette }
}

/// Renders on a background canvas in scene order; later objects occlude
/// earlier ones.
pub fn render_objects(palette: &Palette, canvas: Canvas, objects: &[ObjectSpec]) -> Image {
    let mut img = Image::filled(canvas, palette.background);
    for o in objects {
        draw_object(&mut img, palette, o.attributes(), &o.bbox);
    }
    img
}

pub fn render_scene(palette: &Palette, scene: &Scene) -> (Image, Layout) {
    let img = render_objects(palette, scene.canvas, &scene.objects);
    let regions = scene.objects.iter().map(|o| Region::new(o.caption(), o.bbox)).collect();
    let layout = Layout::new(scene.canvas, regions).expect("scene boxes lie within the canvas");
    (img, layout)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Skill;

    fn scene(objects: Vec<ObjectSpec>) -> Scene {
        Scene { canvas: Canvas::default(), objects, skill: Skill::Id, split: "clevr".into(), seed: 0 }
    }

    fn obj(color: Color, material: Material, shape: Shape, b: [u32; 4]) -> ObjectSpec {
        ObjectSpec::new(Attributes::new(color, material, shape), BBox::new(b[0], b[1], b[2], b[3]).unwrap())
    }

    #[test]
    fn palette_is_separable() {
        let p = Palette::default();
        for i in 0..8 {
            for j in i + 1..8 {
                assert!(linf(p.base[i], p.base[j]) >= 48, "{i} vs {j}");
            }
        }
        let tones = p.tones();
        for (i, (a, ta)) in tones.iter().enumerate() {
            for (b, tb) in &tones[i + 1..] {
                let same_label = matches!(
                    (ta, tb),
                    (Tone::Object { color: c1, material: m1, .. }, Tone::Object { color: c2, material: m2, .. })
                        if c1 == c2 && m1 == m2
                );
                if !same_label {
                    assert!(linf(*a, *b) > 2 * TONE_TOLERANCE, "{ta:?} vs {tb:?}");
                } else {
                    assert_ne!(a, b);
                }
            }
            assert_eq!(p.classify(*a), *ta);
        }
        assert_eq!(p.classify([255, 0, 255]), Tone::Unknown);
    }

    #[test]
    fn empty_scene_is_uniform_background() {
        let p = Palette::default();
        let (img, layout) = render_scene(&p, &scene(vec![]));
        assert_eq!(img.count_not(p.background), 0);
        assert!(layout.is_empty());
    }

    #[test]
    fn cube_fills_exactly_its_box() {
        let p = Palette::default();
        let s = scene(vec![obj(Color::Red, Material::Rubber, Shape::Cube, [100, 100, 200, 200])]);
        let (img, layout) = render_scene(&p, &s);
        let bb = BBox::new(100, 100, 200, 200).unwrap();
        for y in 0..512 {
            for x in 0..512 {
                assert_eq!(img.get(x, y) != p.background, bb.contains_pixel(x, y), "({x},{y})");
            }
        }
        assert_eq!(layout.regions()[0], Region::new("red rubber cube", bb));
    }

    #[test]
    fn disjoint_order_irrelevant() {
        let p = Palette::default();
        let a = obj(Color::Blue, Material::Metal, Shape::Sphere, [10, 10, 80, 90]);
        let b = obj(Color::Yellow, Material::Rubber, Shape::Cylinder, [200, 200, 300, 260]);
        let one = render_scene(&p, &scene(vec![a.clone(), b.clone()])).0;
        let two = render_scene(&p, &scene(vec![b, a])).0;
        assert_eq!(one, two);
    }

    #[test]
    fn later_objects_occlude() {
        let p = Palette::default();
        let a = obj(Color::Blue, Material::Rubber, Shape::Cube, [10, 10, 80, 80]);
        let b = obj(Color::Yellow, Material::Rubber, Shape::Cube, [50, 50, 120, 120]);
        let img = render_scene(&p, &scene(vec![a, b])).0;
        assert_eq!(img.get(60, 60), p.base[Color::Yellow.index()]);
    }

    #[test]
    fn patch_shapes() {
        let p = Palette::default();
        let cube = Attributes::new(Color::Gray, Material::Metal, Shape::Cube);
        let patch = render_object_patch(&p, cube, &BBox::new(0, 0, 64, 64).unwrap());
        assert_eq!(patch.image.count_not(p.background), 4096);
        assert_eq!(patch.silhouette.popcount(), 4096);

        let sphere = Attributes::new(Color::Cyan, Material::Metal, Shape::Sphere);
        let patch = render_object_patch(&p, sphere, &BBox::new(40, 40, 140, 140).unwrap());
        let drawn = patch.silhouette.bounding_box().unwrap();
        assert_eq!(drawn.width(), drawn.height());
        assert_eq!(drawn.width(), 100);
        // Symmetric under transposition.
        for y in 0..100 {
            for x in 0..100 {
                assert_eq!(patch.silhouette.get(x, y), patch.silhouette.get(y, x));
            }
        }
        let again = render_object_patch(&p, sphere, &BBox::new(40, 40, 140, 140).unwrap());
        assert_eq!(patch, again);
    }

    #[test]
    fn silhouette_fill_ratios_distinguish_shapes() {
        let bb = BBox::new(0, 0, 90, 90).unwrap();
        let count = |s: Shape| {
            (0..90).flat_map(|y| (0..90).map(move |x| (x, y))).filter(|&(x, y)| silhouette_contains(s, &bb, x, y)).count()
        };
        let (cube, cyl, sph) = (count(Shape::Cube), count(Shape::Cylinder), count(Shape::Sphere));
        assert_eq!(cube, 8100);
        assert!(sph < cyl && cyl < cube);
        assert!((sph as f64 / 8100.0 - std::f64::consts::FRAC_PI_4).abs() < 0.01);
    }

    #[test]
    fn patch_matches_scene_render() {
        let p = Palette::default();
        let o = obj(Color::Purple, Material::Metal, Shape::Cylinder, [33, 70, 150, 120]);
        let scene_img = render_scene(&p, &scene(vec![o.clone()])).0;
        let mut img = Image::filled(Canvas::default(), p.background);
        render_object_patch(&p, o.attributes(), &o.bbox).paste_into(&mut img);
        assert_eq!(img, scene_img);
    }
}
