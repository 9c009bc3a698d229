use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{covered_area, iou, Attributes, BBox, Canvas, ObjectSpec, Scene, Skill, NUM_CLASSES};

use super::SamplerError;

/// The eight out-of-distribution tasks, in reporting order.
pub const OOD_SPLITS: [(Skill, &str); 8] = [
    (Skill::Number, "few"),
    (Skill::Number, "many"),
    (Skill::Position, "center"),
    (Skill::Position, "boundary"),
    (Skill::Size, "tiny"),
    (Skill::Size, "large"),
    (Skill::Shape, "horizontal"),
    (Skill::Shape, "vertical"),
];

/// Split tag of the in-distribution configuration.
pub const ID_SPLIT: &str = "clevr";

/// Pixels per simulator unit on a 512 px canvas.
pub const PX_PER_UNIT_512: f64 = 16.0;

/// Width:height ratio of a sampled box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Aspect {
    pub w: u32,
    pub h: u32,
}

impl Aspect {
    pub const SQUARE: Aspect = Aspect { w: 1, h: 1 };

    pub const fn new(w: u32, h: u32) -> Self {
        Self { w, h }
    }

    /// Box dimensions with the shorter side equal to `short`.
    pub fn dims(&self, short: u32) -> (u32, u32) {
        if self.w >= self.h {
            (short * self.w / self.h, short)
        } else {
            (short, short * self.h / self.w)
        }
    }
}

impl fmt::Display for Aspect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.w, self.h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    Uniform,
    /// Box centers inside the central square covering a quarter of the canvas.
    Center,
    /// Boxes straddle a canvas edge and are clipped to it.
    Boundary,
}

/// Numeric definition of one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub skill: Skill,
    pub split: String,
    /// Inclusive object-count range.
    pub count_range: (usize, usize),
    pub size_set: Vec<f64>,
    pub aspect_set: Vec<Aspect>,
    pub placement: Placement,
    /// Maximum pairwise IoU; `None` leaves overlap uncapped.
    pub overlap_cap: Option<f64>,
    /// Maximum fraction of any box covered by the union of the other boxes.
    pub max_occlusion: f64,
}

const ID_SCALES: [f64; 2] = [3.5, 7.0];
const OVERLAP_CAP: f64 = 0.3;
const MAX_OCCLUSION: f64 = 0.4;
const MAX_OCCLUSION_CENTER: f64 = 0.45;

impl SplitSpec {
    /// The CLEVR-like training configuration.
    pub fn in_distribution() -> Self {
        SplitSpec {
            skill: Skill::Id,
            split: ID_SPLIT.to_string(),
            count_range: (3, 10),
            size_set: ID_SCALES.to_vec(),
            aspect_set: vec![Aspect::SQUARE],
            placement: Placement::Uniform,
            overlap_cap: Some(OVERLAP_CAP),
            max_occlusion: MAX_OCCLUSION,
        }
    }

    pub fn lookup(skill: Skill, split: &str) -> Result<Self, SamplerError> {
        let base = Self { skill, split: split.to_string(), ..Self::in_distribution() };
        let spec = match (skill, split) {
            (Skill::Id, ID_SPLIT) => Self::in_distribution(),
            (Skill::Number, "few") => Self { count_range: (0, 2), ..base },
            (Skill::Number, "many") => Self { count_range: (11, 16), ..base },
            (Skill::Position, "center") => Self {
                placement: Placement::Center,
                overlap_cap: None,
                max_occlusion: MAX_OCCLUSION_CENTER,
                ..base
            },
            (Skill::Position, "boundary") => Self { placement: Placement::Boundary, ..base },
            (Skill::Size, "tiny") => Self { count_range: (3, 5), size_set: vec![2.0], ..base },
            (Skill::Size, "large") => {
                Self { count_range: (3, 5), size_set: vec![9.0, 11.0, 13.0, 15.0], ..base }
            }
            (Skill::Shape, "horizontal") => Self {
                count_range: (3, 5),
                aspect_set: vec![Aspect::new(2, 1), Aspect::new(3, 1)],
                ..base
            },
            (Skill::Shape, "vertical") => Self {
                count_range: (3, 5),
                aspect_set: vec![Aspect::new(1, 2), Aspect::new(1, 3)],
                ..base
            },
            _ => return Err(SamplerError::UnknownSplit { skill, split: split.to_string() }),
        };
        Ok(spec)
    }

    /// Checks a scene against this split's ranges.
    pub fn check(&self, scene: &Scene, config: &SamplerConfig) -> Result<(), String> {
        let n = scene.objects.len();
        if n < self.count_range.0 || n > self.count_range.1 {
            return Err(format!("object count {n} outside {:?}", self.count_range));
        }
        for (i, o) in scene.objects.iter().enumerate() {
            let scale = o.scale.ok_or_else(|| format!("object {i} has no scale"))?;
            if !self.size_set.contains(&scale) {
                return Err(format!("object {i} scale {scale} not in {:?}", self.size_set));
            }
            let short = config.side_px(scale);
            let b = o.bbox;
            match self.placement {
                Placement::Boundary => {
                    if !b.touches_canvas_edge(scene.canvas) {
                        return Err(format!("object {i} box {b} does not touch an edge"));
                    }
                    let fits = self.aspect_set.iter().any(|a| {
                        let (w, h) = a.dims(short);
                        b.width() <= w && b.height() <= h && 2 * b.width() >= w && 2 * b.height() >= h
                    });
                    if !fits {
                        return Err(format!("object {i} box {b} is not a clipped {short}px box"));
                    }
                }
                Placement::Uniform | Placement::Center => {
                    if !self.aspect_set.iter().any(|a| a.dims(short) == (b.width(), b.height())) {
                        return Err(format!("object {i} box {b} does not match scale {scale}"));
                    }
                    if self.placement == Placement::Center {
                        let (lo, hi) = config.center_range();
                        let cx = (b.x1() + b.x2()) / 2;
                        let cy = (b.y1() + b.y2()) / 2;
                        if cx < lo.0 || cx >= hi.0 || cy < lo.1 || cy >= hi.1 {
                            return Err(format!("object {i} center ({cx},{cy}) outside center region"));
                        }
                    }
                }
            }
        }
        for (i, a) in scene.objects.iter().enumerate() {
            for b in &scene.objects[i + 1..] {
                if let Some(cap) = self.overlap_cap {
                    let v: f64 = iou(&a.bbox, &b.bbox);
                    if v > cap {
                        return Err(format!("pairwise IoU {v:.3} above cap {cap}"));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub canvas: Canvas,
    /// Rejection-sampling attempts per object.
    pub max_retries: usize,
    /// Whole-scene restarts before giving up.
    pub max_restarts: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { canvas: Canvas::default(), max_retries: 1000, max_restarts: 100 }
    }
}

impl SamplerConfig {
    /// Short box side in pixels for a simulator scale.
    pub fn side_px(&self, scale: f64) -> u32 {
        let ppu = PX_PER_UNIT_512 * f64::from(self.canvas.w.min(self.canvas.h)) / 512.0;
        (scale * ppu).round().max(1.0) as u32
    }

    /// Half-open range of allowed box centers for center placement.
    pub fn center_range(&self) -> ((u32, u32), (u32, u32)) {
        let c = self.canvas;
        ((c.w / 4, c.h / 4), (c.w - c.w / 4, c.h - c.h / 4))
    }
}

fn split_rng(skill: Skill, split: &str, seed: u64) -> ChaCha8Rng {
    // FNV-1a over the split name keeps streams of different splits apart.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in skill.name().bytes().chain(*b"/").chain(split.bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

struct Candidate {
    attrs: Attributes,
    scale: f64,
    aspect: Aspect,
}

fn propose_box(spec: &SplitSpec, config: &SamplerConfig, c: &Candidate, rng: &mut ChaCha8Rng) -> Option<BBox> {
    let canvas = config.canvas;
    let (w, h) = c.aspect.dims(config.side_px(c.scale));
    if w > canvas.w || h > canvas.h {
        return None;
    }
    match spec.placement {
        Placement::Uniform => {
            let x1 = rng.random_range(0..=canvas.w - w);
            let y1 = rng.random_range(0..=canvas.h - h);
            BBox::new(x1, y1, x1 + w, y1 + h).ok()
        }
        Placement::Center => {
            let (lo, hi) = config.center_range();
            let cx = rng.random_range(lo.0..hi.0);
            let cy = rng.random_range(lo.1..hi.1);
            // Clamping may move the center only when the box nearly fills the canvas.
            let x1 = cx.saturating_sub(w / 2).min(canvas.w - w);
            let y1 = cy.saturating_sub(h / 2).min(canvas.h - h);
            BBox::new(x1, y1, x1 + w, y1 + h).ok()
        }
        Placement::Boundary => {
            let (w, h) = (i64::from(w), i64::from(h));
            let (cw, ch) = (i64::from(canvas.w), i64::from(canvas.h));
            let edge = rng.random_range(0..4u8);
            let (x1, y1) = match edge {
                0 | 1 => {
                    let x1 = rng.random_range(0..=cw - w);
                    let o = rng.random_range(0..=h / 2);
                    (x1, if edge == 0 { -o } else { ch - h + o })
                }
                _ => {
                    let y1 = rng.random_range(0..=ch - h);
                    let o = rng.random_range(0..=w / 2);
                    (if edge == 2 { -o } else { cw - w + o }, y1)
                }
            };
            BBox::clipped(x1, y1, x1 + w, y1 + h, canvas)
        }
    }
}

fn same_label(a: &Attributes, b: &Attributes) -> bool {
    a.color == b.color && a.material == b.material
}

/// Placement constraints shared by every split.
///
/// Objects sharing color and material never touch, and no box may be covered
/// beyond `max_occlusion` by the union of the others, in any drawing order.
fn admissible(spec: &SplitSpec, placed: &[ObjectSpec], attrs: &Attributes, cand: &BBox) -> bool {
    for p in placed {
        if let Some(cap) = spec.overlap_cap {
            if iou::<f64>(cand, &p.bbox) > cap {
                return false;
            }
        }
        if same_label(attrs, &p.attributes()) && cand.touches(&p.bbox) {
            return false;
        }
    }
    let limit = |b: &BBox, covered: u64| covered as f64 <= spec.max_occlusion * b.area() as f64;
    let near: Vec<BBox> = placed.iter().map(|p| p.bbox).filter(|b| b.intersection(cand).is_some()).collect();
    if !limit(cand, covered_area(cand, &near)) {
        return false;
    }
    for p in &near {
        let mut others: Vec<BBox> =
            placed.iter().map(|o| o.bbox).filter(|o| o != p && o.intersection(p).is_some()).collect();
        others.push(*cand);
        if !limit(p, covered_area(p, &others)) {
            return false;
        }
    }
    true
}

fn try_scene(
    spec: &SplitSpec,
    config: &SamplerConfig,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<ObjectSpec>> {
    let n = rng.random_range(spec.count_range.0..=spec.count_range.1);
    let mut placed: Vec<ObjectSpec> = Vec::with_capacity(n);
    for _ in 0..n {
        let cand = Candidate {
            attrs: Attributes::from_class_id(rng.random_range(0..NUM_CLASSES as u32)).unwrap(),
            scale: spec.size_set[rng.random_range(0..spec.size_set.len())],
            aspect: spec.aspect_set[rng.random_range(0..spec.aspect_set.len())],
        };
        let mut chosen = None;
        for _ in 0..config.max_retries {
            let Some(b) = propose_box(spec, config, &cand, rng) else { continue };
            if admissible(spec, &placed, &cand.attrs, &b) {
                chosen = Some(b);
                break;
            }
        }
        let mut obj = ObjectSpec::new(cand.attrs, chosen?);
        obj.scale = Some(cand.scale);
        placed.push(obj);
    }
    Some(placed)
}

/// Samples a scene for an arbitrary split definition.
pub fn sample_with(spec: &SplitSpec, config: &SamplerConfig, seed: u64) -> Result<Scene, SamplerError> {
    if spec.count_range.0 > spec.count_range.1 || spec.size_set.is_empty() || spec.aspect_set.is_empty() {
        return Err(SamplerError::InvalidSpec(spec.split.clone()));
    }
    let mut rng = split_rng(spec.skill, &spec.split, seed);
    for _ in 0..=config.max_restarts {
        if let Some(objects) = try_scene(spec, config, &mut rng) {
            return Ok(Scene {
                canvas: config.canvas,
                objects,
                skill: spec.skill,
                split: spec.split.clone(),
                seed,
            });
        }
    }
    Err(SamplerError::Placement {
        skill: spec.skill,
        split: spec.split.clone(),
        seed,
        retries: config.max_retries,
    })
}

/// Samples one of the eight OOD tasks or the in-distribution configuration.
pub fn sample_scene(skill: Skill, split: &str, seed: u64) -> Result<Scene, SamplerError> {
    sample_with(&SplitSpec::lookup(skill, split)?, &SamplerConfig::default(), seed)
}

/// A fine-grained bucket: one pinned value of the skill's controlled factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FineBucket {
    Count(usize),
    Position(Placement),
    Scale(f64),
    /// Named by height:width, e.g. `H2W1`.
    Ratio { h: u32, w: u32 },
}

pub const FINE_SCALES: [f64; 7] = [2.0, 3.5, 7.0, 9.0, 11.0, 13.0, 15.0];
pub const FINE_RATIOS: [&str; 5] = ["H1W3", "H1W2", "H1W1", "H2W1", "H3W1"];
pub const MAX_FINE_COUNT: usize = 16;

impl FineBucket {
    pub fn parse(skill: Skill, bucket: &str) -> Result<Self, SamplerError> {
        let err = || SamplerError::Bucket { skill, bucket: bucket.to_string() };
        match skill {
            Skill::Number => match bucket.parse::<usize>() {
                Ok(k) if k <= MAX_FINE_COUNT => Ok(FineBucket::Count(k)),
                _ => Err(err()),
            },
            Skill::Position => match bucket {
                "uniform" => Ok(FineBucket::Position(Placement::Uniform)),
                "center" => Ok(FineBucket::Position(Placement::Center)),
                "boundary" => Ok(FineBucket::Position(Placement::Boundary)),
                _ => Err(err()),
            },
            Skill::Size => match bucket.parse::<f64>() {
                Ok(s) if FINE_SCALES.contains(&s) => Ok(FineBucket::Scale(s)),
                _ => Err(err()),
            },
            Skill::Shape => {
                if !FINE_RATIOS.contains(&bucket) {
                    return Err(err());
                }
                let b = bucket.as_bytes();
                Ok(FineBucket::Ratio { h: u32::from(b[1] - b'0'), w: u32::from(b[3] - b'0') })
            }
            Skill::Id => Err(err()),
        }
    }

    /// True for buckets matching the CLEVR training configuration.
    pub fn is_in_distribution(&self) -> bool {
        match *self {
            FineBucket::Count(k) => (3..=10).contains(&k),
            FineBucket::Position(p) => p == Placement::Uniform,
            FineBucket::Scale(s) => ID_SCALES.contains(&s),
            FineBucket::Ratio { h, w } => h == w,
        }
    }

    pub fn split_spec(&self, skill: Skill, tag: &str) -> SplitSpec {
        let id = SplitSpec { skill, split: tag.to_string(), ..SplitSpec::in_distribution() };
        match *self {
            FineBucket::Count(k) => SplitSpec { count_range: (k, k), ..id },
            FineBucket::Position(Placement::Center) => SplitSpec {
                placement: Placement::Center,
                overlap_cap: None,
                max_occlusion: MAX_OCCLUSION_CENTER,
                ..id
            },
            FineBucket::Position(p) => SplitSpec { placement: p, ..id },
            FineBucket::Scale(s) => SplitSpec { count_range: (3, 5), size_set: vec![s], ..id },
            FineBucket::Ratio { h, w } => {
                SplitSpec { count_range: (3, 5), aspect_set: vec![Aspect::new(w, h)], ..id }
            }
        }
    }
}

/// Samples a scene pinned to a single fine-grained bucket.
pub fn sample_fine(skill: Skill, bucket: &str, seed: u64) -> Result<Scene, SamplerError> {
    let spec = FineBucket::parse(skill, bucket)?.split_spec(skill, bucket);
    sample_with(&spec, &SamplerConfig::default(), seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SamplerConfig {
        SamplerConfig::default()
    }

    #[test]
    fn scale_mapping() {
        let c = cfg();
        let px: Vec<u32> = FINE_SCALES.iter().map(|s| c.side_px(*s)).collect();
        assert_eq!(px, vec![32, 56, 112, 144, 176, 208, 240]);
        assert_eq!(Aspect::new(3, 1).dims(56), (168, 56));
        assert_eq!(Aspect::new(1, 2).dims(56), (56, 112));
    }

    #[test]
    fn split_definitions() {
        let few = SplitSpec::lookup(Skill::Number, "few").unwrap();
        assert_eq!(few.count_range, (0, 2));
        assert_eq!(SplitSpec::lookup(Skill::Number, "many").unwrap().count_range, (11, 16));
        let tiny = SplitSpec::lookup(Skill::Size, "tiny").unwrap();
        assert_eq!((tiny.count_range, tiny.size_set.clone()), ((3, 5), vec![2.0]));
        let large = SplitSpec::lookup(Skill::Size, "large").unwrap();
        assert_eq!(large.size_set, vec![9.0, 11.0, 13.0, 15.0]);
        assert_eq!(SplitSpec::lookup(Skill::Position, "center").unwrap().overlap_cap, None);
        assert!(matches!(
            SplitSpec::lookup(Skill::Size, "medium"),
            Err(SamplerError::UnknownSplit { .. })
        ));
    }

    #[test]
    fn deterministic() {
        for (skill, split) in OOD_SPLITS {
            let a = sample_scene(skill, split, 42).unwrap();
            let b = sample_scene(skill, split, 42).unwrap();
            assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        }
        assert_ne!(sample_scene(Skill::Number, "many", 1).unwrap(), sample_scene(Skill::Number, "many", 2).unwrap());
    }

    #[test]
    fn conformance_small_sample() {
        for (skill, split) in OOD_SPLITS.into_iter().chain([(Skill::Id, ID_SPLIT)]) {
            let spec = SplitSpec::lookup(skill, split).unwrap();
            for seed in 0..50 {
                let s = sample_scene(skill, split, seed).unwrap();
                spec.check(&s, &cfg()).unwrap_or_else(|e| panic!("{skill}/{split}/{seed}: {e}"));
            }
        }
    }

    #[test]
    fn same_label_objects_never_touch() {
        for seed in 0..100 {
            let s = sample_scene(Skill::Number, "many", seed).unwrap();
            for (i, a) in s.objects.iter().enumerate() {
                for b in &s.objects[i + 1..] {
                    if same_label(&a.attributes(), &b.attributes()) {
                        assert!(!a.bbox.touches(&b.bbox));
                    }
                }
            }
        }
    }

    #[test]
    fn fine_buckets() {
        let s = sample_fine(Skill::Size, "7", 3).unwrap();
        assert!(s.objects.iter().all(|o| o.scale == Some(7.0) && o.bbox.width() == 112));
        let s = sample_fine(Skill::Shape, "H2W1", 3).unwrap();
        assert!(s.objects.iter().all(|o| o.bbox.height() == 2 * o.bbox.width()));
        let s = sample_fine(Skill::Shape, "H1W3", 3).unwrap();
        assert!(s.objects.iter().all(|o| o.bbox.width() == 3 * o.bbox.height()));
        assert_eq!(sample_fine(Skill::Number, "1", 9).unwrap().objects.len(), 1);
        assert_eq!(sample_fine(Skill::Number, "0", 9).unwrap().objects.len(), 0);
        for bad in [(Skill::Number, "17"), (Skill::Size, "4"), (Skill::Shape, "H4W1"), (Skill::Position, "top")] {
            assert!(matches!(sample_fine(bad.0, bad.1, 0), Err(SamplerError::Bucket { .. })));
        }
        assert!(FineBucket::parse(Skill::Shape, "H1W1").unwrap().is_in_distribution());
        assert!(!FineBucket::parse(Skill::Size, "2").unwrap().is_in_distribution());
        assert!(FineBucket::parse(Skill::Number, "10").unwrap().is_in_distribution());
    }

    #[test]
    fn over_constrained_split_reports_placement_error() {
        let spec = SplitSpec {
            count_range: (6, 6),
            size_set: vec![15.0],
            ..SplitSpec::in_distribution()
        };
        let config = SamplerConfig { max_retries: 50, max_restarts: 2, ..cfg() };
        assert!(matches!(sample_with(&spec, &config, 0), Err(SamplerError::Placement { .. })));
    }
}
