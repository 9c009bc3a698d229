//! Fixed layout pools with COCO object captions.
//!
//! Boxes are defined first without objects; each pool layout is then paired
//! with every vocabulary entry (or every relation pair for the combination
//! skill), so enumeration is exhaustive and needs no randomness.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{BBox, Canvas, Layout, Region};

use super::SamplerError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CocoSkill {
    Number,
    Position,
    Size,
    Combination,
}

impl CocoSkill {
    pub const ALL: [CocoSkill; 4] =
        [CocoSkill::Number, CocoSkill::Position, CocoSkill::Size, CocoSkill::Combination];

    pub fn name(self) -> &'static str {
        match self {
            CocoSkill::Number => "number",
            CocoSkill::Position => "position",
            CocoSkill::Size => "size",
            CocoSkill::Combination => "combination",
        }
    }

    pub fn splits(self) -> &'static [&'static str] {
        match self {
            CocoSkill::Number => &["few", "medium", "many"],
            CocoSkill::Position => &["center", "boundary"],
            CocoSkill::Size => &["tiny", "large"],
            CocoSkill::Combination => &["common", "uncommon"],
        }
    }
}

impl fmt::Display for CocoSkill {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CocoSkill {
    type Err = SamplerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CocoSkill::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| SamplerError::UnknownCocoSkill(s.to_string()))
    }
}

/// A COCO category with its plural spelling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub name: String,
    pub plural: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "holding")]
    Holding,
    #[serde(rename = "next to")]
    NextTo,
    #[serde(rename = "sitting on")]
    SittingOn,
}

impl Relation {
    pub const ALL: [Relation; 3] = [Relation::Holding, Relation::NextTo, Relation::SittingOn];

    pub fn phrase(self) -> &'static str {
        match self {
            Relation::Holding => "holding",
            Relation::NextTo => "next to",
            Relation::SittingOn => "sitting on",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectPair {
    pub subject: String,
    pub relation: Relation,
    pub object: String,
    pub common: bool,
}

/// Vocabulary, relation pairs and caption templates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoLayoutSpec {
    pub canvas: Canvas,
    pub vocabulary: Vec<Category>,
    pub pairs: Vec<ObjectPair>,
    /// `{n}` and `{objects}` are substituted.
    pub count_template: String,
    /// `{a}`, `{relation}` and `{b}` are substituted.
    pub pair_template: String,
}

const DEFAULT_VOCABULARY: [(&str, &str); 40] = [
    ("person", "people"),
    ("bicycle", "bicycles"),
    ("car", "cars"),
    ("motorcycle", "motorcycles"),
    ("airplane", "airplanes"),
    ("bus", "buses"),
    ("train", "trains"),
    ("truck", "trucks"),
    ("boat", "boats"),
    ("traffic light", "traffic lights"),
    ("fire hydrant", "fire hydrants"),
    ("stop sign", "stop signs"),
    ("bench", "benches"),
    ("bird", "birds"),
    ("cat", "cats"),
    ("dog", "dogs"),
    ("horse", "horses"),
    ("sheep", "sheep"),
    ("cow", "cows"),
    ("elephant", "elephants"),
    ("bear", "bears"),
    ("zebra", "zebras"),
    ("giraffe", "giraffes"),
    ("backpack", "backpacks"),
    ("umbrella", "umbrellas"),
    ("suitcase", "suitcases"),
    ("bottle", "bottles"),
    ("cup", "cups"),
    ("bowl", "bowls"),
    ("banana", "bananas"),
    ("apple", "apples"),
    ("orange", "oranges"),
    ("broccoli", "broccolis"),
    ("pizza", "pizzas"),
    ("donut", "donuts"),
    ("chair", "chairs"),
    ("couch", "couches"),
    ("potted plant", "potted plants"),
    ("clock", "clocks"),
    ("vase", "vases"),
];

// Illustrative pairs; 20 common and 20 uncommon per relation.
const HOLDING: [(&str, &str, bool); 40] = [
    ("person", "tennis racket", true),
    ("person", "umbrella", true),
    ("person", "cell phone", true),
    ("person", "frisbee", true),
    ("person", "kite", true),
    ("person", "baseball bat", true),
    ("person", "cup", true),
    ("person", "book", true),
    ("person", "skateboard", true),
    ("person", "surfboard", true),
    ("person", "bottle", true),
    ("person", "handbag", true),
    ("person", "remote", true),
    ("person", "knife", true),
    ("person", "toothbrush", true),
    ("person", "banana", true),
    ("person", "donut", true),
    ("person", "wine glass", true),
    ("person", "scissors", true),
    ("person", "teddy bear", true),
    ("dog", "laptop", false),
    ("cat", "tennis racket", false),
    ("bear", "cell phone", false),
    ("elephant", "umbrella", false),
    ("giraffe", "book", false),
    ("zebra", "frisbee", false),
    ("horse", "wine glass", false),
    ("cow", "baseball bat", false),
    ("sheep", "scissors", false),
    ("bird", "skateboard", false),
    ("teddy bear", "knife", false),
    ("cat", "hair drier", false),
    ("dog", "toothbrush", false),
    ("bear", "remote", false),
    ("elephant", "cup", false),
    ("giraffe", "kite", false),
    ("zebra", "handbag", false),
    ("horse", "surfboard", false),
    ("cow", "bottle", false),
    ("sheep", "pizza", false),
];

const NEXT_TO: [(&str, &str, bool); 40] = [
    ("car", "bus", true),
    ("person", "bicycle", true),
    ("chair", "dining table", true),
    ("couch", "tv", true),
    ("laptop", "keyboard", true),
    ("cup", "bowl", true),
    ("fork", "knife", true),
    ("bed", "clock", true),
    ("sink", "toilet", true),
    ("oven", "refrigerator", true),
    ("truck", "car", true),
    ("traffic light", "stop sign", true),
    ("bench", "fire hydrant", true),
    ("cow", "sheep", true),
    ("zebra", "giraffe", true),
    ("potted plant", "vase", true),
    ("mouse", "keyboard", true),
    ("apple", "orange", true),
    ("person", "dog", true),
    ("boat", "bird", true),
    ("parking meter", "clock", false),
    ("elephant", "toaster", false),
    ("giraffe", "microwave", false),
    ("airplane", "teddy bear", false),
    ("train", "toothbrush", false),
    ("bus", "wine glass", false),
    ("zebra", "laptop", false),
    ("bear", "sink", false),
    ("boat", "refrigerator", false),
    ("horse", "hair drier", false),
    ("fire hydrant", "bed", false),
    ("stop sign", "couch", false),
    ("cow", "oven", false),
    ("sheep", "tv", false),
    ("truck", "toilet", false),
    ("motorcycle", "vase", false),
    ("bird", "dining table", false),
    ("airplane", "bench", false),
    ("skis", "pizza", false),
    ("kite", "scissors", false),
];

const SITTING_ON: [(&str, &str, bool); 40] = [
    ("person", "chair", true),
    ("person", "bench", true),
    ("person", "couch", true),
    ("person", "bed", true),
    ("person", "motorcycle", true),
    ("person", "horse", true),
    ("person", "bicycle", true),
    ("person", "toilet", true),
    ("cat", "couch", true),
    ("cat", "bed", true),
    ("dog", "couch", true),
    ("dog", "bench", true),
    ("bird", "bench", true),
    ("bird", "boat", true),
    ("teddy bear", "chair", true),
    ("cat", "chair", true),
    ("person", "elephant", true),
    ("cat", "suitcase", true),
    ("bird", "potted plant", true),
    ("dog", "bed", true),
    ("elephant", "banana", false),
    ("horse", "cup", false),
    ("giraffe", "bicycle", false),
    ("bear", "toaster", false),
    ("cow", "skateboard", false),
    ("zebra", "laptop", false),
    ("sheep", "clock", false),
    ("elephant", "chair", false),
    ("bus", "bench", false),
    ("car", "couch", false),
    ("truck", "bed", false),
    ("airplane", "donut", false),
    ("train", "pizza", false),
    ("giraffe", "toilet", false),
    ("horse", "book", false),
    ("bear", "vase", false),
    ("cow", "frisbee", false),
    ("elephant", "surfboard", false),
    ("refrigerator", "cat", false),
    ("boat", "apple", false),
];

impl Default for CocoLayoutSpec {
    fn default() -> Self {
        let vocabulary = DEFAULT_VOCABULARY
            .iter()
            .map(|(n, p)| Category { name: (*n).into(), plural: (*p).into() })
            .collect();
        let pairs = Relation::ALL
            .into_iter()
            .zip([&HOLDING, &NEXT_TO, &SITTING_ON])
            .flat_map(|(relation, list)| {
                list.iter().map(move |(a, b, common)| ObjectPair {
                    subject: (*a).into(),
                    relation,
                    object: (*b).into(),
                    common: *common,
                })
            })
            .collect();
        CocoLayoutSpec {
            canvas: Canvas::default(),
            vocabulary,
            pairs,
            count_template: "a photo of {n} {objects}".into(),
            pair_template: "{a} is {relation} {b}".into(),
        }
    }
}

/// One enumerated layout with its caption.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CocoLayout {
    pub skill: CocoSkill,
    pub split: String,
    pub index: usize,
    pub caption: String,
    pub layout: Layout,
}

type Template = Vec<[u32; 4]>;

fn grid(n: usize, cell_fill: f64, region: [u32; 4]) -> Template {
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    let (rw, rh) = (region[2] - region[0], region[3] - region[1]);
    let (cw, ch) = (rw / cols as u32, rh / rows as u32);
    let (bw, bh) = ((f64::from(cw) * cell_fill) as u32, (f64::from(ch) * cell_fill) as u32);
    (0..n)
        .map(|i| {
            let (r, c) = ((i / cols) as u32, (i % cols) as u32);
            let x1 = region[0] + c * cw + (cw - bw) / 2;
            let y1 = region[1] + r * ch + (ch - bh) / 2;
            [x1, y1, x1 + bw, y1 + bh]
        })
        .collect()
}

fn rows_layout(n: usize, side: u32) -> Template {
    // Two staggered rows across the canvas.
    let top = n.div_ceil(2);
    let mut out = Vec::with_capacity(n);
    for (row, count, y) in [(0, top, 96u32), (1, n - top, 320u32)] {
        if count == 0 {
            continue;
        }
        let step = 512 / count as u32;
        for i in 0..count as u32 {
            let cx = step * i + step / 2 + if row == 1 { step / 4 } else { 0 };
            let x1 = cx.saturating_sub(side / 2).min(512 - side);
            out.push([x1, y, x1 + side, y + side]);
        }
    }
    out
}

fn number_templates() -> Vec<(usize, Template)> {
    let mut out = Vec::new();
    for n in 2..=10usize {
        out.push((n, grid(n, 0.7, [16, 16, 496, 496])));
        let side = if n <= 4 { 120 } else if n <= 7 { 80 } else { 60 };
        out.push((n, rows_layout(n, side)));
    }
    out
}

fn position_templates(center: bool) -> Vec<(usize, Template)> {
    if center {
        vec![
            (2, vec![[176, 200, 256, 300], [256, 212, 336, 312]]),
            (3, vec![[160, 160, 260, 260], [252, 180, 352, 280], [200, 250, 300, 350]]),
            (4, grid(4, 0.85, [160, 160, 352, 352])),
            (5, {
                let mut t = grid(4, 0.8, [144, 144, 368, 368]);
                t.push([216, 216, 296, 296]);
                t
            }),
        ]
    } else {
        vec![
            (2, vec![[0, 180, 96, 300], [416, 200, 512, 320]]),
            (3, vec![[180, 0, 320, 90], [0, 300, 100, 420], [400, 420, 512, 512]]),
            (4, vec![[0, 0, 110, 110], [402, 0, 512, 110], [0, 402, 110, 512], [402, 402, 512, 512]]),
            (5, vec![
                [200, 0, 300, 80],
                [0, 200, 80, 300],
                [432, 200, 512, 300],
                [120, 432, 220, 512],
                [300, 432, 400, 512],
            ]),
        ]
    }
}

fn size_templates(tiny: bool) -> Vec<(usize, Template)> {
    let side: u32 = if tiny { 32 } else { 240 };
    let mut out = Vec::new();
    for n in 1..=3usize {
        // Row, column and diagonal arrangements.
        for arrangement in 0..3u32 {
            let t = (0..n as u32)
                .map(|i| {
                    let span = 512 - side;
                    let step = if n == 1 { 0 } else { span / (n as u32 - 1) };
                    let (mut x, mut y) = if n == 1 { (span / 2, span / 2) } else { (i * step, i * step) };
                    match arrangement {
                        0 => y = span / 2,
                        1 => x = span / 2,
                        _ => {}
                    }
                    [x, y, x + side, y + side]
                })
                .collect();
            out.push((n, t));
        }
    }
    out
}

fn relation_templates(rel: Relation) -> Vec<Template> {
    match rel {
        Relation::Holding => vec![
            vec![[120, 60, 300, 480], [260, 200, 400, 340]],
            vec![[220, 40, 400, 500], [100, 180, 250, 330]],
            vec![[160, 100, 340, 500], [300, 120, 460, 260]],
        ],
        Relation::NextTo => vec![
            vec![[40, 140, 240, 380], [272, 140, 472, 380]],
            vec![[60, 200, 220, 360], [240, 120, 480, 420]],
            vec![[20, 60, 260, 300], [280, 220, 500, 460]],
        ],
        Relation::SittingOn => vec![
            vec![[160, 60, 352, 300], [130, 240, 382, 480]],
            vec![[200, 40, 330, 260], [120, 220, 410, 500]],
            vec![[80, 100, 260, 320], [40, 280, 320, 490]],
        ],
    }
}

fn build_layout(canvas: Canvas, template: &Template, captions: &[&str]) -> Layout {
    let sx = |v: u32| (u64::from(v) * u64::from(canvas.w) / 512) as u32;
    let sy = |v: u32| (u64::from(v) * u64::from(canvas.h) / 512) as u32;
    let regions = template
        .iter()
        .zip(captions.iter().cycle())
        .map(|(b, cap)| Region::new(*cap, BBox::new(sx(b[0]), sy(b[1]), sx(b[2]), sy(b[3])).unwrap()))
        .collect();
    Layout::new(canvas, regions).expect("templates lie inside the canvas")
}

impl CocoLayoutSpec {
    fn count_caption(&self, n: usize, cat: &Category) -> String {
        let noun = if n == 1 { &cat.name } else { &cat.plural };
        self.count_template.replace("{n}", &n.to_string()).replace("{objects}", noun)
    }

    fn pair_caption(&self, p: &ObjectPair) -> String {
        self.pair_template
            .replace("{a}", &p.subject)
            .replace("{relation}", p.relation.phrase())
            .replace("{b}", &p.object)
    }

    /// Every layout of a skill, in index order.
    pub fn enumerate(&self, skill: CocoSkill) -> Vec<CocoLayout> {
        let mut out = Vec::new();
        let mut push = |split: &str, caption: String, layout: Layout| {
            let index = out.len();
            out.push(CocoLayout { skill, split: split.to_string(), index, caption, layout });
        };
        let counted = |templates: Vec<(usize, Template)>, split_of: &dyn Fn(usize) -> &'static str, push: &mut dyn FnMut(&str, String, Layout)| {
            for (n, t) in templates {
                for cat in &self.vocabulary {
                    let layout = build_layout(self.canvas, &t, &[cat.name.as_str()]);
                    push(split_of(n), self.count_caption(n, cat), layout);
                }
            }
        };
        match skill {
            CocoSkill::Number => {
                let split_of = |n: usize| match n {
                    2..=4 => "few",
                    5..=7 => "medium",
                    _ => "many",
                };
                counted(number_templates(), &split_of, &mut push);
            }
            CocoSkill::Position => {
                counted(position_templates(true), &|_| "center", &mut push);
                counted(position_templates(false), &|_| "boundary", &mut push);
            }
            CocoSkill::Size => {
                counted(size_templates(true), &|_| "tiny", &mut push);
                counted(size_templates(false), &|_| "large", &mut push);
            }
            CocoSkill::Combination => {
                for common in [true, false] {
                    let split = if common { "common" } else { "uncommon" };
                    for rel in Relation::ALL {
                        for t in relation_templates(rel) {
                            for p in self.pairs.iter().filter(|p| p.relation == rel && p.common == common) {
                                let layout = build_layout(self.canvas, &t, &[&p.subject, &p.object]);
                                push(split, self.pair_caption(p), layout);
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn cardinality(&self, skill: CocoSkill) -> usize {
        self.enumerate(skill).len()
    }

    /// Layout `index` of the skill, optionally restricted to one split.
    pub fn sample(&self, skill: CocoSkill, split: Option<&str>, index: usize) -> Result<CocoLayout, SamplerError> {
        if let Some(s) = split {
            if !skill.splits().contains(&s) {
                return Err(SamplerError::UnknownCocoSplit { skill, split: s.to_string() });
            }
        }
        let pool: Vec<CocoLayout> =
            self.enumerate(skill).into_iter().filter(|l| split.is_none_or(|s| l.split == s)).collect();
        let len = pool.len();
        pool.into_iter().nth(index).ok_or(SamplerError::Index { index, len })
    }
}

/// Layout `index` of the default pool; returns the caption and layout.
pub fn sample_coco_layout(skill: CocoSkill, split: Option<&str>, index: usize) -> Result<(String, Layout), SamplerError> {
    let l = CocoLayoutSpec::default().sample(skill, split, index)?;
    Ok((l.caption, l.layout))
}
