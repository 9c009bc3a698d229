use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::geometry::{BBox, Canvas};
use super::object::ObjectSpec;
use super::ModelError;

/// A caption paired with the box it describes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Region {
    pub caption: String,
    #[serde(rename = "box")]
    pub bbox: BBox,
}

impl Region {
    pub fn new(caption: impl Into<String>, bbox: BBox) -> Self {
        Self { caption: caption.into(), bbox }
    }
}

/// Ordered regions on a fixed canvas. Every box lies inside the canvas.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawLayout")]
pub struct Layout {
    canvas: Canvas,
    regions: Vec<Region>,
}

#[derive(Deserialize)]
struct RawLayout {
    canvas: Canvas,
    #[serde(default)]
    regions: Vec<Region>,
}

impl TryFrom<RawLayout> for Layout {
    type Error = ModelError;

    fn try_from(raw: RawLayout) -> Result<Self, Self::Error> {
        Layout::new(raw.canvas, raw.regions)
    }
}

impl Layout {
    pub fn new(canvas: Canvas, regions: Vec<Region>) -> Result<Self, ModelError> {
        for r in &regions {
            r.bbox.check_within(canvas)?;
        }
        Ok(Self { canvas, regions })
    }

    pub fn empty(canvas: Canvas) -> Self {
        Self { canvas, regions: Vec::new() }
    }

    pub fn canvas(&self) -> Canvas {
        self.canvas
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn boxes(&self) -> Vec<BBox> {
        self.regions.iter().map(|r| r.bbox).collect()
    }
}

/// Benchmark skill a scene was sampled for; `Id` is the CLEVR-like training
/// distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Skill {
    Number,
    Position,
    Size,
    Shape,
    Id,
}

impl Skill {
    pub const ALL: [Skill; 5] = [Skill::Number, Skill::Position, Skill::Size, Skill::Shape, Skill::Id];

    pub fn name(self) -> &'static str {
        match self {
            Skill::Number => "number",
            Skill::Position => "position",
            Skill::Size => "size",
            Skill::Shape => "shape",
            Skill::Id => "id",
        }
    }
}

impl fmt::Display for Skill {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Skill {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Skill::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ModelError::UnknownAttribute(s.to_string()))
    }
}

/// Objects and their placement, tagged with how they were sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub canvas: Canvas,
    pub objects: Vec<ObjectSpec>,
    pub skill: Skill,
    pub split: String,
    pub seed: u64,
}

impl Scene {
    pub fn validate(&self) -> Result<(), ModelError> {
        for o in &self.objects {
            o.bbox.check_within(self.canvas)?;
        }
        Ok(())
    }

    /// `{skill}_{split}_{seed}`, used for file names and image ids.
    pub fn id(&self) -> String {
        format!("{}_{}_{}", self.skill, self.split, self.seed)
    }

    pub fn layout(&self) -> Layout {
        Layout {
            canvas: self.canvas,
            regions: self.objects.iter().map(|o| Region::new(o.caption(), o.bbox)).collect(),
        }
    }

    pub fn with_objects(&self, objects: Vec<ObjectSpec>) -> Scene {
        Scene { objects, ..self.clone() }
    }
}
