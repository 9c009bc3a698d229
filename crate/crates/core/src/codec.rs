//! Box quantization and prompt text for the three conditioning styles.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Attributes, BBox, Canvas, Layout};

/// Number of quantization bins per axis.
pub const NUM_BINS: u32 = 1000;

pub const BACKGROUND_PROMPT: &str = "Add gray background";

#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("bin {0} outside [0, 999]")]
    InvalidBin(u32),
    #[error("bins {0:?} are not ordered")]
    UnorderedBins([u32; 4]),
    #[error("bins {0:?} dequantize to an empty box")]
    DegenerateBox([u32; 4]),
    #[error("caption {0:?} has no class id")]
    ClassMap(String),
    #[error("prompt {0:?} does not match \"Add <color> <material> <shape>\"")]
    PromptParse(String),
    #[error("malformed region text: {0}")]
    RegionParse(String),
}

/// Four bin indices `[x1, y1, x2, y2]`, each in `[0, 999]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "[u32; 4]", into = "[u32; 4]")]
pub struct QuantizedBox([u32; 4]);

impl QuantizedBox {
    pub fn new(bins: [u32; 4]) -> Result<Self, CodecError> {
        if let Some(b) = bins.iter().find(|b| **b >= NUM_BINS) {
            return Err(CodecError::InvalidBin(*b));
        }
        if bins[0] > bins[2] || bins[1] > bins[3] {
            return Err(CodecError::UnorderedBins(bins));
        }
        Ok(Self(bins))
    }

    pub fn bins(&self) -> [u32; 4] {
        self.0
    }
}

impl TryFrom<[u32; 4]> for QuantizedBox {
    type Error = CodecError;

    fn try_from(bins: [u32; 4]) -> Result<Self, Self::Error> {
        Self::new(bins)
    }
}

impl From<QuantizedBox> for [u32; 4] {
    fn from(q: QuantizedBox) -> Self {
        q.0
    }
}

impl fmt::Display for QuantizedBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.0;
        write!(f, "<{a:03}> <{b:03}> <{c:03}> <{d:03}>")
    }
}

fn quantize(coord: u32, dim: u32) -> u32 {
    let bin = u64::from(coord) * u64::from(NUM_BINS) / u64::from(dim);
    (bin as u32).min(NUM_BINS - 1)
}

/// Center of `bin` in pixels, rounded half up.
fn dequantize(bin: u32, dim: u32) -> u32 {
    let twice = (2 * u64::from(bin) + 1) * u64::from(dim);
    ((twice + u64::from(NUM_BINS)) / (2 * u64::from(NUM_BINS))) as u32
}

pub fn quantize_box(bbox: &BBox, canvas: Canvas) -> QuantizedBox {
    QuantizedBox([
        quantize(bbox.x1(), canvas.w),
        quantize(bbox.y1(), canvas.h),
        quantize(bbox.x2(), canvas.w),
        quantize(bbox.y2(), canvas.h),
    ])
}

pub fn dequantize_box(q: &QuantizedBox, canvas: Canvas) -> Result<BBox, CodecError> {
    let [a, b, c, d] = q.0;
    let (x1, y1) = (dequantize(a, canvas.w), dequantize(b, canvas.h));
    let (x2, y2) = (dequantize(c, canvas.w), dequantize(d, canvas.h));
    BBox::new(x1, y1, x2, y2).map_err(|_| CodecError::DegenerateBox(q.0))
}

/// Region-caption text: bin tokens then caption, per region.
pub fn serialize_reco(layout: &Layout) -> String {
    let regions: Vec<(QuantizedBox, &str)> = layout
        .regions()
        .iter()
        .map(|r| (quantize_box(&r.bbox, layout.canvas()), r.caption.as_str()))
        .collect();
    serialize_reco_bins(&regions)
}

pub fn serialize_reco_bins(regions: &[(QuantizedBox, &str)]) -> String {
    regions.iter().map(|(q, cap)| format!("{q} {cap}")).collect::<Vec<_>>().join(" ")
}

fn parse_bin(token: &str) -> Option<u32> {
    let digits = token.strip_prefix('<')?.strip_suffix('>')?;
    if digits.len() != 3 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Inverse of [`serialize_reco_bins`].
pub fn parse_reco(text: &str) -> Result<Vec<(QuantizedBox, String)>, CodecError> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let mut bins = [0u32; 4];
        for (k, slot) in bins.iter_mut().enumerate() {
            let tok = tokens.get(i + k).ok_or_else(|| CodecError::RegionParse("truncated box".into()))?;
            *slot = parse_bin(tok).ok_or_else(|| CodecError::RegionParse(format!("expected bin token, got {tok:?}")))?;
        }
        i += 4;
        let start = i;
        while i < tokens.len() && parse_bin(tokens[i]).is_none() {
            i += 1;
        }
        if i == start {
            return Err(CodecError::RegionParse("region without caption".into()));
        }
        out.push((QuantizedBox::new(bins)?, tokens[start..i].join(" ")));
    }
    Ok(out)
}

/// Caption to class-token id. Defaults to the attribute class id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMap(BTreeMap<String, u32>);

impl Default for ClassMap {
    fn default() -> Self {
        Self(Attributes::all().map(|a| (a.caption(), a.class_id())).collect())
    }
}

impl ClassMap {
    pub fn from_pairs<I: IntoIterator<Item = (String, u32)>>(pairs: I) -> Self {
        Self(pairs.into_iter().collect())
    }

    pub fn with(mut self, caption: impl Into<String>, id: u32) -> Self {
        self.0.insert(caption.into(), id);
        self
    }

    pub fn get(&self, caption: &str) -> Result<u32, CodecError> {
        self.0.get(caption).copied().ok_or_else(|| CodecError::ClassMap(caption.to_string()))
    }
}

/// Class-token text: bin tokens then `<clsKK>`, per region.
pub fn serialize_ldm(layout: &Layout, class_map: &ClassMap) -> Result<String, CodecError> {
    let parts = layout
        .regions()
        .iter()
        .map(|r| {
            let id = class_map.get(&r.caption)?;
            Ok(format!("{} <cls{id}>", quantize_box(&r.bbox, layout.canvas())))
        })
        .collect::<Result<Vec<_>, CodecError>>()?;
    Ok(parts.join(" "))
}

pub fn iterinpaint_prompt(caption: &str) -> String {
    format!("Add {caption}")
}

/// What an iterative step asks the backend to add.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AddPrompt {
    Object(Attributes),
    Background,
}

pub fn parse_add_prompt(prompt: &str) -> Result<AddPrompt, CodecError> {
    if prompt == BACKGROUND_PROMPT {
        return Ok(AddPrompt::Background);
    }
    let err = || CodecError::PromptParse(prompt.to_string());
    let caption = prompt.strip_prefix("Add ").ok_or_else(err)?;
    Attributes::parse_caption(caption).map(AddPrompt::Object).map_err(|_| err())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Region;

    #[test]
    fn quantize_examples() {
        let c = Canvas::default();
        assert_eq!(quantize(0, 512), 0);
        assert_eq!(quantize(512, 512), 999);
        assert_eq!(quantize(256, 512), 500);
        assert_eq!(dequantize(0, 512), 0);
        let q = quantize_box(&BBox::new(0, 0, 512, 512).unwrap(), c);
        assert_eq!(q.bins(), [0, 0, 999, 999]);
    }

    #[test]
    fn bins_identity_on_wide_canvas() {
        let c = Canvas::new(1001, 2048);
        for b in 0..NUM_BINS {
            assert_eq!(quantize(dequantize(b, c.w), c.w), b);
            assert_eq!(quantize(dequantize(b, c.h), c.h), b);
        }
    }

    #[test]
    fn reference_strings() {
        let q = QuantizedBox::new([20, 230, 492, 478]).unwrap();
        assert_eq!(serialize_reco_bins(&[(q, "cyan metal sphere")]), "<020> <230> <492> <478> cyan metal sphere");
        // Bin 20 has no preimage on a 512 canvas, so the layout form uses 1024.
        let c = Canvas::new(1024, 1024);
        let bbox = dequantize_box(&q, c).unwrap();
        assert_eq!(quantize_box(&bbox, c), q);
        let layout = Layout::new(c, vec![Region::new("cyan metal sphere", bbox)]).unwrap();
        assert_eq!(serialize_reco(&layout), "<020> <230> <492> <478> cyan metal sphere");
        let map = ClassMap::default().with("cyan metal sphere", 23);
        assert_eq!(serialize_ldm(&layout, &map).unwrap(), "<020> <230> <492> <478> <cls23>");
        assert_eq!(serialize_ldm(&layout, &ClassMap::default()).unwrap(), "<020> <230> <492> <478> <cls40>");
    }

    #[test]
    fn empty_layouts() {
        let l = Layout::empty(Canvas::default());
        assert_eq!(serialize_reco(&l), "");
        assert_eq!(serialize_ldm(&l, &ClassMap::default()).unwrap(), "");
        assert_eq!(parse_reco("").unwrap(), vec![]);
    }

    #[test]
    fn unknown_caption_rejected() {
        let l = Layout::new(Canvas::default(), vec![Region::new("a dog", BBox::new(0, 0, 5, 5).unwrap())]).unwrap();
        assert_eq!(serialize_ldm(&l, &ClassMap::default()), Err(CodecError::ClassMap("a dog".into())));
    }

    #[test]
    fn class_tokens_distinct() {
        let map = ClassMap::default();
        let mut ids: Vec<u32> = Attributes::all().map(|a| map.get(&a.caption()).unwrap()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 48);
    }

    #[test]
    fn prompts() {
        assert_eq!(iterinpaint_prompt("cyan metal sphere"), "Add cyan metal sphere");
        assert_eq!(parse_add_prompt("Add gray background"), Ok(AddPrompt::Background));
        for a in Attributes::all() {
            assert_eq!(parse_add_prompt(&iterinpaint_prompt(&a.caption())), Ok(AddPrompt::Object(a)));
        }
        for bad in ["add red rubber cube", "Add red", "Add red rubber cube please", ""] {
            assert!(matches!(parse_add_prompt(bad), Err(CodecError::PromptParse(_))));
        }
    }

    #[test]
    fn degenerate_and_invalid_bins() {
        assert_eq!(QuantizedBox::new([0, 0, 1000, 5]), Err(CodecError::InvalidBin(1000)));
        let q = QuantizedBox::new([10, 10, 10, 20]).unwrap();
        assert_eq!(dequantize_box(&q, Canvas::default()), Err(CodecError::DegenerateBox([10, 10, 10, 20])));
        assert!(parse_reco("<001> <002> <003>").is_err());
        assert!(parse_reco("<001> <002> <003> <004>").is_err());
        assert!(parse_reco("<001> <002> <003> <04> red").is_err());
    }
}
