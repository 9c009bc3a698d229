//! Deterministic scene and layout generators.

mod coco;
mod splits;

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Scene, Skill};

pub use coco::{
    sample_coco_layout, Category, CocoLayout, CocoLayoutSpec, CocoSkill, ObjectPair, Relation,
};
pub use splits::{
    sample_fine, sample_scene, sample_with, Aspect, FineBucket, Placement, SamplerConfig, SplitSpec,
    FINE_RATIOS, FINE_SCALES, ID_SPLIT, MAX_FINE_COUNT, OOD_SPLITS, PX_PER_UNIT_512,
};

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("unknown split {skill}/{split}")]
    UnknownSplit { skill: Skill, split: String },
    #[error("unknown bucket {bucket:?} for skill {skill}")]
    Bucket { skill: Skill, bucket: String },
    #[error("split {0} is not a valid definition")]
    InvalidSpec(String),
    #[error("could not place objects for {skill}/{split} seed {seed} within {retries} attempts per object")]
    Placement { skill: Skill, split: String, seed: u64, retries: usize },
    #[error("unknown COCO skill {0:?}")]
    UnknownCocoSkill(String),
    #[error("unknown COCO split {split:?} for {skill}")]
    UnknownCocoSplit { skill: CocoSkill, split: String },
    #[error("index {index} out of range for {len} layouts")]
    Index { index: usize, len: usize },
    #[error("manifest line {line}: {source}")]
    Manifest { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One line of a split manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub skill: Skill,
    pub split: String,
    pub seed: u64,
    pub scene: Scene,
}

impl ManifestEntry {
    pub fn new(scene: Scene) -> Self {
        Self { skill: scene.skill, split: scene.split.clone(), seed: scene.seed, scene }
    }

    pub fn image_id(&self) -> String {
        self.scene.id()
    }
}

/// `n` scenes with seeds `first_seed..first_seed + n`.
pub fn generate_bench(skill: Skill, split: &str, n: usize, first_seed: u64) -> Result<Vec<ManifestEntry>, SamplerError> {
    let spec = SplitSpec::lookup(skill, split)?;
    let config = SamplerConfig::default();
    (0..n as u64)
        .map(|i| sample_with(&spec, &config, first_seed + i).map(ManifestEntry::new))
        .collect()
}

pub fn write_manifest<W: Write>(mut w: W, entries: &[ManifestEntry]) -> Result<(), SamplerError> {
    for e in entries {
        let line = serde_json::to_string(e).map_err(|source| SamplerError::Manifest { line: 0, source })?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn read_manifest<R: BufRead>(r: R) -> Result<Vec<ManifestEntry>, SamplerError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry =
            serde_json::from_str(&line).map_err(|source| SamplerError::Manifest { line: i + 1, source })?;
        out.push(entry);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip() {
        let entries = generate_bench(Skill::Number, "few", 20, 0).unwrap();
        assert!(entries.iter().all(|e| e.scene.objects.len() <= 2));
        let mut buf = Vec::new();
        write_manifest(&mut buf, &entries).unwrap();
        assert_eq!(buf.iter().filter(|b| **b == b'\n').count(), 20);
        let back = read_manifest(buf.as_slice()).unwrap();
        assert_eq!(back, entries);
        assert_eq!(back[3].image_id(), "number_few_3");
    }

    #[test]
    fn manifest_reports_bad_line() {
        let text = "\n{\"skill\":\"number\"}\n";
        assert!(matches!(read_manifest(text.as_bytes()), Err(SamplerError::Manifest { line: 2, .. })));
    }
}
