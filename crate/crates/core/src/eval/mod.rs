//! Layout-accuracy evaluation: detection, AP and benchmark tables.

mod ap;
mod detect;
mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::BBox;
use crate::sampler::ManifestEntry;
use crate::scalar::Scalar;

pub use ap::{average_precision, cap_per_image, detection_order, ApParams, ClassAp, EvalReport};
pub use detect::{Detector, UNKNOWN_SCORE};
pub use report::{report_table, ReportEntry, ReportRow, ReportTable};

/// Class id given to components the detector cannot classify.
pub const UNKNOWN_CLASS: i64 = -1;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no ground truth objects: AP is undefined")]
    UndefinedMetric,
    #[error("invalid AP parameters")]
    InvalidParams,
    #[error("detection references image {0:?} not present in the manifest")]
    ManifestMismatch(String),
    #[error("shuffled pairing needs at least two images")]
    TooFewImages,
    #[error("detections line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDetection")]
pub struct Detection {
    pub image_id: String,
    pub class_id: i64,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub score: f64,
}

#[derive(Deserialize)]
struct RawDetection {
    image_id: String,
    class_id: i64,
    #[serde(rename = "box")]
    bbox: BBox,
    score: f64,
}

impl TryFrom<RawDetection> for Detection {
    type Error = String;

    fn try_from(r: RawDetection) -> Result<Self, Self::Error> {
        if !(0.0..=1.0).contains(&r.score) {
            return Err(format!("score {} outside [0, 1]", r.score));
        }
        Ok(Detection { image_id: r.image_id, class_id: r.class_id, bbox: r.bbox, score: r.score })
    }
}

impl Detection {
    pub fn new(image_id: impl Into<String>, class_id: i64, bbox: BBox, score: f64) -> Self {
        Self { image_id: image_id.into(), class_id, bbox, score: score.clamp(0.0, 1.0) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub image_id: String,
    pub class_id: i64,
    #[serde(rename = "box")]
    pub bbox: BBox,
}

impl GroundTruth {
    pub fn new(image_id: impl Into<String>, class_id: i64, bbox: BBox) -> Self {
        Self { image_id: image_id.into(), class_id, bbox }
    }
}

/// Ground truth boxes of every manifest scene, keyed by scene id.
pub fn ground_truth(manifest: &[ManifestEntry]) -> Vec<GroundTruth> {
    manifest
        .iter()
        .flat_map(|e| {
            let id = e.image_id();
            e.scene.objects.iter().map(move |o| GroundTruth::new(id.clone(), i64::from(o.class_id()), o.bbox))
        })
        .collect()
}

pub fn write_detections<W: Write>(mut w: W, dets: &[Detection]) -> Result<(), EvalError> {
    for d in dets {
        let line = serde_json::to_string(d).map_err(|e| EvalError::Parse { line: 0, message: e.to_string() })?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn read_detections<R: BufRead>(r: R) -> Result<Vec<Detection>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| EvalError::Parse { line: i + 1, message: e.to_string() })?,
        );
    }
    Ok(out)
}

fn check_ids(manifest: &[ManifestEntry], dets: &[Detection]) -> Result<(), EvalError> {
    let ids: BTreeSet<String> = manifest.iter().map(|e| e.image_id()).collect();
    match dets.iter().find(|d| !ids.contains(&d.image_id)) {
        Some(d) => Err(EvalError::ManifestMismatch(d.image_id.clone())),
        None => Ok(()),
    }
}

/// Scores detections against the manifest's scenes.
pub fn evaluate_run<F: Scalar>(
    manifest: &[ManifestEntry],
    dets: &[Detection],
    params: &ApParams<F>,
) -> Result<EvalReport<F>, EvalError> {
    check_ids(manifest, dets)?;
    let mut report = average_precision(dets, &ground_truth(manifest), params)?;
    report.n_images = manifest.len();
    Ok(report)
}

/// Pairs each layout with the detections of a uniformly chosen other image.
pub fn shuffled_pairing(manifest: &[ManifestEntry], dets: &[Detection], seed: u64) -> Result<Vec<Detection>, EvalError> {
    check_ids(manifest, dets)?;
    let n = manifest.len();
    if n < 2 {
        return Err(EvalError::TooFewImages);
    }
    let mut by_image: BTreeMap<&str, Vec<&Detection>> = BTreeMap::new();
    for d in dets {
        by_image.entry(&d.image_id).or_default().push(d);
    }
    let ids: Vec<String> = manifest.iter().map(|e| e.image_id()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(dets.len());
    for (i, id) in ids.iter().enumerate() {
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        for d in by_image.get(ids[j].as_str()).into_iter().flatten() {
            out.push(Detection { image_id: id.clone(), ..(*d).clone() });
        }
    }
    Ok(out)
}

/// AP of the shuffled pairing; a layout-blind upper bound near zero.
pub fn shuffled_baseline<F: Scalar>(
    manifest: &[ManifestEntry],
    dets: &[Detection],
    seed: u64,
    params: &ApParams<F>,
) -> Result<EvalReport<F>, EvalError> {
    let shuffled = shuffled_pairing(manifest, dets, seed)?;
    evaluate_run(manifest, &shuffled, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Skill;
    use crate::sampler::generate_bench;

    #[test]
    fn detection_json() {
        let line = r#"{"image_id":"a","class_id":4,"box":[1,2,3,4],"score":0.5}"#;
        let d: Detection = serde_json::from_str(line).unwrap();
        assert_eq!(serde_json::to_string(&d).unwrap(), line);
        assert!(serde_json::from_str::<Detection>(&line.replace("0.5", "1.5")).is_err());
        let err = read_detections("\n{\"image_id\":1}\n".as_bytes()).unwrap_err();
        assert!(matches!(err, EvalError::Parse { line: 2, .. }));
    }

    #[test]
    fn ground_truth_as_detections_scores_one() {
        let m = generate_bench(Skill::Size, "tiny", 10, 0).unwrap();
        let dets: Vec<Detection> = ground_truth(&m)
            .into_iter()
            .map(|g| Detection::new(g.image_id, g.class_id, g.bbox, 1.0))
            .collect();
        let r: EvalReport<f64> = evaluate_run(&m, &dets, &ApParams::default()).unwrap();
        assert_eq!((r.ap, r.ap50), (1.0, 1.0));
        assert_eq!(r.n_images, 10);
    }

    #[test]
    fn mismatched_ids_rejected() {
        let m = generate_bench(Skill::Size, "tiny", 2, 0).unwrap();
        let d = [Detection::new("nope", 0, BBox::new(0, 0, 1, 1).unwrap(), 1.0)];
        assert!(matches!(
            evaluate_run::<f64>(&m, &d, &ApParams::default()),
            Err(EvalError::ManifestMismatch(_))
        ));
    }

    #[test]
    fn shuffled_never_pairs_an_image_with_itself() {
        let m = generate_bench(Skill::Shape, "vertical", 30, 0).unwrap();
        let dets: Vec<Detection> = ground_truth(&m)
            .into_iter()
            .map(|g| Detection::new(g.image_id, g.class_id, g.bbox, 1.0))
            .collect();
        let shuffled = shuffled_pairing(&m, &dets, 1).unwrap();
        for e in &m {
            let own: Vec<_> = dets.iter().filter(|d| d.image_id == e.image_id()).map(|d| d.bbox).collect();
            let got: Vec<_> = shuffled.iter().filter(|d| d.image_id == e.image_id()).map(|d| d.bbox).collect();
            assert_ne!(own, got);
        }
        assert!(matches!(shuffled_pairing(&m[..1], &[], 0), Err(EvalError::TooFewImages)));
    }
}
