//! COCO-style average precision over exact pixel IoU.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::model::iou;
use crate::scalar::Scalar;

use super::{Detection, EvalError, GroundTruth};

#[derive(Debug, Clone, PartialEq)]
pub struct ApParams<F> {
    pub iou_thresholds: Vec<F>,
    /// Points of the interpolated precision-recall curve.
    pub recall_points: usize,
    /// Highest-scoring detections kept per image.
    pub max_dets: usize,
}

impl<F: Scalar> Default for ApParams<F> {
    fn default() -> Self {
        Self {
            iou_thresholds: (0..10).map(|i| F::from_ratio(50 + 5 * i, 100)).collect(),
            recall_points: 101,
            max_dets: 100,
        }
    }
}

impl<F: Scalar> ApParams<F> {
    pub fn single_threshold(t: F) -> Self {
        Self { iou_thresholds: vec![t], ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAp<F> {
    pub class_id: i64,
    pub ap: F,
    pub ap50: F,
    pub n_gt: usize,
    pub n_det: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport<F> {
    /// Mean over IoU thresholds of the class-mean AP.
    pub ap: F,
    /// Class-mean AP at IoU 0.5.
    pub ap50: F,
    /// `(threshold, class-mean AP)` pairs.
    pub per_threshold: Vec<(F, F)>,
    pub per_class: Vec<ClassAp<F>>,
    pub n_images: usize,
    pub n_gt: usize,
    pub n_det: usize,
}

/// Canonical detection order: score descending, then a content key so that
/// ties do not depend on input order.
pub fn detection_order(a: &Detection, b: &Detection) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.image_id.cmp(&b.image_id))
        .then_with(|| a.bbox.cmp(&b.bbox))
        .then_with(|| a.class_id.cmp(&b.class_id))
}

/// Keeps the `max_dets` best detections of each image.
pub fn cap_per_image(dets: &[Detection], max_dets: usize) -> Vec<Detection> {
    let mut by_image: BTreeMap<&str, Vec<&Detection>> = BTreeMap::new();
    for d in dets {
        by_image.entry(&d.image_id).or_default().push(d);
    }
    let mut out = Vec::with_capacity(dets.len());
    for (_, mut list) in by_image {
        list.sort_by(|a, b| detection_order(a, b));
        out.extend(list.into_iter().take(max_dets).cloned());
    }
    out
}

/// Greedy matching at one threshold; returns the TP flag of each detection
/// in `dets` order.
fn match_greedy<F: Scalar>(dets: &[&Detection], gts: &HashMap<&str, Vec<&GroundTruth>>, t: F) -> Vec<bool> {
    let mut taken: HashMap<&str, Vec<bool>> =
        gts.iter().map(|(k, v)| (*k, vec![false; v.len()])).collect();
    dets.iter()
        .map(|d| {
            let Some(cands) = gts.get(d.image_id.as_str()) else { return false };
            let used = taken.get_mut(d.image_id.as_str()).unwrap();
            let mut best: Option<(usize, F)> = None;
            for (gi, g) in cands.iter().enumerate() {
                if used[gi] {
                    continue;
                }
                let v: F = iou(&d.bbox, &g.bbox);
                if v >= t && best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((gi, v));
                }
            }
            match best {
                Some((gi, _)) => {
                    used[gi] = true;
                    true
                }
                None => false,
            }
        })
        .collect()
}

/// Interpolated AP from TP flags in rank order.
fn interpolated_ap<F: Scalar>(tp: &[bool], n_pos: usize, recall_points: usize) -> F {
    let n = F::from_usize_lossy(n_pos);
    let mut recall = Vec::with_capacity(tp.len());
    let mut precision = Vec::with_capacity(tp.len());
    let (mut tps, mut fps) = (0usize, 0usize);
    for &hit in tp {
        if hit {
            tps += 1;
        } else {
            fps += 1;
        }
        recall.push(F::from_usize_lossy(tps) / n);
        precision.push(F::from_usize_lossy(tps) / F::from_usize_lossy(tps + fps));
    }
    // Monotone envelope from the right.
    for i in (1..precision.len()).rev() {
        if precision[i] > precision[i - 1] {
            precision[i - 1] = precision[i];
        }
    }
    let last = F::from_usize_lossy(recall_points - 1);
    let mut sum = F::zero();
    for k in 0..recall_points {
        let r = F::from_usize_lossy(k) / last;
        let idx = recall.partition_point(|rc| *rc < r);
        if idx < precision.len() {
            sum = sum + precision[idx];
        }
    }
    sum / F::from_usize_lossy(recall_points)
}

/// Per-class, per-threshold AP averaged into a report.
pub fn average_precision<F: Scalar>(
    dets: &[Detection],
    gts: &[GroundTruth],
    params: &ApParams<F>,
) -> Result<EvalReport<F>, EvalError> {
    if gts.is_empty() {
        return Err(EvalError::UndefinedMetric);
    }
    if params.iou_thresholds.is_empty() || params.recall_points < 2 {
        return Err(EvalError::InvalidParams);
    }
    let half = F::from_ratio(1, 2);
    let mut thresholds = params.iou_thresholds.clone();
    let ap50_slot = match thresholds.iter().position(|t| *t == half) {
        Some(i) => i,
        None => {
            thresholds.push(half);
            thresholds.len() - 1
        }
    };

    let dets = cap_per_image(dets, params.max_dets);
    let classes: BTreeSet<i64> = gts.iter().map(|g| g.class_id).collect();
    let images: BTreeSet<&str> =
        gts.iter().map(|g| g.image_id.as_str()).chain(dets.iter().map(|d| d.image_id.as_str())).collect();

    let mut per_class = Vec::with_capacity(classes.len());
    let mut sums = vec![F::zero(); thresholds.len()];
    for &class in &classes {
        let mut class_gts: HashMap<&str, Vec<&GroundTruth>> = HashMap::new();
        let mut n_gt = 0;
        for g in gts.iter().filter(|g| g.class_id == class) {
            class_gts.entry(&g.image_id).or_default().push(g);
            n_gt += 1;
        }
        let mut class_dets: Vec<&Detection> = dets.iter().filter(|d| d.class_id == class).collect();
        class_dets.sort_by(|a, b| detection_order(a, b));

        let values: Vec<F> = thresholds
            .iter()
            .map(|t| interpolated_ap(&match_greedy(&class_dets, &class_gts, *t), n_gt, params.recall_points))
            .collect();
        for (s, v) in sums.iter_mut().zip(&values) {
            *s = *s + *v;
        }
        let user = &values[..params.iou_thresholds.len()];
        per_class.push(ClassAp {
            class_id: class,
            ap: mean(user),
            ap50: values[ap50_slot],
            n_gt,
            n_det: class_dets.len(),
        });
    }

    let n_classes = F::from_usize_lossy(classes.len());
    let class_means: Vec<F> = sums.iter().map(|s| *s / n_classes).collect();
    let per_threshold: Vec<(F, F)> =
        params.iou_thresholds.iter().copied().zip(class_means.iter().copied()).collect();
    Ok(EvalReport {
        ap: mean(&class_means[..params.iou_thresholds.len()]),
        ap50: class_means[ap50_slot],
        per_threshold,
        per_class,
        n_images: images.len(),
        n_gt: gts.len(),
        n_det: dets.len(),
    })
}

fn mean<F: Scalar>(xs: &[F]) -> F {
    xs.iter().fold(F::zero(), |a, b| a + *b) / F::from_usize_lossy(xs.len())
}
