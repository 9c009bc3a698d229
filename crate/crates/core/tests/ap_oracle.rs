//! Average precision checked against a brute-force precision/recall
//! enumeration that recomputes the matching for every ranked prefix.

use layoutlab_core::eval::{average_precision, ApParams, Detection, EvalReport, GroundTruth};
use layoutlab_core::BBox;
use proptest::prelude::*;

fn iou_at_least(a: &BBox, b: &BBox, pct: u64) -> bool {
    let ix = a.x2().min(b.x2()).saturating_sub(a.x1().max(b.x1())) as u64;
    let iy = a.y2().min(b.y2()).saturating_sub(a.y1().max(b.y1())) as u64;
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    inter > 0 && inter * 100 >= pct * union
}

fn iou_cmp(a: &BBox, g1: &BBox, g2: &BBox) -> std::cmp::Ordering {
    let ov = |g: &BBox| {
        let ix = a.x2().min(g.x2()).saturating_sub(a.x1().max(g.x1())) as u64;
        let iy = a.y2().min(g.y2()).saturating_sub(a.y1().max(g.y1())) as u64;
        let inter = ix * iy;
        (inter, a.area() + g.area() - inter)
    };
    let (i1, u1) = ov(g1);
    let (i2, u2) = ov(g2);
    (i1 * u2).cmp(&(i2 * u1))
}

/// True-positive count after each ranked prefix, matching from scratch.
fn tp_after_prefix(ranked: &[&Detection], gts: &[&GroundTruth], pct: u64, k: usize) -> usize {
    let mut used = vec![false; gts.len()];
    let mut tp = 0;
    for d in &ranked[..k] {
        let mut best: Option<usize> = None;
        for (gi, g) in gts.iter().enumerate() {
            if used[gi] || g.image_id != d.image_id || !iou_at_least(&d.bbox, &g.bbox, pct) {
                continue;
            }
            best = match best {
                Some(b) if iou_cmp(&d.bbox, &g.bbox, &gts[b].bbox) != std::cmp::Ordering::Greater => Some(b),
                _ => Some(gi),
            };
        }
        if let Some(b) = best {
            used[b] = true;
            tp += 1;
        }
    }
    tp
}

pub fn brute_force(dets: &[Detection], gts: &[GroundTruth]) -> (f64, f64) {
    let mut classes: Vec<i64> = gts.iter().map(|g| g.class_id).collect();
    classes.sort();
    classes.dedup();
    let pcts: Vec<u64> = (0..10).map(|i| 50 + 5 * i).collect();
    let mut per_t = vec![0.0; pcts.len()];
    for &c in &classes {
        let cg: Vec<&GroundTruth> = gts.iter().filter(|g| g.class_id == c).collect();
        let mut cd: Vec<&Detection> = dets.iter().filter(|d| d.class_id == c).collect();
        cd.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap());
        for (ti, &pct) in pcts.iter().enumerate() {
            let points: Vec<(usize, usize)> =
                (1..=cd.len()).map(|k| (tp_after_prefix(&cd, &cg, pct, k), k)).collect();
            let mut sum = 0.0;
            for r in 0..=100usize {
                // Best precision among prefixes whose recall reaches r/100.
                let best = points
                    .iter()
                    .filter(|(tp, _)| tp * 100 >= r * cg.len())
                    .map(|(tp, k)| *tp as f64 / *k as f64)
                    .fold(0.0, f64::max);
                sum += best;
            }
            per_t[ti] += sum / 101.0;
        }
    }
    let per_t: Vec<f64> = per_t.iter().map(|v| v / classes.len() as f64).collect();
    (per_t.iter().sum::<f64>() / 10.0, per_t[0])
}

fn small_box() -> impl Strategy<Value = BBox> {
    (0u32..16, 0u32..16, 1u32..10, 1u32..10).prop_map(|(x, y, w, h)| BBox::new(x, y, x + w, y + h).unwrap())
}

prop_compose! {
    fn instance()(
        gts in prop::collection::vec((0usize..2, 0i64..3, small_box()), 1..=5),
        dets in prop::collection::vec((0usize..2, 0i64..3, small_box()), 0..=5),
        order in Just(()).prop_perturb(|_, mut rng| {
            let mut v: Vec<u32> = (1..=5).collect();
            for i in (1..v.len()).rev() {
                v.swap(i, rng.random_range(0..=i));
            }
            v
        }),
    ) -> (Vec<Detection>, Vec<GroundTruth>) {
        let img = |i: usize| format!("img{i}");
        let gts = gts.into_iter().map(|(i, c, b)| GroundTruth::new(img(i), c, b)).collect();
        let dets = dets
            .into_iter()
            .zip(order)
            .map(|((i, c, b), s)| Detection::new(img(i), c, b, f64::from(s) / 5.0))
            .collect();
        (dets, gts)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn matches_brute_force((dets, gts) in instance()) {
        let r: EvalReport<f64> = average_precision(&dets, &gts, &ApParams::default()).unwrap();
        let (ap, ap50) = brute_force(&dets, &gts);
        prop_assert!((r.ap - ap).abs() <= 1e-9, "AP {} vs {}", r.ap, ap);
        prop_assert!((r.ap50 - ap50).abs() <= 1e-9, "AP50 {} vs {}", r.ap50, ap50);
    }
}
