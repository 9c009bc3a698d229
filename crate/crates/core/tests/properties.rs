use layoutlab_core::backend::ProceduralBackend;
use layoutlab_core::codec::{dequantize_box, parse_reco, quantize_box, serialize_reco, serialize_reco_bins, QuantizedBox};
use layoutlab_core::engine::{generate, order_regions, EngineOptions, Mode, OrderPolicy};
use layoutlab_core::eval::{average_precision, ApParams, Detection, EvalReport, GroundTruth};
use layoutlab_core::model::{composite, iou, mask_from_box, Attributes, Color, Material, Shape};
use layoutlab_core::{BBox, Canvas, Image, Layout, Mask, Region};
use proptest::prelude::*;

const C: Canvas = Canvas::new(512, 512);

fn bbox_in(w: u32, h: u32) -> impl Strategy<Value = BBox> {
    (0..w, 0..h).prop_flat_map(move |(x, y)| {
        (Just(x), Just(y), x + 1..=w, y + 1..=h).prop_map(|(x1, y1, x2, y2)| BBox::new(x1, y1, x2, y2).unwrap())
    })
}

fn caption() -> impl Strategy<Value = String> {
    (0usize..8, 0usize..2, 0usize..3).prop_map(|(c, m, s)| {
        Attributes::new(Color::ALL[c], Material::ALL[m], Shape::ALL[s]).caption()
    })
}

fn layout(max: usize) -> impl Strategy<Value = Layout> {
    prop::collection::vec((caption(), bbox_in(512, 512)), 0..=max).prop_map(|rs| {
        Layout::new(C, rs.into_iter().map(|(c, b)| Region::new(c, b)).collect()).unwrap()
    })
}

/// Layouts whose boxes are pairwise disjoint, built on a coarse grid.
fn disjoint_layout() -> impl Strategy<Value = Layout> {
    prop::collection::btree_set(0u32..16, 1..=5).prop_flat_map(|cells| {
        let n = cells.len();
        (Just(cells), prop::collection::vec((caption(), 24u32..=128, 24u32..=128), n)).prop_map(|(cells, rest)| {
            let regions = cells
                .into_iter()
                .zip(rest)
                .map(|(cell, (cap, w, h))| {
                    let (x, y) = ((cell % 4) * 128, (cell / 4) * 128);
                    Region::new(cap, BBox::new(x, y, x + w, y + h).unwrap())
                })
                .collect();
            Layout::new(C, regions).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn iou_bounds_and_symmetry(a in bbox_in(64, 64), b in bbox_in(64, 64)) {
        let ab: f64 = iou(&a, &b);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab, iou::<f64>(&b, &a));
        prop_assert_eq!(iou::<f64>(&a, &a), 1.0);
        prop_assert_eq!(ab == 0.0, a.intersection(&b).is_none());
    }

    #[test]
    fn quantization_monotone(a in 0u32..=512, b in 0u32..=512) {
        let qa = quantize_box(&BBox::new(a.min(511), 0, 512, 1).unwrap(), C).bins()[0];
        let qb = quantize_box(&BBox::new(b.min(511), 0, 512, 1).unwrap(), C).bins()[0];
        if a.min(511) <= b.min(511) {
            prop_assert!(qa <= qb);
        }
    }

    #[test]
    fn dequantize_quantize_within_a_pixel(b in bbox_in(512, 512)) {
        let q = quantize_box(&b, C);
        if let Ok(back) = dequantize_box(&q, C) {
            for (x, y) in b.coords().iter().zip(back.coords()) {
                prop_assert!(x.abs_diff(y) <= 1, "{b} -> {q:?} -> {back}");
            }
        }
    }

    #[test]
    fn reco_round_trip(l in layout(6)) {
        let text = serialize_reco(&l);
        let parsed = parse_reco(&text).unwrap();
        prop_assert_eq!(parsed.len(), l.len());
        for ((q, cap), r) in parsed.iter().zip(l.regions()) {
            prop_assert_eq!(*q, quantize_box(&r.bbox, C));
            prop_assert_eq!(cap, &r.caption);
        }
    }

    #[test]
    fn reco_injective(
        a in prop::collection::vec((caption(), prop::array::uniform4(0u32..1000)), 0..4),
        b in prop::collection::vec((caption(), prop::array::uniform4(0u32..1000)), 0..4),
    ) {
        let norm = |v: Vec<(String, [u32; 4])>| -> Vec<(QuantizedBox, String)> {
            v.into_iter()
                .map(|(c, [x1, y1, x2, y2])| {
                    (QuantizedBox::new([x1.min(x2), y1.min(y2), x1.max(x2), y1.max(y2)]).unwrap(), c)
                })
                .collect()
        };
        let (a, b) = (norm(a), norm(b));
        let text = |v: &[(QuantizedBox, String)]| {
            serialize_reco_bins(&v.iter().map(|(q, c)| (*q, c.as_str())).collect::<Vec<_>>())
        };
        prop_assert_eq!(a == b, text(&a) == text(&b));
    }

    #[test]
    fn composite_locality(b in bbox_in(32, 32), seed in any::<u8>()) {
        let c = Canvas::new(32, 32);
        let ctx = Image::filled(c, [seed, 1, 2]);
        let gen = Image::filled(c, [3, seed, 4]);
        let m = mask_from_box(&b, c);
        let out = composite(&ctx, &gen, &m).unwrap();
        for y in 0..32 {
            for x in 0..32 {
                let want = if m.get(x, y) { gen.get(x, y) } else { ctx.get(x, y) };
                prop_assert_eq!(out.get(x, y), want);
            }
        }
        prop_assert_eq!(composite(&ctx, &gen, &Mask::zeros(c)).unwrap(), ctx.clone());
        prop_assert_eq!(composite(&ctx, &gen, &Mask::ones(c)).unwrap(), gen);
    }

    #[test]
    fn order_policies_are_permutations(l in layout(8), seed in any::<u64>()) {
        let top = order_regions(&l, OrderPolicy::TopToBottom);
        let mut bottom = order_regions(&l, OrderPolicy::BottomToTop);
        bottom.reverse();
        prop_assert_eq!(&top, &bottom);
        let mut r = order_regions(&l, OrderPolicy::Random { seed });
        r.sort();
        prop_assert_eq!(r, (0..l.len()).collect::<Vec<_>>());
        for w in top.windows(2) {
            let (a, b) = (l.regions()[w[0]].bbox, l.regions()[w[1]].bbox);
            prop_assert!((a.y1(), a.x1(), w[0]) < (b.y1(), b.x1(), w[1]));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn paste_mode_locality_and_step_count(l in layout(5)) {
        let be = ProceduralBackend::default();
        let (img, trace) = generate(&l, &be, &EngineOptions::default()).unwrap();
        prop_assert_eq!(trace.len(), l.len() + 1);
        let initial = Image::filled(C, be.palette.background);
        let mut applied = Mask::zeros(C);
        for step in &trace {
            applied = applied.union(&step.mask).unwrap();
            for y in (0..512).step_by(3) {
                for x in (0..512).step_by(3) {
                    if !applied.get(x, y) {
                        prop_assert_eq!(step.committed.get(x, y), initial.get(x, y));
                    }
                }
            }
        }
        prop_assert_eq!(&img, &trace.last().unwrap().committed);
    }

    #[test]
    fn order_invariant_on_disjoint_layouts(l in disjoint_layout(), seed in any::<u64>()) {
        let be = ProceduralBackend::default();
        let run = |order| generate(&l, &be, &EngineOptions { order, ..EngineOptions::default() }).unwrap().0;
        let given = run(OrderPolicy::Given);
        prop_assert_eq!(&given, &run(OrderPolicy::TopToBottom));
        prop_assert_eq!(&given, &run(OrderPolicy::BottomToTop));
        prop_assert_eq!(&given, &run(OrderPolicy::Random { seed }));
    }

    #[test]
    fn repaint_commits_backend_output(l in layout(3)) {
        let be = ProceduralBackend::default();
        let opts = EngineOptions { mode: Mode::Repaint, ..EngineOptions::default() };
        let (_, trace) = generate(&l, &be, &opts).unwrap();
        for s in &trace {
            prop_assert_eq!(&s.committed, &s.backend_output);
        }
    }
}

fn det_strategy() -> impl Strategy<Value = (Vec<Detection>, Vec<GroundTruth>)> {
    let item = || (0usize..3, 0i64..3, bbox_in(24, 24));
    (prop::collection::vec(item(), 1..8), prop::collection::vec((item(), 0u32..=100), 0..10)).prop_map(
        |(g, d)| {
            let gts = g.into_iter().map(|(i, c, b)| GroundTruth::new(format!("i{i}"), c, b)).collect();
            let dets = d
                .into_iter()
                .map(|((i, c, b), s)| Detection::new(format!("i{i}"), c, b, f64::from(s) / 100.0))
                .collect();
            (dets, gts)
        },
    )
}

proptest! {
    #[test]
    fn ap_bounds((dets, gts) in det_strategy()) {
        let r: EvalReport<f64> = average_precision(&dets, &gts, &ApParams::default()).unwrap();
        prop_assert!(0.0 <= r.ap && r.ap <= r.ap50 && r.ap50 <= 1.0);
    }

    #[test]
    fn ap_permutation_invariant((dets, gts) in det_strategy(), rot in 0usize..10) {
        let base: EvalReport<f64> = average_precision(&dets, &gts, &ApParams::default()).unwrap();
        let mut d2 = dets.clone();
        d2.reverse();
        let n = d2.len();
        if n > 0 {
            d2.rotate_left(rot % n);
        }
        let mut g2 = gts.clone();
        let gl = g2.len();
        g2.rotate_left(rot % gl);
        let r: EvalReport<f64> = average_precision(&d2, &g2, &ApParams::default()).unwrap();
        prop_assert_eq!((r.ap, r.ap50), (base.ap, base.ap50));
    }

    #[test]
    fn low_scoring_false_positive_never_helps((dets, gts) in det_strategy(), b in bbox_in(24, 24), c in 0i64..3) {
        let base: EvalReport<f64> = average_precision(&dets, &gts, &ApParams::default()).unwrap();
        let floor = dets.iter().map(|d| d.score).fold(1.0, f64::min);
        let mut more = dets.clone();
        more.push(Detection::new("unlabelled", c, b, floor / 2.0));
        let r: EvalReport<f64> = average_precision(&more, &gts, &ApParams::default()).unwrap();
        prop_assert!(r.ap <= base.ap + 1e-12 && r.ap50 <= base.ap50 + 1e-12);
    }

    #[test]
    fn scalar_widths_agree((dets, gts) in det_strategy()) {
        let a: EvalReport<f64> = average_precision(&dets, &gts, &ApParams::default()).unwrap();
        let b: EvalReport<f32> = average_precision(&dets, &gts, &ApParams::default()).unwrap();
        prop_assert!((a.ap - f64::from(b.ap)).abs() < 1e-4);
        prop_assert!((a.ap50 - f64::from(b.ap50)).abs() < 1e-4);
    }
}
