use ovseg3r_core::lifting::{lift_masks, pool_superpoint_features, sample_point_features};
use ovseg3r_core::model::{FeatureMatrix, ImageFeatureStack, ScenePrediction, SuperpointMask};
use ovseg3r_core::superpoint::{segment_pipeline, SegmentConfig};
use ovseg3r_core::synth::oracle::{run_oracle, OracleKind, REAL_TOLERANCE};
use ovseg3r_core::synth::{generate, SceneKind, SceneRecipe};
use ovseg3r_core::vip::{compute_visibility, decode_predictions, partition_predictions};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn numerical_oracles_agree() {
    for kind in OracleKind::ALL {
        let report = run_oracle(kind, 50, 11).unwrap();
        assert!(report.passed(), "{kind}: {:#?}", report.failures);
        assert!(report.max_abs_error <= REAL_TOLERANCE, "{kind}: {}", report.max_abs_error);
    }
}

fn scene_prediction(seed: u64, sigma: f64, views: usize) -> (ovseg3r_core::synth::SceneBundle, SuperpointMask, ScenePrediction) {
    let kind = [SceneKind::BoxRoom, SceneKind::FlushObject, SceneKind::RandomBlobs][seed as usize % 3];
    let b = generate(&SceneRecipe::new(kind, 4000, views, sigma, seed)).unwrap();
    let sp = segment_pipeline(&b.points, &b.corr, &b.raster, &SegmentConfig { sp_min: 5, ..Default::default() }, 10).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = sp.superpoint_count();
    let q = rng.random_range(0..=n.min(40));
    let init: Vec<u32> = rand::seq::index::sample(&mut rng, n, q).into_iter().map(|k| k as u32).collect();
    let masks = (0..q * n).map(|_| rng.random_bool(0.3)).collect();
    let classes = (0..q).map(|_| rng.random_range(0..10)).collect();
    let pred = ScenePrediction::new(n, masks, classes, init).unwrap();
    (b, sp, pred)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn lift_partitions_points(seed in any::<u64>(), views in 1usize..5) {
        let b = generate(&SceneRecipe::new(SceneKind::BoxRoom, 2000, views, 0.0, seed)).unwrap();
        let ann = lift_masks(&b.raster, &b.corr).unwrap();
        let mut all: Vec<u32> = ann.iter().flat_map(|a| a.point_indices.clone()).collect();
        for a in &ann {
            prop_assert!(a.point_indices.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(a.point_indices.iter().all(|&i| b.corr.get(i as usize).view == a.view));
        }
        all.sort_unstable();
        prop_assert_eq!(all, (0..2000u32).collect::<Vec<_>>());
    }

    #[test]
    fn pooling_constant_features_is_exact(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_points = rng.random_range(1..300);
        let n = rng.random_range(1..=n_points.min(30));
        let raw: Vec<u32> = (0..n_points).map(|i| if i < n { i as u32 } else { rng.random_range(0..n as u32) }).collect();
        let sp = SuperpointMask::compacted(&raw);
        let c = rng.random_range(1..9);
        let constants: Vec<Vec<f32>> = (0..n).map(|_| (0..c).map(|_| rng.random_range(-50.0f32..50.0)).collect()).collect();
        let broadcast: Vec<Vec<f32>> = sp.labels().iter().map(|&l| constants[l as usize].clone()).collect();
        let pooled = pool_superpoint_features(&FeatureMatrix::from_rows(&broadcast).unwrap(), &sp).unwrap();
        prop_assert_eq!(pooled, FeatureMatrix::from_rows(&constants).unwrap());
    }

    #[test]
    fn bilinear_stays_within_corners(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (h, w) = (rng.random_range(1..8), rng.random_range(1..8));
        let data: Vec<f32> = (0..h * w).map(|_| rng.random_range(-5.0f32..5.0)).collect();
        let stack = ImageFeatureStack::new(1, h, w, 1, data).unwrap();
        let b = generate(&SceneRecipe::new(SceneKind::TwoViewSeam, 500, 2, 0.0, seed)).unwrap();
        let corr = ovseg3r_core::model::CorrespondenceTable::new(
            b.corr.entries().iter().map(|e| ovseg3r_core::model::Correspondence { view: 0, ..*e }).collect(),
            vec![b.corr.view_dims()[0]],
        ).unwrap();
        let f = sample_point_features(&stack, &corr).unwrap();
        for i in 0..corr.len() {
            let e = corr.get(i);
            let (u, v) = (e.x as f64 * (w - 1) as f64, e.y as f64 * (h - 1) as f64);
            let corners = [(v.floor(), u.floor()), (v.floor(), u.ceil()), (v.ceil(), u.floor()), (v.ceil(), u.ceil())]
                .map(|(r, c)| stack.texel(0, (r as usize).min(h - 1), (c as usize).min(w - 1))[0]);
            let lo = corners.iter().copied().fold(f32::INFINITY, f32::min);
            let hi = corners.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            prop_assert!(f.get(i, 0) >= lo && f.get(i, 0) <= hi);
        }
    }

    #[test]
    fn vip_structural_guarantees(seed in any::<u64>(), views in 1usize..5, sigma in prop::sample::select(vec![0.0, 0.03])) {
        let (b, sp, pred) = scene_prediction(seed, sigma, views);
        let vis = compute_visibility(&b.corr, &sp, pred.init_superpoints()).unwrap();
        let parts = partition_predictions(&pred, &vis).unwrap();
        prop_assert_eq!(parts.len(), views);
        let members = sp.members();
        let mut appears = vec![false; pred.query_count()];
        for p in &parts {
            let v = p.view_index as usize;
            for (r, &a) in p.query_rows.iter().enumerate() {
                appears[a as usize] = true;
                let s = pred.init_superpoints()[a as usize] as usize;
                prop_assert!(members[s].iter().any(|&i| b.corr.get(i as usize).view as usize == v));
                for (c, &k) in p.superpoint_cols.iter().enumerate() {
                    prop_assert_eq!(p.mask(r, c), pred.mask(a as usize, k as usize));
                }
                prop_assert_eq!(p.classes[r], pred.classes()[a as usize]);
            }
            for a in 0..pred.query_count() {
                if !p.query_rows.contains(&(a as u32)) {
                    prop_assert!(!vis.query(v, a));
                }
            }
            let per_view = p.to_prediction(&pred).unwrap();
            prop_assert_eq!(per_view.query_count(), p.query_rows.len());
        }
        // Every superpoint has at least one point, hence at least one view.
        prop_assert!(appears.iter().all(|&x| x));
    }

    #[test]
    fn argmax_ignores_positive_text_scaling(seed in any::<u64>(), scale in 0.01f32..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = rng.random_range(1..16);
        let rand_m = |rng: &mut ChaCha8Rng, r: usize| {
            FeatureMatrix::new(r, c, (0..r * c).map(|_| rng.random_range(-1.0f32..1.0)).collect()).unwrap()
        };
        let n = rng.random_range(1..20);
        let sp = rand_m(&mut rng, n);
        let init: Vec<u32> = (0..rng.random_range(0..=n) as u32).collect();
        let queries = rand_m(&mut rng, init.len());
        let t = rng.random_range(1..12);
        let text = rand_m(&mut rng, t);
        let scaled = FeatureMatrix::new(text.rows(), c, text.data().iter().map(|x| x * scale).collect()).unwrap();
        let a = decode_predictions(&queries, &sp, &text, 0.0, &init).unwrap();
        let b = decode_predictions(&queries, &sp, &scaled, 0.0, &init).unwrap();
        prop_assert_eq!(a.classes(), b.classes());
    }
}
