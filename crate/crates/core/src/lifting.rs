//! Projecting 2D artifacts onto the point cloud through the correspondence
//! table: per-point feature sampling, view-wise mask lifting, superpoint
//! pooling, and text prompt assembly.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CorrespondenceTable, FeatureMatrix, ImageFeatureStack, InstanceRaster, SuperpointMask, ViewAnnotation};

/// Bilinear sample of one view at continuous grid coordinates, clamped to
/// the grid. Writes `channels` values into `out`.
fn bilinear_into(stack: &ImageFeatureStack, view: usize, u: f64, v: f64, out: &mut [f32]) {
    let (h, w) = (stack.height(), stack.width());
    let u = u.clamp(0.0, (w - 1) as f64);
    let v = v.clamp(0.0, (h - 1) as f64);
    let c0 = u.floor() as usize;
    let r0 = v.floor() as usize;
    let c1 = (c0 + 1).min(w - 1);
    let r1 = (r0 + 1).min(h - 1);
    let fx = u - c0 as f64;
    let fy = v - r0 as f64;
    let t00 = stack.texel(view, r0, c0);
    let t01 = stack.texel(view, r0, c1);
    let t10 = stack.texel(view, r1, c0);
    let t11 = stack.texel(view, r1, c1);
    for (ch, o) in out.iter_mut().enumerate() {
        let top = t00[ch] as f64 * (1.0 - fx) + t01[ch] as f64 * fx;
        let bottom = t10[ch] as f64 * (1.0 - fx) + t11[ch] as f64 * fx;
        *o = (top * (1.0 - fy) + bottom * fy) as f32;
    }
}

/// One feature row per point, sampled from its own view at
/// `(x * (w - 1), y * (h - 1))`.
pub fn sample_point_features(stack: &ImageFeatureStack, corr: &CorrespondenceTable) -> Result<FeatureMatrix> {
    if stack.views() != corr.view_count() {
        return Err(Error::invalid(format!(
            "feature stack has {} views but correspondence table has {}",
            stack.views(),
            corr.view_count()
        )));
    }
    if stack.height() == 0 || stack.width() == 0 {
        return Err(Error::invalid("feature maps must be at least 1x1"));
    }
    let c = stack.channels();
    let n = corr.len();
    let mut data = vec![0f32; n * c];
    if c > 0 {
        data.par_chunks_mut(c).enumerate().for_each(|(i, row)| {
            let e = corr.get(i);
            let u = e.x as f64 * (stack.width() - 1) as f64;
            let v = e.y as f64 * (stack.height() - 1) as f64;
            bilinear_into(stack, e.view as usize, u, v, row);
        });
    }
    if let Some(k) = data.iter().position(|x| !x.is_finite()) {
        return Err(Error::Invariant(format!("sampled feature of point {} is not finite", k / c)));
    }
    FeatureMatrix::new(n, c, data)
}

/// Per-view lists of the points reconstructed from that view, each tagged
/// with the instance id at its nearest pixel.
pub fn lift_masks(raster: &InstanceRaster, corr: &CorrespondenceTable) -> Result<Vec<ViewAnnotation>> {
    raster.check_matches(corr)?;
    let mut out: Vec<ViewAnnotation> = (0..corr.view_count() as u32)
        .map(|view| ViewAnnotation { view, point_indices: Vec::new(), instance_ids: Vec::new() })
        .collect();
    for i in 0..corr.len() {
        let (v, row, col) = corr.pixel_of(i);
        let id = raster
            .get(v as usize, row as usize, col as usize)
            .ok_or_else(|| Error::invalid(format!("point {i} maps outside the raster")))?;
        let ann = &mut out[v as usize];
        ann.point_indices.push(i as u32);
        ann.instance_ids.push(id);
    }
    Ok(out)
}

/// Mean point feature of every superpoint.
pub fn pool_superpoint_features(point_features: &FeatureMatrix, sp: &SuperpointMask) -> Result<FeatureMatrix> {
    if point_features.rows() != sp.point_count() {
        return Err(Error::invalid(format!(
            "{} feature rows for {} points",
            point_features.rows(),
            sp.point_count()
        )));
    }
    let c = point_features.cols();
    let n = sp.superpoint_count();
    let mut sums = vec![0f64; n * c];
    for i in 0..sp.point_count() {
        let k = sp.label(i);
        for (s, &x) in sums[k * c..(k + 1) * c].iter_mut().zip(point_features.row(i)) {
            *s += x as f64;
        }
    }
    let sizes = sp.sizes();
    let data = sums
        .chunks(c.max(1))
        .zip(&sizes)
        .flat_map(|(row, &size)| row.iter().map(move |&s| (s / size as f64) as f32))
        .collect();
    FeatureMatrix::new(n, c, data)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub positive_classes: Vec<String>,
    pub padded_classes: Vec<String>,
    pub prompt_string: String,
    pub seed: u64,
}

/// `"a . b ."` for classes `[a, b]`.
pub fn prompt_string(classes: &[String]) -> String {
    classes.iter().map(|c| format!("{c} .")).collect::<Vec<_>>().join(" ")
}

/// Pads the positive class names to `total` with negatives drawn without
/// replacement from the vocabulary, in sampled order.
pub fn build_prompt(positive: &[String], vocabulary: &[String], total: usize, seed: u64) -> Result<PromptSpec> {
    if positive.len() > total {
        return Err(Error::invalid(format!(
            "{} positive classes exceed the prompt size {total}",
            positive.len()
        )));
    }
    let mut candidates: Vec<&String> = Vec::new();
    for name in vocabulary {
        if !positive.contains(name) && !candidates.contains(&name) {
            candidates.push(name);
        }
    }
    let needed = total - positive.len();
    if candidates.len() < needed {
        return Err(Error::invalid(format!(
            "vocabulary offers {} negative classes but {needed} are needed",
            candidates.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut padded = positive.to_vec();
    padded.extend(sample(&mut rng, candidates.len(), needed).into_iter().map(|k| candidates[k].clone()));
    Ok(PromptSpec {
        positive_classes: positive.to_vec(),
        prompt_string: prompt_string(&padded),
        padded_classes: padded,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Correspondence, ViewDims};

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn bilinear_hits_grid_node_exactly() {
        let (h, w, c) = (7, 5, 3);
        let data: Vec<f32> = (0..h * w * c).map(|k| (k as f32).sin()).collect();
        let stack = ImageFeatureStack::new(1, h, w, c, data).unwrap();
        // x = 0.5 -> column 2, y = 0.5 -> row 3.
        let corr =
            CorrespondenceTable::new(vec![Correspondence { view: 0, x: 0.5, y: 0.5 }], vec![ViewDims::new(7, 5)])
                .unwrap();
        let f = sample_point_features(&stack, &corr).unwrap();
        assert_eq!(f.row(0), stack.texel(0, 3, 2));
    }

    #[test]
    fn bilinear_reproduces_linear_field() {
        let stack = ImageFeatureStack::new(1, 1, 3, 1, vec![0.0, 1.0, 2.0]).unwrap();
        let corr =
            CorrespondenceTable::new(vec![Correspondence { view: 0, x: 0.5, y: 0.0 }], vec![ViewDims::new(1, 3)])
                .unwrap();
        assert_eq!(sample_point_features(&stack, &corr).unwrap().row(0), &[1.0]);
    }

    #[test]
    fn lift_two_points() {
        let raster = InstanceRaster::new(1, 2, 4, vec![5, 0, 1, 2, 3, 4, -1, -1]).unwrap();
        let corr = CorrespondenceTable::new(
            vec![Correspondence { view: 0, x: 0.0, y: 0.0 }, Correspondence { view: 0, x: 1.0, y: 1.0 }],
            vec![ViewDims::new(2, 4)],
        )
        .unwrap();
        let ann = lift_masks(&raster, &corr).unwrap();
        assert_eq!(ann.len(), 1);
        assert_eq!(ann[0].point_indices, vec![0, 1]);
        assert_eq!(ann[0].instance_ids, vec![5, -1]);
    }

    #[test]
    fn pooling_means() {
        let f = FeatureMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let one = SuperpointMask::new(vec![0, 0], 1).unwrap();
        assert_eq!(pool_superpoint_features(&f, &one).unwrap().data(), &[2.0, 3.0]);
        let singles = SuperpointMask::new(vec![0, 1], 2).unwrap();
        assert_eq!(pool_superpoint_features(&f, &singles).unwrap(), f);
    }

    #[test]
    fn prompt_examples() {
        let p = build_prompt(&strings(&["book", "sofa"]), &[], 2, 0).unwrap();
        assert_eq!(p.prompt_string, "book . sofa .");
        let p = build_prompt(&[], &strings(&["chair"]), 1, 0).unwrap();
        assert_eq!(p.padded_classes, strings(&["chair"]));
        assert_eq!(p.prompt_string, "chair .");
    }

    #[test]
    fn prompt_negatives_are_fresh_and_deterministic() {
        let vocab = strings(&["a", "b", "c", "d", "e", "f", "book"]);
        let pos = strings(&["book"]);
        let p = build_prompt(&pos, &vocab, 5, 11).unwrap();
        assert_eq!(p, build_prompt(&pos, &vocab, 5, 11).unwrap());
        assert_eq!(p.padded_classes[0], "book");
        let negatives = &p.padded_classes[1..];
        assert_eq!(negatives.len(), 4);
        assert!(negatives.iter().all(|n| n != "book"));
        let mut uniq = negatives.to_vec();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), 4);
    }

    #[test]
    fn prompt_insufficient_vocabulary() {
        let err = build_prompt(&strings(&["book"]), &strings(&["book", "x"]), 3, 0).unwrap_err();
        assert!(err.to_string().contains("negative"));
        assert!(build_prompt(&strings(&["a", "b"]), &[], 1, 0).is_err());
    }
}
