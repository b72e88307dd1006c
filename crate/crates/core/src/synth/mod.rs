//! Synthetic scenes and reference implementations for testing.

pub mod fixtures;
pub mod oracle;
mod scene;
pub mod shapes;

pub use scene::{generate, synthetic_features, SceneBundle, SceneKind, SceneRecipe, PAINTING_RELIEF};

use crate::geometry::{KnnIndex, NormalField};

/// Mean normal weight `1 - n_i . n_j` over KNN pairs joining different
/// ground-truth instances, minus the mean over pairs inside one instance.
/// Returns `None` when either set of pairs is empty.
pub fn instance_weight_gap(labels: &[u32], normals: &NormalField, index: &KnnIndex) -> Option<f64> {
    let (mut inter, mut n_inter, mut intra, mut n_intra) = (0f64, 0usize, 0f64, 0usize);
    for i in 0..index.point_count() {
        let a = normals.get(i);
        for &j in index.neighbors(i) {
            let b = normals.get(j as usize);
            let w = 1.0 - (a[0] as f64 * b[0] as f64 + a[1] as f64 * b[1] as f64 + a[2] as f64 * b[2] as f64);
            if labels[i] == labels[j as usize] {
                intra += w;
                n_intra += 1;
            } else {
                inter += w;
                n_inter += 1;
            }
        }
    }
    (n_inter > 0 && n_intra > 0).then(|| inter / n_inter as f64 - intra / n_intra as f64)
}
