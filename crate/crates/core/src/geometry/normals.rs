//! PCA normal estimation.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;

use super::KnnIndex;
use crate::error::{Error, Result};
use crate::model::{FeatureMatrix, PointCloud};

/// Used when a neighborhood has no spatial extent at all.
pub const FALLBACK_NORMAL: [f32; 3] = [0.0, 0.0, 1.0];

/// Unit normal per point plus a flag marking neighborhoods that collapsed
/// to a single location and received [`FALLBACK_NORMAL`].
#[derive(Clone, Debug, PartialEq)]
pub struct NormalField {
    normals: Vec<[f32; 3]>,
    degenerate: Vec<bool>,
}

impl NormalField {
    /// Wraps externally computed normals; every row must have unit length.
    pub fn new(normals: Vec<[f32; 3]>) -> Result<Self> {
        for (i, n) in normals.iter().enumerate() {
            let len = (n.iter().map(|&c| c as f64 * c as f64).sum::<f64>()).sqrt();
            if !(len - 1.0).abs().le(&1e-5) {
                return Err(Error::invalid(format!("normal {i} has length {len}, expected 1")));
            }
        }
        let degenerate = vec![false; normals.len()];
        Ok(Self { normals, degenerate })
    }

    pub fn from_matrix(m: &FeatureMatrix) -> Result<Self> {
        if m.cols() != 3 {
            return Err(Error::invalid(format!("normals need 3 columns, got {}", m.cols())));
        }
        Self::new((0..m.rows()).map(|i| m.row(i).try_into().unwrap()).collect())
    }

    pub fn to_matrix(&self) -> FeatureMatrix {
        FeatureMatrix::new(self.normals.len(), 3, self.normals.iter().flatten().copied().collect())
            .expect("unit normals are finite")
    }

    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }

    pub fn normals(&self) -> &[[f32; 3]] {
        &self.normals
    }

    #[inline]
    pub fn get(&self, i: usize) -> [f32; 3] {
        self.normals[i]
    }

    pub fn degenerate(&self) -> &[bool] {
        &self.degenerate
    }
}

/// Estimates one normal per point from the covariance of the point and its
/// k neighbors, centered on the neighborhood mean.
///
/// With `view_origins` (one per point), each normal faces its origin;
/// otherwise its largest-magnitude component is made positive.
pub fn estimate_normals(points: &PointCloud, index: &KnnIndex, view_origins: Option<&[[f32; 3]]>) -> Result<NormalField> {
    let n = points.len();
    if index.point_count() != n {
        return Err(Error::invalid(format!(
            "index covers {} points but the cloud has {n}",
            index.point_count()
        )));
    }
    if index.k() < 3 {
        return Err(Error::invalid(format!("normal estimation needs k >= 3, got {}", index.k())));
    }
    if let Some(o) = view_origins {
        if o.len() != n {
            return Err(Error::invalid(format!("{} view origins for {n} points", o.len())));
        }
        if o.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::invalid("view origins must be finite"));
        }
    }
    let results: Vec<([f32; 3], bool)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = points.point(i);
            let (normal, degenerate) = pca_normal(p, index.neighbors(i).iter().map(|&j| points.point(j as usize)));
            let normal = match view_origins {
                Some(origins) => orient_towards(normal, p, origins[i]),
                None => orient_max_component(normal),
            };
            (to_f32_unit(normal), degenerate)
        })
        .collect();
    let (normals, degenerate) = results.into_iter().unzip();
    Ok(NormalField { normals, degenerate })
}

/// Smallest-eigenvalue eigenvector of the neighborhood covariance.
fn pca_normal(center: [f32; 3], neighbors: impl Iterator<Item = [f32; 3]>) -> (Vector3<f64>, bool) {
    // Work relative to the query point so coincident neighborhoods are exactly zero.
    let local = |q: [f32; 3]| {
        Vector3::new(
            q[0] as f64 - center[0] as f64,
            q[1] as f64 - center[1] as f64,
            q[2] as f64 - center[2] as f64,
        )
    };
    let pts: Vec<Vector3<f64>> = std::iter::once(Vector3::zeros()).chain(neighbors.map(local)).collect();
    let mean = pts.iter().sum::<Vector3<f64>>() / pts.len() as f64;
    let mut cov = Matrix3::<f64>::zeros();
    for p in &pts {
        let d = p - mean;
        cov += d * d.transpose();
    }
    cov /= pts.len() as f64;
    if cov.trace() <= 1e-30 {
        let [x, y, z] = FALLBACK_NORMAL;
        return (Vector3::new(x as f64, y as f64, z as f64), true);
    }
    let eig = SymmetricEigen::new(cov);
    let smallest = (0..3)
        .min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
        .unwrap();
    (eig.eigenvectors.column(smallest).normalize(), false)
}

fn orient_max_component(n: Vector3<f64>) -> Vector3<f64> {
    let mut axis = 0;
    for a in 1..3 {
        if n[a].abs() > n[axis].abs() {
            axis = a;
        }
    }
    if n[axis] < 0.0 {
        -n
    } else {
        n
    }
}

fn orient_towards(n: Vector3<f64>, p: [f32; 3], origin: [f32; 3]) -> Vector3<f64> {
    let dir = Vector3::new(
        origin[0] as f64 - p[0] as f64,
        origin[1] as f64 - p[1] as f64,
        origin[2] as f64 - p[2] as f64,
    );
    let d = n.dot(&dir);
    if d < 0.0 {
        -n
    } else if d == 0.0 {
        orient_max_component(n)
    } else {
        n
    }
}

fn to_f32_unit(n: Vector3<f64>) -> [f32; 3] {
    let n = n.normalize();
    [n.x as f32, n.y as f32, n.z as f32]
}
