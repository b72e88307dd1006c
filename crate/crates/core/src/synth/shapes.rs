//! Analytic point sets with known normals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};

use crate::error::{Error, Result};
use crate::model::PointCloud;

fn unit(v: [f64; 3]) -> Result<[f64; 3]> {
    let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if !(len.is_finite() && len > 0.0) {
        return Err(Error::invalid("plane normal must be a finite nonzero vector"));
    }
    Ok([v[0] / len, v[1] / len, v[2] / len])
}

/// `n` points on the plane through `center` with normal `normal`, uniform
/// on a `size x size` square.
pub fn plane_points(normal: [f64; 3], center: [f64; 3], size: f64, n: usize, seed: u64) -> Result<PointCloud> {
    let nrm = unit(normal)?;
    // Any vector not parallel to the normal seeds the in-plane basis.
    let seed_axis = if nrm[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let cross = |a: [f64; 3], b: [f64; 3]| [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    let u = unit(cross(nrm, seed_axis))?;
    let v = cross(nrm, u);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions = (0..n)
        .map(|_| {
            let a = rng.random_range(-0.5..0.5) * size;
            let b = rng.random_range(-0.5..0.5) * size;
            [0, 1, 2].map(|d| (center[d] + a * u[d] + b * v[d]) as f32)
        })
        .collect();
    PointCloud::new(positions)
}

/// `n` points on a sphere of `radius` around the origin, each displaced
/// radially by Gaussian noise of standard deviation `noise`.
pub fn sphere_points(n: usize, radius: f64, noise: f64, seed: u64) -> Result<PointCloud> {
    if !(noise.is_finite() && noise >= 0.0) || !(radius.is_finite() && radius > 0.0) {
        return Err(Error::invalid("sphere radius must be positive and noise non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, noise).map_err(|e| Error::invalid(e.to_string()))?;
    let positions = (0..n)
        .map(|_| {
            let d: [f64; 3] = UnitSphere.sample(&mut rng);
            let r = radius + jitter.sample(&mut rng);
            d.map(|c| (c * r) as f32)
        })
        .collect();
    PointCloud::new(positions)
}
