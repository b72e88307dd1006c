use nalgebra::{Rotation3, Vector3};
use ovseg3r_core::geometry::{build_knn_index, estimate_normals, KdTree};
use ovseg3r_core::model::PointCloud;
use ovseg3r_core::synth::shapes::{plane_points, sphere_points};
use proptest::prelude::*;

/// Unsigned angle between two lines, in degrees.
fn angle_deg(a: [f32; 3], b: [f64; 3]) -> f64 {
    let a = Vector3::new(a[0] as f64, a[1] as f64, a[2] as f64);
    let b = Vector3::new(b[0], b[1], b[2]);
    // atan2 stays accurate near zero where acos of the dot product does not.
    let angle = a.cross(&b).norm().atan2(a.dot(&b));
    angle.min(std::f64::consts::PI - angle).to_degrees()
}

fn brute_knn(points: &[[f32; 3]], i: usize, k: usize) -> Vec<u32> {
    let d = |a: [f32; 3], b: [f32; 3]| (0..3).map(|c| (a[c] as f64 - b[c] as f64).powi(2)).sum::<f64>();
    let mut all: Vec<(f64, u32)> = (0..points.len())
        .filter(|&j| j != i)
        .map(|j| (d(points[i], points[j]), j as u32))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.into_iter().take(k).map(|(_, j)| j).collect()
}

#[test]
fn tilted_planes_are_exact() {
    let normals = [[0.0, 0.0, 1.0], [1.0, 1.0, 1.0], [0.3, -0.8, 0.2], [1.0, 0.0, 0.0], [-2.0, 0.5, 3.0]];
    for (s, n) in normals.iter().enumerate() {
        let cloud = plane_points(*n, [0.5, -1.0, 2.0], 2.0, 3000, s as u64).unwrap();
        let index = build_knn_index(&cloud, 16).unwrap();
        let field = estimate_normals(&cloud, &index, None).unwrap();
        let worst = field.normals().iter().map(|&m| angle_deg(m, *n)).fold(0.0, f64::max);
        assert!(worst < 0.01, "plane {n:?}: worst angular error {worst} deg");
    }
}

#[test]
fn noisy_sphere_normals() {
    let cloud = sphere_points(2000, 1.0, 0.005, 9).unwrap();
    let index = build_knn_index(&cloud, 16).unwrap();
    let field = estimate_normals(&cloud, &index, None).unwrap();
    let good = cloud
        .positions()
        .iter()
        .zip(field.normals())
        .filter(|(p, &n)| angle_deg(n, [p[0] as f64, p[1] as f64, p[2] as f64]) < 5.0)
        .count();
    assert!(good as f64 >= 0.99 * 2000.0, "only {good} of 2000 normals within 5 deg");
}

#[test]
fn origins_orient_normals() {
    let cloud = sphere_points(500, 1.0, 0.0, 2).unwrap();
    let index = build_knn_index(&cloud, 12).unwrap();
    let origins = vec![[0.0f32; 3]; cloud.len()];
    let field = estimate_normals(&cloud, &index, Some(&origins)).unwrap();
    for (p, n) in cloud.positions().iter().zip(field.normals()) {
        let radial = p[0] * n[0] + p[1] * n[1] + p[2] * n[2];
        assert!(radial < 0.0, "normal at {p:?} faces away from the center");
    }
}

#[test]
fn normals_are_deterministic() {
    let cloud = sphere_points(3000, 2.0, 0.01, 5).unwrap();
    let index = build_knn_index(&cloud, 16).unwrap();
    let a = estimate_normals(&cloud, &index, None).unwrap();
    let b = estimate_normals(&cloud, &build_knn_index(&cloud, 16).unwrap(), None).unwrap();
    assert_eq!(a, b);
}

fn cap(seed: u64, n: usize) -> PointCloud {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let pts = (0..n)
        .map(|_| {
            let x: f32 = rng.random_range(-1.0..1.0);
            let y: f32 = rng.random_range(-1.0..1.0);
            [x, y, 0.3 * x * x - 0.2 * y * y + 0.1 * x * y]
        })
        .collect();
    PointCloud::new(pts).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn knn_matches_brute_force(seed in any::<u64>(), n in 2usize..300, k in 1usize..20, grid in any::<bool>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<[f32; 3]> = (0..n)
            .map(|_| {
                if grid {
                    [0, 1, 2].map(|_| rng.random_range(0..4) as f32 * 0.25)
                } else {
                    [0, 1, 2].map(|_| rng.random_range(-1.0f32..1.0))
                }
            })
            .collect();
        let cloud = PointCloud::new(pts.clone()).unwrap();
        let k = k.min(n - 1);
        let index = build_knn_index(&cloud, k).unwrap();
        for i in 0..n {
            prop_assert_eq!(index.neighbors(i).to_vec(), brute_knn(&pts, i, k));
        }
        let tree = KdTree::build(&cloud);
        let q = [0.1f32, -0.2, 0.3];
        let got: Vec<u32> = tree.nearest(q, k, None).into_iter().map(|(j, _)| j).collect();
        let mut with_q = pts.clone();
        with_q.push(q);
        prop_assert_eq!(got, brute_knn(&with_q, n, k));
    }

    #[test]
    fn rotation_rotates_normals(seed in 0u64..1000, ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in -1.0f64..1.0, angle in 0.1f64..3.0) {
        let axis = Vector3::new(ax, ay, az);
        prop_assume!(axis.norm() > 0.1);
        let rot = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        let cloud = cap(seed, 600);
        let turned = PointCloud::new(
            cloud
                .positions()
                .iter()
                .map(|p| {
                    let v = rot * Vector3::new(p[0] as f64, p[1] as f64, p[2] as f64);
                    [v.x as f32, v.y as f32, v.z as f32]
                })
                .collect(),
        )
        .unwrap();
        let a = estimate_normals(&cloud, &build_knn_index(&cloud, 16).unwrap(), None).unwrap();
        let b = estimate_normals(&turned, &build_knn_index(&turned, 16).unwrap(), None).unwrap();
        let mut checked = 0;
        for (na, nb) in a.normals().iter().zip(b.normals()) {
            let r = rot * Vector3::new(na[0] as f64, na[1] as f64, na[2] as f64);
            let nb = Vector3::new(nb[0] as f64, nb[1] as f64, nb[2] as f64);
            let diff = (r - nb).amax().min((r + nb).amax());
            prop_assert!(diff < 1e-4, "rotated normal off by {}", diff);
            checked += 1;
        }
        prop_assert_eq!(checked, 600);
    }
}
