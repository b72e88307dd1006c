//! Exact k-nearest-neighbor search over a static k-d tree.
//!
//! Distances are squared Euclidean, computed in `f64` from the `f32`
//! coordinates in x, y, z order. Ties are broken by ascending point index,
//! so results equal a brute-force scan sorted by `(distance, index)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::PointCloud;

const LEAF_SIZE: usize = 16;

#[derive(Clone, Debug)]
enum Node {
    Leaf { start: u32, end: u32 },
    Split { axis: u8, value: f32, left: u32, right: u32 },
}

#[derive(Clone, Debug)]
pub struct KdTree {
    points: Vec<[f32; 3]>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

#[inline]
pub(crate) fn dist_sq(a: [f32; 3], b: [f32; 3]) -> f64 {
    let dx = a[0] as f64 - b[0] as f64;
    let dy = a[1] as f64 - b[1] as f64;
    let dz = a[2] as f64 - b[2] as f64;
    dx * dx + dy * dy + dz * dz
}

/// Bounded best-k list ordered by `(distance, index)`.
struct Best {
    k: usize,
    items: Vec<(f64, u32)>,
}

impl Best {
    fn new(k: usize) -> Self {
        Self { k, items: Vec::with_capacity(k + 1) }
    }

    #[inline]
    fn bound(&self) -> f64 {
        if self.items.len() < self.k {
            f64::INFINITY
        } else {
            self.items[self.k - 1].0
        }
    }

    #[inline]
    fn offer(&mut self, d: f64, idx: u32) {
        if self.items.len() == self.k {
            let (wd, wi) = self.items[self.k - 1];
            if (d, idx) >= (wd, wi) {
                return;
            }
            self.items.pop();
        }
        let at = self.items.partition_point(|&(od, oi)| (od, oi) < (d, idx));
        self.items.insert(at, (d, idx));
    }
}

impl KdTree {
    pub fn build(cloud: &PointCloud) -> Self {
        let points = cloud.positions().to_vec();
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1);
        build_rec(&points, &mut order, 0, &mut nodes);
        Self { points, order, nodes }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The `k` points nearest to `query`, optionally excluding one index,
    /// as `(index, squared distance)` in ascending `(distance, index)` order.
    pub fn nearest(&self, query: [f32; 3], k: usize, exclude: Option<u32>) -> Vec<(u32, f64)> {
        if k == 0 {
            return Vec::new();
        }
        let mut best = Best::new(k);
        self.search(0, query, exclude, &mut best);
        best.items.into_iter().map(|(d, i)| (i, d)).collect()
    }

    fn search(&self, node: u32, q: [f32; 3], exclude: Option<u32>, best: &mut Best) {
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &idx in &self.order[start as usize..end as usize] {
                    if Some(idx) == exclude {
                        continue;
                    }
                    best.offer(dist_sq(q, self.points[idx as usize]), idx);
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis as usize] as f64 - value as f64;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, exclude, best);
                // Equal-distance candidates on the far side may still win on index.
                if diff * diff <= best.bound() {
                    self.search(far, q, exclude, best);
                }
            }
        }
    }
}

fn build_rec(points: &[[f32; 3]], order: &mut [u32], base: u32, nodes: &mut Vec<Node>) -> u32 {
    let id = nodes.len() as u32;
    if order.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf { start: base, end: base + order.len() as u32 });
        return id;
    }
    let mut lo = [f32::INFINITY; 3];
    let mut hi = [f32::NEG_INFINITY; 3];
    for &i in order.iter() {
        let p = points[i as usize];
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])).then(b.cmp(&a)))
        .unwrap();
    if hi[axis] <= lo[axis] {
        // All remaining points coincide; no split can separate them.
        nodes.push(Node::Leaf { start: base, end: base + order.len() as u32 });
        return id;
    }
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][axis].total_cmp(&points[b as usize][axis]).then(a.cmp(&b))
    });
    let value = points[order[mid] as usize][axis];
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (l, r) = order.split_at_mut(mid);
    let left = build_rec(points, l, base, nodes);
    let right = build_rec(points, r, base + mid as u32, nodes);
    nodes[id as usize] = Node::Split { axis: axis as u8, value, left, right };
    id
}

/// Precomputed k-nearest-neighbor table for every point of a cloud.
#[derive(Clone, Debug)]
pub struct KnnIndex {
    k: usize,
    neighbors: Vec<u32>,
}

impl KnnIndex {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn point_count(&self) -> usize {
        self.neighbors.len() / self.k.max(1)
    }

    /// Neighbors of point `i`, nearest first, excluding `i` itself.
    #[inline]
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.neighbors[i * self.k..(i + 1) * self.k]
    }
}

/// Builds the exact k-NN table. Requires `1 <= k < N`.
pub fn build_knn_index(points: &PointCloud, k: usize) -> Result<KnnIndex> {
    let n = points.len();
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if k >= n {
        return Err(Error::invalid(format!("k too large: k = {k} but the cloud has {n} points")));
    }
    let tree = KdTree::build(points);
    let mut neighbors = vec![0u32; n * k];
    neighbors.par_chunks_mut(k).enumerate().for_each(|(i, out)| {
        let found = tree.nearest(points.point(i), k, Some(i as u32));
        for (slot, (idx, _)) in out.iter_mut().zip(found) {
            *slot = idx;
        }
    });
    Ok(KnnIndex { k, neighbors })
}
