/// Disjoint-set forest with union by size, path halving and one merge
/// threshold per component (meaningful at roots only).
#[derive(Clone, Debug)]
pub struct DisjointForest {
    parent: Vec<u32>,
    size: Vec<u32>,
    threshold: Vec<f64>,
}

impl DisjointForest {
    pub fn new(n: usize, initial_threshold: f64) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
            threshold: vec![initial_threshold; n],
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    #[inline]
    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            let grand = self.parent[self.parent[x] as usize];
            self.parent[x] = grand;
            x = grand as usize;
        }
        x
    }

    /// Links two distinct roots and returns the surviving root.
    pub fn union_roots(&mut self, a: usize, b: usize) -> usize {
        debug_assert!(a != b && self.parent[a] as usize == a && self.parent[b] as usize == b);
        let (big, small) = if (self.size[a], b) > (self.size[b], a) { (a, b) } else { (b, a) };
        self.parent[small] = big as u32;
        self.size[big] += self.size[small];
        big
    }

    #[inline]
    pub fn size(&self, root: usize) -> usize {
        self.size[root] as usize
    }

    #[inline]
    pub fn threshold(&self, root: usize) -> f64 {
        self.threshold[root]
    }

    #[inline]
    pub fn set_threshold(&mut self, root: usize, t: f64) {
        self.threshold[root] = t;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_track_components() {
        let mut f = DisjointForest::new(6, 0.5);
        let r = f.union_roots(0, 1);
        assert_eq!(f.size(r), 2);
        let (a, b) = (f.find(2), f.find(3));
        let r2 = f.union_roots(a, b);
        let r3 = f.union_roots(r, r2);
        assert_eq!(f.size(r3), 4);
        for x in 0..4 {
            assert_eq!(f.find(x), r3);
        }
        assert_eq!(f.find(5), 5);
        assert_eq!(f.threshold(5), 0.5);
    }
}
