//! Exact nearest-neighbour search over a point cloud. Approximate answers
//! are not acceptable here: the cloud oracle is the one with err_bound 0.

use crate::geom::Vector;

pub struct KdTree {
    points: Vec<Vector>,
    nodes: Vec<Node>,
    root: usize,
    dim: usize,
}

struct Node {
    point: usize,
    axis: usize,
    left: Option<usize>,
    right: Option<usize>,
}

impl KdTree {
    pub fn new(points: Vec<Vector>) -> Self {
        assert!(!points.is_empty(), "empty cloud");
        let dim = points[0].len();
        let mut idx: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let root = build(&points, &mut idx[..], 0, dim, &mut nodes);
        KdTree { points, nodes, root, dim }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    /// Exact nearest neighbour: (index, distance).
    pub fn nearest(&self, q: &Vector) -> (usize, f64) {
        debug_assert_eq!(q.len(), self.dim);
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(self.root, q, &mut best);
        (best.0, best.1.sqrt())
    }

    /// Indices of all points with ‖p − q‖ ≤ r.
    pub fn within(&self, q: &Vector, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.range(self.root, q, r * r, &mut out);
        out
    }

    fn search(&self, node: usize, q: &Vector, best: &mut (usize, f64)) {
        let n = &self.nodes[node];
        let p = &self.points[n.point];
        let d2 = (p - q).norm_squared();
        if d2 < best.1 {
            *best = (n.point, d2);
        }
        let delta = q[n.axis] - p[n.axis];
        let (near, far) = if delta < 0.0 { (n.left, n.right) } else { (n.right, n.left) };
        if let Some(c) = near {
            self.search(c, q, best);
        }
        if let Some(c) = far {
            if delta * delta < best.1 {
                self.search(c, q, best);
            }
        }
    }

    fn range(&self, node: usize, q: &Vector, r2: f64, out: &mut Vec<usize>) {
        let n = &self.nodes[node];
        let p = &self.points[n.point];
        if (p - q).norm_squared() <= r2 {
            out.push(n.point);
        }
        let delta = q[n.axis] - p[n.axis];
        let (near, far) = if delta < 0.0 { (n.left, n.right) } else { (n.right, n.left) };
        if let Some(c) = near {
            self.range(c, q, r2, out);
        }
        if let Some(c) = far {
            if delta * delta <= r2 {
                self.range(c, q, r2, out);
            }
        }
    }
}

fn build(points: &[Vector], idx: &mut [usize], depth: usize, dim: usize, nodes: &mut Vec<Node>) -> usize {
    let axis = depth % dim;
    idx.sort_by(|&a, &b| points[a][axis].partial_cmp(&points[b][axis]).unwrap());
    let mid = idx.len() / 2;
    let point = idx[mid];
    let me = nodes.len();
    nodes.push(Node { point, axis, left: None, right: None });
    // Children are built after the placeholder so indices stay stable.
    let (lo, hi) = idx.split_at_mut(mid);
    let hi = &mut hi[1..];
    let left = if lo.is_empty() { None } else { Some(build(points, lo, depth + 1, dim, nodes)) };
    let right = if hi.is_empty() { None } else { Some(build(points, hi, depth + 1, dim, nodes)) };
    nodes[me].left = left;
    nodes[me].right = right;
    me
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn nearest_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Vector> = (0..300)
            .map(|_| Vector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0)))
            .collect();
        let tree = KdTree::new(pts.clone());
        for _ in 0..100 {
            let q = Vector::from_fn(3, |_, _| rng.gen_range(-1.5..1.5));
            let (bi, bd) = pts
                .iter()
                .enumerate()
                .map(|(i, p)| (i, (p - &q).norm()))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            let (ti, td) = tree.nearest(&q);
            assert!((bd - td).abs() < 1e-12);
            assert!(ti == bi || ((&pts[ti] - &q).norm() - bd).abs() < 1e-12);
        }
    }

    #[test]
    fn range_query_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Vector> = (0..200)
            .map(|_| Vector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0)))
            .collect();
        let tree = KdTree::new(pts.clone());
        let q = Vector::from_vec(vec![0.1, -0.2]);
        let mut got = tree.within(&q, 0.5);
        got.sort_unstable();
        let mut want: Vec<usize> = pts
            .iter()
            .enumerate()
            .filter(|(_, p)| (*p - &q).norm() <= 0.5)
            .map(|(i, _)| i)
            .collect();
        want.sort_unstable();
        assert_eq!(got, want);
    }
}
