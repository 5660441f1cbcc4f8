//! Exact nearest-neighbor queries over static 3D point sets.
//!
//! A small median-split kd-tree. Queries are exact (no approximation) and
//! deterministic: ties in distance are broken by the smaller point index, so
//! results never depend on build order or thread count.

use nalgebra::Point3;

#[derive(Debug, Clone)]
struct Node {
    /// Index into `points` of the point stored at this node.
    point: usize,
    axis: usize,
    left: Option<usize>,
    right: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct KdTree3 {
    points: Vec<Point3<f64>>,
    nodes: Vec<Node>,
    root: Option<usize>,
}

fn dist2(a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    (a - b).norm_squared()
}

impl KdTree3 {
    pub fn build(points: &[Point3<f64>]) -> KdTree3 {
        let mut idx: Vec<usize> = (0..points.len()).collect();
        let mut tree = KdTree3 {
            points: points.to_vec(),
            nodes: Vec::with_capacity(points.len()),
            root: None,
        };
        tree.root = tree.build_rec(&mut idx, 0);
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build_rec(&mut self, idx: &mut [usize], depth: usize) -> Option<usize> {
        if idx.is_empty() {
            return None;
        }
        let axis = depth % 3;
        let mid = idx.len() / 2;
        // order by (coordinate, index) so the split is fully deterministic
        idx.select_nth_unstable_by(mid, |&a, &b| {
            self.points[a][axis]
                .partial_cmp(&self.points[b][axis])
                .unwrap()
                .then(a.cmp(&b))
        });
        let point = idx[mid];
        let node_id = self.nodes.len();
        self.nodes.push(Node {
            point,
            axis,
            left: None,
            right: None,
        });
        let (lo, rest) = idx.split_at_mut(mid);
        let hi = &mut rest[1..];
        let left = self.build_rec(lo, depth + 1);
        let right = self.build_rec(hi, depth + 1);
        self.nodes[node_id].left = left;
        self.nodes[node_id].right = right;
        Some(node_id)
    }

    /// Index and squared distance of the nearest point to `q`.
    pub fn nearest(&self, q: &Point3<f64>) -> Option<(usize, f64)> {
        let root = self.root?;
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_rec(root, q, &mut best);
        Some(best)
    }

    fn nearest_rec(&self, node_id: usize, q: &Point3<f64>, best: &mut (usize, f64)) {
        let node = &self.nodes[node_id];
        let d2 = dist2(&self.points[node.point], q);
        if d2 < best.1 || (d2 == best.1 && node.point < best.0) {
            *best = (node.point, d2);
        }
        let delta = q[node.axis] - self.points[node.point][node.axis];
        let (near, far) = if delta < 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        if let Some(n) = near {
            self.nearest_rec(n, q, best);
        }
        if let Some(f) = far {
            if delta * delta <= best.1 {
                self.nearest_rec(f, q, best);
            }
        }
    }

    /// The `k` nearest points to `q`, sorted by (distance, index).
    /// `exclude` is omitted from the result (useful for self-queries).
    pub fn k_nearest(&self, q: &Point3<f64>, k: usize, exclude: Option<usize>) -> Vec<(usize, f64)> {
        let mut heap: Vec<(f64, usize)> = Vec::with_capacity(k + 1); // max-heap by (d2, idx)
        if let Some(root) = self.root {
            self.k_nearest_rec(root, q, k, exclude, &mut heap);
        }
        let mut out: Vec<(usize, f64)> = heap.into_iter().map(|(d, i)| (i, d)).collect();
        out.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        out
    }

    fn k_nearest_rec(
        &self,
        node_id: usize,
        q: &Point3<f64>,
        k: usize,
        exclude: Option<usize>,
        heap: &mut Vec<(f64, usize)>,
    ) {
        let node = &self.nodes[node_id];
        if Some(node.point) != exclude {
            let d2 = dist2(&self.points[node.point], q);
            let entry = (d2, node.point);
            if heap.len() < k {
                heap.push(entry);
                heap.sort_by(|a, b| b.partial_cmp(a).unwrap()); // worst first
            } else if entry < heap[0] {
                heap[0] = entry;
                heap.sort_by(|a, b| b.partial_cmp(a).unwrap());
            }
        }
        let delta = q[node.axis] - self.points[node.point][node.axis];
        let (near, far) = if delta < 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        if let Some(n) = near {
            self.k_nearest_rec(n, q, k, exclude, heap);
        }
        let worst = if heap.len() < k {
            f64::INFINITY
        } else {
            heap[0].0
        };
        if let Some(f) = far {
            if delta * delta <= worst {
                self.k_nearest_rec(f, q, k, exclude, heap);
            }
        }
    }

    /// All points within `radius` of `q`, sorted by (distance, index).
    pub fn within(&self, q: &Point3<f64>, radius: f64) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        if let Some(root) = self.root {
            self.within_rec(root, q, radius * radius, &mut out);
        }
        out.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        out
    }

    fn within_rec(&self, node_id: usize, q: &Point3<f64>, r2: f64, out: &mut Vec<(usize, f64)>) {
        let node = &self.nodes[node_id];
        let d2 = dist2(&self.points[node.point], q);
        if d2 <= r2 {
            out.push((node.point, d2));
        }
        let delta = q[node.axis] - self.points[node.point][node.axis];
        if delta < 0.0 || delta * delta <= r2 {
            if let Some(l) = node.left {
                self.within_rec(l, q, r2, out);
            }
        }
        if delta >= 0.0 || delta * delta <= r2 {
            if let Some(r) = node.right {
                self.within_rec(r, q, r2, out);
            }
        }
    }
}

/// Brute-force nearest neighbor; the oracle the kd-tree is tested against.
pub fn brute_force_nearest(points: &[Point3<f64>], q: &Point3<f64>) -> Option<(usize, f64)> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| (i, dist2(p, q)))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)))
}
