//! Exact nearest-neighbour queries over 3D points.
//!
//! A median-split kd-tree with small leaves. Queries are exact (no
//! approximation budget), which the evaluation stage relies on, and
//! deterministic for a fixed input order.

use crate::geometry::Point3;

const LEAF_SIZE: usize = 16;

enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

pub struct KdTree3 {
    nodes: Vec<Node>,
    /// Indices into the original slice, permuted so each leaf owns a
    /// contiguous range.
    order: Vec<u32>,
    points: Vec<[f64; 3]>,
    root: usize,
}

impl KdTree3 {
    pub fn build(points: &[Point3]) -> Self {
        let pts: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        let mut order: Vec<u32> = (0..pts.len() as u32).collect();
        let mut tree = KdTree3 {
            nodes: Vec::new(),
            order: Vec::new(),
            points: pts,
            root: 0,
        };
        let n = order.len();
        tree.root = tree.build_node(&mut order, 0, n);
        tree.order = order;
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build_node(&mut self, order: &mut [u32], start: usize, end: usize) -> usize {
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return self.nodes.len() - 1;
        }
        // Split along the widest axis at the median.
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &order[start..end] {
            let p = self.points[i as usize];
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap();
        let mid = (start + end) / 2;
        let points = &self.points;
        order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a as usize][axis]
                .total_cmp(&points[b as usize][axis])
                .then(a.cmp(&b))
        });
        let value = self.points[order[mid] as usize][axis];
        let placeholder = self.nodes.len();
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(order, start, mid);
        let right = self.build_node(order, mid, end);
        self.nodes[placeholder] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        placeholder
    }

    /// Index and squared distance of the exact nearest neighbour.
    /// Panics on an empty tree.
    pub fn nearest(&self, query: &Point3) -> (usize, f64) {
        assert!(!self.is_empty(), "nearest() on an empty tree");
        let q = [query.x, query.y, query.z];
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_rec(self.root, &q, &mut best);
        best
    }

    fn nearest_rec(&self, node: usize, q: &[f64; 3], best: &mut (usize, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let i = i as usize;
                    let d2 = dist2(&self.points[i], q);
                    // Ties resolve to the lowest index, matching a linear scan.
                    if d2 < best.1 || (d2 == best.1 && i < best.0) {
                        *best = (i, d2);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let delta = q[axis] - value;
                let (near, far) = if delta < 0.0 { (left, right) } else { (right, left) };
                self.nearest_rec(near, q, best);
                if delta * delta <= best.1 {
                    self.nearest_rec(far, q, best);
                }
            }
        }
    }

    /// The `k` nearest neighbours, sorted by ascending distance (ties broken
    /// by index). Returns fewer when the tree is smaller than `k`.
    pub fn k_nearest(&self, query: &Point3, k: usize) -> Vec<(usize, f64)> {
        if k == 0 || self.is_empty() {
            return Vec::new();
        }
        let q = [query.x, query.y, query.z];
        let mut heap = BoundedHeap::new(k);
        self.k_nearest_rec(self.root, &q, &mut heap);
        heap.into_sorted()
    }

    fn k_nearest_rec(&self, node: usize, q: &[f64; 3], heap: &mut BoundedHeap) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    heap.push(i as usize, dist2(&self.points[i as usize], q));
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let delta = q[axis] - value;
                let (near, far) = if delta < 0.0 { (left, right) } else { (right, left) };
                self.k_nearest_rec(near, q, heap);
                if delta * delta <= heap.bound() {
                    self.k_nearest_rec(far, q, heap);
                }
            }
        }
    }
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Max-heap capped at `k` entries, ordered by (distance, index) so equal
/// distances resolve the same way regardless of traversal order.
struct BoundedHeap {
    k: usize,
    entries: Vec<(f64, usize)>,
}

impl BoundedHeap {
    fn new(k: usize) -> Self {
        BoundedHeap {
            k,
            entries: Vec::with_capacity(k + 1),
        }
    }

    fn bound(&self) -> f64 {
        if self.entries.len() < self.k {
            f64::INFINITY
        } else {
            self.entries[0].0
        }
    }

    fn push(&mut self, index: usize, d2: f64) {
        if self.entries.len() == self.k {
            let worst = self.entries[0];
            if (d2, index) >= (worst.0, worst.1) {
                return;
            }
            self.pop_root();
        }
        self.entries.push((d2, index));
        let mut i = self.entries.len() - 1;
        while i > 0 {
            let parent = (i - 1) / 2;
            if self.entries[parent] < self.entries[i] {
                self.entries.swap(parent, i);
                i = parent;
            } else {
                break;
            }
        }
    }

    fn pop_root(&mut self) {
        let last = self.entries.len() - 1;
        self.entries.swap(0, last);
        self.entries.pop();
        let mut i = 0;
        loop {
            let (l, r) = (2 * i + 1, 2 * i + 2);
            let mut largest = i;
            if l < self.entries.len() && self.entries[l] > self.entries[largest] {
                largest = l;
            }
            if r < self.entries.len() && self.entries[r] > self.entries[largest] {
                largest = r;
            }
            if largest == i {
                break;
            }
            self.entries.swap(i, largest);
            i = largest;
        }
    }

    fn into_sorted(self) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = self.entries.into_iter().map(|(d, i)| (i, d)).collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out
    }
}
