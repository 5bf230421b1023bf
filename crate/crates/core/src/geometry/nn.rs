//! Exact nearest-neighbor search over a static point set.

use std::cmp::Ordering;

use super::{SurfacePointCloud, Vec3};
use crate::error::{GraspError, Result};
use crate::exec::{self, Execution};

const LEAF_SIZE: usize = 8;

/// Result of a nearest-neighbor query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

/// kd-tree over a borrowed-by-copy point list. Ties are broken by the lowest
/// point index, so results match an exhaustive scan exactly.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec3>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[inline]
fn dist2(a: &Vec3, b: &Vec3) -> f64 {
    (a - b).norm_squared()
}

#[inline]
fn better(d: f64, i: usize, best_d: f64, best_i: usize) -> bool {
    d < best_d || (d == best_d && i < best_i)
}

impl KdTree {
    pub fn new(points: &[Vec3]) -> Result<Self> {
        if points.is_empty() {
            return Err(GraspError::EmptyCloud);
        }
        let mut tree = KdTree {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1),
        };
        tree.build(0, points.len());
        Ok(tree)
    }

    pub fn from_cloud(cloud: &SurfacePointCloud) -> Result<Self> {
        Self::new(cloud.points())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for &i in &self.order[start..end] {
            lo = lo.inf(&self.points[i]);
            hi = hi.sup(&self.points[i]);
        }
        let extent = hi - lo;
        let dim = extent.imax();
        if extent[dim] == 0.0 {
            // all points identical
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a][dim].partial_cmp(&points[b][dim]).unwrap_or(Ordering::Equal)
        });
        let value = self.points[self.order[mid]][dim];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split { dim, value, left, right };
        id
    }

    /// Closest point to `q`; lowest index wins ties.
    pub fn nearest(&self, q: &Vec3) -> Neighbor {
        let mut best = (f64::INFINITY, usize::MAX);
        self.search(0, q, &mut best);
        Neighbor {
            index: best.1,
            distance: best.0.sqrt(),
        }
    }

    fn search(&self, node: usize, q: &Vec3, best: &mut (f64, usize)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = dist2(q, &self.points[i]);
                    if better(d, i, best.0, best.1) {
                        *best = (d, i);
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = q[dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                // equality still visits: the far side may hold a tie with a lower index
                if diff * diff <= best.0 {
                    self.search(far, q, best);
                }
            }
        }
    }

    /// The `k` closest points sorted by (distance, index).
    pub fn k_nearest(&self, q: &Vec3, k: usize) -> Vec<Neighbor> {
        let k = k.min(self.points.len());
        let mut heap: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        if k > 0 {
            self.search_k(0, q, k, &mut heap);
        }
        heap.into_iter()
            .map(|(d, i)| Neighbor {
                index: i,
                distance: d.sqrt(),
            })
            .collect()
    }

    // `found` is kept sorted; k is small (normal estimation uses 15)
    fn search_k(&self, node: usize, q: &Vec3, k: usize, found: &mut Vec<(f64, usize)>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = dist2(q, &self.points[i]);
                    if found.len() == k {
                        let (wd, wi) = found[k - 1];
                        if !better(d, i, wd, wi) {
                            continue;
                        }
                        found.pop();
                    }
                    let pos = found.partition_point(|&(fd, fi)| better(fd, fi, d, i));
                    found.insert(pos, (d, i));
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = q[dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search_k(near, q, k, found);
                if found.len() < k || diff * diff <= found[k - 1].0 {
                    self.search_k(far, q, k, found);
                }
            }
        }
    }

    pub fn nearest_many(&self, queries: &[Vec3], exec: Execution) -> Vec<Neighbor> {
        exec::map_slice(exec, queries, |q| self.nearest(q))
    }
}

/// One-shot query: builds a tree over `cloud` and answers every query.
pub fn nearest_neighbors(cloud: &SurfacePointCloud, queries: &[Vec3]) -> Result<Vec<Neighbor>> {
    let tree = KdTree::from_cloud(cloud)?;
    Ok(tree.nearest_many(queries, Execution::Sequential))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(points: &[Vec3], q: &Vec3) -> Neighbor {
        let mut best = Neighbor {
            index: usize::MAX,
            distance: f64::INFINITY,
        };
        let mut best_d2 = f64::INFINITY;
        for (i, p) in points.iter().enumerate() {
            let d2 = (q - p).norm_squared();
            if d2 < best_d2 {
                best_d2 = d2;
                best = Neighbor {
                    index: i,
                    distance: d2.sqrt(),
                };
            }
        }
        best
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec3> {
        (0..n)
            .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn empty_cloud_is_an_error() {
        let err = KdTree::new(&[]).unwrap_err();
        assert_eq!(err.to_string(), "empty point cloud");
    }

    #[test]
    fn query_on_a_point_returns_it() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = random_points(&mut rng, 50);
        let tree = KdTree::new(&pts).unwrap();
        for (j, p) in pts.iter().enumerate() {
            assert_eq!(tree.nearest(p), Neighbor { index: j, distance: 0.0 });
        }
    }

    #[test]
    fn midpoint_comparison() {
        let cloud = SurfacePointCloud::new(vec![Vec3::zeros(), Vec3::x()], vec![Vec3::z(); 2]).unwrap();
        let nn = nearest_neighbors(&cloud, &[Vec3::new(0.6, 0.0, 0.0)]).unwrap();
        assert_eq!(nn[0].index, 1);
        assert!((nn[0].distance - 0.4).abs() < 1e-15);
    }

    #[test]
    fn matches_exhaustive_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let pts = random_points(&mut rng, 1000);
        let queries = random_points(&mut rng, 100);
        let tree = KdTree::new(&pts).unwrap();
        for q in &queries {
            assert_eq!(tree.nearest(q), brute(&pts, q));
        }
    }

    #[test]
    fn ties_prefer_lowest_index() {
        // duplicated points and a grid full of equidistant candidates
        let mut pts = Vec::new();
        for x in 0..6 {
            for y in 0..6 {
                pts.push(Vec3::new(x as f64, y as f64, 0.0));
            }
        }
        pts.extend(pts.clone());
        let tree = KdTree::new(&pts).unwrap();
        for x in 0..5 {
            for y in 0..5 {
                let q = Vec3::new(x as f64 + 0.5, y as f64 + 0.5, 0.0);
                assert_eq!(tree.nearest(&q), brute(&pts, &q));
            }
        }
    }

    #[test]
    fn k_nearest_matches_sorted_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts = random_points(&mut rng, 400);
        let tree = KdTree::new(&pts).unwrap();
        for q in random_points(&mut rng, 20) {
            let mut all: Vec<(f64, usize)> = pts.iter().enumerate().map(|(i, p)| ((q - p).norm_squared(), i)).collect();
            all.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let got: Vec<usize> = tree.k_nearest(&q, 15).iter().map(|n| n.index).collect();
            let want: Vec<usize> = all[..15].iter().map(|x| x.1).collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn parallel_batch_equals_sequential() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts = random_points(&mut rng, 2000);
        let qs = random_points(&mut rng, 700);
        let tree = KdTree::new(&pts).unwrap();
        assert_eq!(tree.nearest_many(&qs, Execution::Sequential), tree.nearest_many(&qs, Execution::Parallel));
    }
}
