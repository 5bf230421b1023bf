use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Vec3;
use crate::error::{GraspError, Result};

pub const KMEANS_MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centers: Vec<Vec3>,
    /// Cluster index of every input point.
    pub assignment: Vec<usize>,
    /// Sum of squared distances to the assigned center, recorded after each
    /// assignment step.
    pub objective_history: Vec<f64>,
}

fn closest(centers: &[Vec3], p: &Vec3) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = (p - c).norm_squared();
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Lloyd's algorithm with k-means++ seeding.
pub fn kmeans(points: &[Vec3], k: usize, seed: u64) -> Result<KMeansResult> {
    if points.is_empty() {
        return Err(GraspError::EmptyCloud);
    }
    if k == 0 || k > points.len() {
        return Err(GraspError::TooManyClusters { k, points: points.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut centers = Vec::with_capacity(k);
    let mut chosen = vec![false; points.len()];
    let first = rng.random_range(0..points.len());
    centers.push(points[first]);
    chosen[first] = true;
    let mut d2: Vec<f64> = points.iter().map(|p| (p - points[first]).norm_squared()).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random_range(0.0..total);
            let mut pick = None;
            for (i, d) in d2.iter().enumerate() {
                if *d > 0.0 && u < *d {
                    pick = Some(i);
                    break;
                }
                u -= d;
            }
            pick.unwrap_or_else(|| d2.iter().rposition(|d| *d > 0.0).unwrap_or(0))
        } else {
            // duplicates only: take unchosen points in order
            chosen.iter().position(|c| !c).unwrap_or(0)
        };
        chosen[next] = true;
        centers.push(points[next]);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min((p - points[next]).norm_squared());
        }
    }

    let mut assignment = vec![0; points.len()];
    let mut history = Vec::new();
    for _ in 0..KMEANS_MAX_ITERATIONS {
        let mut changed = history.is_empty();
        let mut objective = 0.0;
        for (a, p) in assignment.iter_mut().zip(points) {
            let (j, d) = closest(&centers, p);
            if *a != j {
                *a = j;
                changed = true;
            }
            objective += d;
        }
        history.push(objective);
        if !changed {
            break;
        }
        let mut sums = vec![Vec3::zeros(); k];
        let mut counts = vec![0usize; k];
        for (a, p) in assignment.iter().zip(points) {
            sums[*a] += p;
            counts[*a] += 1;
        }
        for j in 0..k {
            // an emptied cluster keeps its previous center
            if counts[j] > 0 {
                centers[j] = sums[j] / counts[j] as f64;
            }
        }
    }
    Ok(KMeansResult {
        centers,
        assignment,
        objective_history: history,
    })
}
