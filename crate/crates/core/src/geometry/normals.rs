use nalgebra::{Matrix3, SymmetricEigen};

use super::{mean, KdTree, Vec3};
use crate::error::{GraspError, Result};

pub const NORMAL_ESTIMATION_NEIGHBORS: usize = 15;

/// Normals for a raw cloud: plane fit over the 15 nearest points, flipped to
/// face away from the cloud centroid.
pub fn estimate_normals(points: &[Vec3]) -> Result<Vec<Vec3>> {
    let tree = KdTree::new(points)?;
    let centroid = mean(points).ok_or(GraspError::EmptyCloud)?;
    let normals = points
        .iter()
        .map(|p| {
            let nbrs = tree.k_nearest(p, NORMAL_ESTIMATION_NEIGHBORS);
            let local: Vec<Vec3> = nbrs.iter().map(|n| points[n.index]).collect();
            let c = mean(&local).unwrap_or(*p);
            let mut cov = Matrix3::zeros();
            for q in &local {
                let d = q - c;
                cov += d * d.transpose();
            }
            let eig = SymmetricEigen::new(cov);
            let mut n: Vec3 = eig.eigenvectors.column(eig.eigenvalues.imin()).into_owned();
            if n.norm() < 1e-12 || local.len() < 3 {
                n = p - centroid;
            }
            if n.norm() < 1e-12 {
                n = Vec3::z();
            }
            n = n.normalize();
            if n.dot(&(p - centroid)) < 0.0 {
                n = -n;
            }
            n
        })
        .collect();
    Ok(normals)
}
