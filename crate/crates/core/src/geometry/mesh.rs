use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{mean, SurfacePointCloud, Vec3};
use crate::error::{GraspError, Result};

pub type Triangle = [Vec3; 3];

/// Indexed triangle mesh.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn triangles(&self) -> Vec<Triangle> {
        self.faces
            .iter()
            .map(|f| [self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]])
            .collect()
    }

    pub fn translated(mut self, d: Vec3) -> Self {
        for v in &mut self.vertices {
            *v += d;
        }
        self
    }
}

const DEGENERATE_AREA: f64 = 1e-18;

/// Area-weighted uniform surface sampling.
///
/// Normals come from the triangle winding. The whole mesh is flipped when most
/// of its area faces toward the vertex centroid, so a consistently wound mesh
/// ends up with outward normals regardless of its winding convention.
pub fn sample_mesh(triangles: &[Triangle], n: usize, seed: u64) -> Result<SurfacePointCloud> {
    if n == 0 {
        return Err(GraspError::EmptyCloud);
    }
    let mut areas = Vec::with_capacity(triangles.len());
    let mut normals = Vec::with_capacity(triangles.len());
    for t in triangles {
        let c = (t[1] - t[0]).cross(&(t[2] - t[0]));
        let a = 0.5 * c.norm();
        if a > DEGENERATE_AREA && a.is_finite() {
            areas.push(a);
            normals.push(c / (2.0 * a));
        } else {
            areas.push(0.0);
            normals.push(Vec3::zeros());
        }
    }
    let total: f64 = areas.iter().sum();
    if !(total > 0.0) {
        return Err(GraspError::DegenerateMesh);
    }

    let corners: Vec<Vec3> = triangles.iter().flat_map(|t| t.iter().copied()).collect();
    let centroid = mean(&corners).unwrap_or_else(Vec3::zeros);
    let mut vote = 0.0;
    for ((t, a), nrm) in triangles.iter().zip(&areas).zip(&normals) {
        let tc = (t[0] + t[1] + t[2]) / 3.0;
        vote += a * (tc - centroid).dot(nrm).signum();
    }
    let flip = if vote < 0.0 { -1.0 } else { 1.0 };

    let mut cumulative = Vec::with_capacity(areas.len());
    let mut acc = 0.0;
    for a in &areas {
        acc += a;
        cumulative.push(acc);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut out_normals = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random_range(0.0..total);
        let mut k = cumulative.partition_point(|&c| c <= u).min(areas.len() - 1);
        while areas[k] == 0.0 {
            k = k.saturating_sub(1);
        }
        let t = &triangles[k];
        let r1: f64 = rng.random::<f64>().sqrt();
        let r2: f64 = rng.random();
        let p = t[0] * (1.0 - r1) + t[1] * (r1 * (1.0 - r2)) + t[2] * (r1 * r2);
        points.push(p);
        out_normals.push(normals[k] * flip);
    }
    SurfacePointCloud::new(points, out_normals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    #[test]
    fn cube_faces_get_even_counts() {
        let mesh = shapes::cuboid(Vec3::new(1.0, 1.0, 1.0));
        let cloud = sample_mesh(&mesh.triangles(), 600, 9).unwrap();
        let mut counts = [0usize; 6];
        for (p, n) in cloud.points().iter().zip(cloud.normals()) {
            let k = n.iamax();
            let face = 2 * k + usize::from(n[k] > 0.0);
            counts[face] += 1;
            // outward: normal points along the face position
            assert!(p[k] * n[k] > 0.0);
        }
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - 100.0).powi(2) / 100.0).sum();
        // 5 dof, p = 0.001
        assert!(chi2 < 20.5, "chi2 {chi2} counts {counts:?}");
        assert!(counts.iter().all(|&c| (70..=130).contains(&c)), "{counts:?}");
    }

    #[test]
    fn single_triangle() {
        let t = [Vec3::zeros(), Vec3::x(), Vec3::y()];
        let cloud = sample_mesh(&[t], 1, 0).unwrap();
        let p = cloud.points()[0];
        assert!(p.x >= 0.0 && p.y >= 0.0 && p.x + p.y <= 1.0 && p.z == 0.0);
        assert!((cloud.normals()[0].abs() - Vec3::z()).norm() < 1e-12);
    }

    #[test]
    fn deterministic_for_seed() {
        let mesh = shapes::uv_sphere(0.05, 12, 24);
        let a = sample_mesh(&mesh.triangles(), 300, 4).unwrap();
        let b = sample_mesh(&mesh.triangles(), 300, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_mesh_is_rejected() {
        let t = [Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0];
        assert!(matches!(sample_mesh(&[t, t], 10, 0), Err(GraspError::DegenerateMesh)));
    }

    #[test]
    fn inward_wound_mesh_is_flipped() {
        let mut mesh = shapes::uv_sphere(1.0, 8, 16);
        for f in &mut mesh.faces {
            f.swap(1, 2);
        }
        let cloud = sample_mesh(&mesh.triangles(), 200, 1).unwrap();
        for (p, n) in cloud.points().iter().zip(cloud.normals()) {
            assert!(p.dot(n) > 0.0);
        }
    }
}
