//! Rigid-body math and point-cloud containers shared by the rest of the crate.

mod kmeans;
mod mesh;
mod nn;
mod normals;

pub use kmeans::{kmeans, KMeansResult, KMEANS_MAX_ITERATIONS};
pub use mesh::{sample_mesh, Triangle, TriangleMesh};
pub use nn::{nearest_neighbors, KdTree, Neighbor};
pub use normals::{estimate_normals, NORMAL_ESTIMATION_NEIGHBORS};

use nalgebra::{IsometryMatrix3, Matrix3, Rotation3, Translation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{GraspError, Result};

pub type Vec3 = Vector3<f64>;
pub type UnitVec3 = Unit<Vector3<f64>>;
pub type RotationMatrix = Rotation3<f64>;
/// Rotation stored as a matrix plus a translation; `R * p + t`.
pub type RigidTransform = IsometryMatrix3<f64>;

/// Ground plane `z = 0`, outward normal `+z`.
pub const GROUND_NORMAL: Vec3 = Vector3::new(0.0, 0.0, 1.0);

/// Rotation vector: direction is the axis, norm is the angle in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisAngle(pub Vec3);

impl AxisAngle {
    pub fn zero() -> Self {
        AxisAngle(Vec3::zeros())
    }

    pub fn angle(&self) -> f64 {
        self.0.norm()
    }
}

/// Skew-symmetric matrix with `hat(r) * v == r.cross(v)`.
pub fn so3_hat(r: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -r.z, r.y, r.z, 0.0, -r.x, -r.y, r.x, 0.0)
}

/// Exponential map via Rodrigues' formula, with the Taylor limit near zero.
pub fn so3_exp(r: &AxisAngle) -> RotationMatrix {
    let v = r.0;
    let theta2 = v.norm_squared();
    let k = so3_hat(&v);
    let k2 = k * k;
    let (a, b) = if theta2 < 1e-10 {
        // sin(t)/t and (1 - cos t)/t^2 to fourth order
        (1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0, 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0)
    } else {
        let theta = theta2.sqrt();
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Rotation3::from_matrix_unchecked(Matrix3::identity() + k * a + k2 * b)
}

/// Logarithm map, returns the rotation vector with angle in `[0, pi]`.
pub fn so3_log(rot: &RotationMatrix) -> AxisAngle {
    let m = rot.matrix();
    let cos = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = cos.acos();
    let w = Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
    if theta < 1e-6 {
        return AxisAngle(w * 0.5 * (1.0 + theta * theta / 6.0));
    }
    if std::f64::consts::PI - theta < 1e-4 {
        // Near pi the antisymmetric part vanishes; read the axis off R + I.
        let b = (m + Matrix3::identity()) * 0.5;
        let mut col = 0;
        for i in 1..3 {
            if b[(i, i)] > b[(col, col)] {
                col = i;
            }
        }
        let mut axis: Vec3 = b.column(col).into_owned();
        axis /= axis.norm();
        if axis.dot(&w) < 0.0 {
            axis = -axis;
        }
        return AxisAngle(axis * theta);
    }
    AxisAngle(w * (theta / (2.0 * theta.sin())))
}

/// Builds a rigid transform from a rotation and translation.
pub fn rigid(rotation: RotationMatrix, translation: Vec3) -> RigidTransform {
    IsometryMatrix3::from_parts(Translation3::from(translation), rotation)
}

/// Rotation whose columns are an orthonormal frame with the given z axis.
///
/// The x axis is the first of world x/y least aligned with `z`, orthogonalised.
pub fn frame_from_z(z: &UnitVec3) -> RotationMatrix {
    let seed = if z.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let x = (seed - z.as_ref() * z.dot(&seed)).normalize();
    let y = z.cross(&x);
    Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z.into_inner()]))
}

/// Max deviation of `R^T R` from identity and of `det R` from one.
pub fn rotation_defect(rot: &RotationMatrix) -> (f64, f64) {
    let m = rot.matrix();
    let orth = (m.transpose() * m - Matrix3::identity()).abs().max();
    (orth, (m.determinant() - 1.0).abs())
}

/// Object or hand surface: points with outward unit normals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfacePointCloud {
    points: Vec<Vec3>,
    normals: Vec<Vec3>,
    center_of_mass: Vec3,
}

impl SurfacePointCloud {
    /// Builds a cloud whose center of mass is the mean of `points`.
    pub fn new(points: Vec<Vec3>, normals: Vec<Vec3>) -> Result<Self> {
        let com = mean(&points).ok_or(GraspError::EmptyCloud)?;
        Self::with_center_of_mass(points, normals, com)
    }

    pub fn with_center_of_mass(points: Vec<Vec3>, normals: Vec<Vec3>, center_of_mass: Vec3) -> Result<Self> {
        if points.is_empty() {
            return Err(GraspError::EmptyCloud);
        }
        if points.len() != normals.len() {
            return Err(GraspError::InvalidHand(format!(
                "cloud has {} points but {} normals",
                points.len(),
                normals.len()
            )));
        }
        let normals = normals
            .into_iter()
            .map(|n| {
                let len = n.norm();
                if len > 0.0 && len.is_finite() {
                    n / len
                } else {
                    Vec3::z()
                }
            })
            .collect();
        Ok(SurfacePointCloud {
            points,
            normals,
            center_of_mass,
        })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn center_of_mass(&self) -> Vec3 {
        self.center_of_mass
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Applies a rigid transform to points and normals. The center of mass
    /// moves with the cloud.
    pub fn transformed(&self, tf: &RigidTransform) -> SurfacePointCloud {
        SurfacePointCloud {
            points: self.points.iter().map(|p| tf * nalgebra::Point3::from(*p)).map(|p| p.coords).collect(),
            normals: self.normals.iter().map(|n| tf.rotation * n).collect(),
            center_of_mass: (tf * nalgebra::Point3::from(self.center_of_mass)).coords,
        }
    }
}

pub fn mean(points: &[Vec3]) -> Option<Vec3> {
    if points.is_empty() {
        return None;
    }
    let sum = points.iter().fold(Vec3::zeros(), |acc, p| acc + p);
    Some(sum / points.len() as f64)
}

pub fn transform_point(tf: &RigidTransform, p: &Vec3) -> Vec3 {
    tf.rotation * p + tf.translation.vector
}

/// Box given by a frame (center and axes) and positive half extents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBoundingBox {
    pub frame: RigidTransform,
    pub half_extents: Vec3,
}

impl OrientedBoundingBox {
    pub fn new(frame: RigidTransform, half_extents: Vec3) -> Result<Self> {
        if half_extents.iter().any(|h| !(*h > 0.0)) {
            return Err(GraspError::InvalidHand(format!(
                "box half extents must be positive, got {:?}",
                half_extents.as_slice()
            )));
        }
        Ok(OrientedBoundingBox { frame, half_extents })
    }

    /// Point in the box's local coordinates.
    pub fn to_local(&self, p: &Vec3) -> Vec3 {
        self.frame.rotation.inverse_transform_vector(&(p - self.frame.translation.vector))
    }

    pub fn to_world(&self, p: &Vec3) -> Vec3 {
        transform_point(&self.frame, p)
    }

    /// Strict inclusion in the box grown by `margin` on every side.
    pub fn contains(&self, p: &Vec3, margin: f64) -> bool {
        let l = self.to_local(p);
        (0..3).all(|k| l[k].abs() < self.half_extents[k] + margin)
    }

    pub fn transformed(&self, tf: &RigidTransform) -> OrientedBoundingBox {
        OrientedBoundingBox {
            frame: tf * self.frame,
            half_extents: self.half_extents,
        }
    }
}
