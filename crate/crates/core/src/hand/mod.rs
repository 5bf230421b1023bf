//! Hand description, forward kinematics and Jacobians.

mod default_model;
mod kinematics;
mod spec;

pub use default_model::default_hand_spec;
pub use kinematics::{
    forward_kinematics, point_jacobian, rotational_jacobian, translational_jacobian, HandState, PosedFinger, PosedHand,
    PosedLink,
};
pub use spec::{BoxSpec, CloudSpec, FingerSpec, FrameSpec, HandSpec, JointSpec, LinkSpec, PatchSpec, HAND_FORMAT_VERSION};

use std::path::Path;

use nalgebra::Unit;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GraspError, Result};
use crate::geometry::{rigid, so3_exp, AxisAngle, OrientedBoundingBox, RigidTransform, SurfacePointCloud, UnitVec3, Vec3};

/// Identifies a rigid body of the hand. The palm sorts before every finger link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LinkId {
    Palm,
    /// Body carried by joint `joint` of finger `finger`.
    Finger { finger: usize, joint: usize },
}

/// Surface samples and collision box of one rigid body, in its own frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkBody {
    pub cloud: SurfacePointCloud,
    pub bbox: OrientedBoundingBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RevoluteJoint {
    pub name: String,
    pub origin: RigidTransform,
    pub axis: UnitVec3,
    pub q_min: f64,
    pub q_max: f64,
    pub q_mean: f64,
    pub q_open: f64,
    pub alpha: f64,
    pub body: Option<LinkBody>,
}

impl RevoluteJoint {
    pub fn range(&self) -> f64 {
        self.q_max - self.q_min
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Finger {
    pub name: String,
    pub joints: Vec<RevoluteJoint>,
    /// Sampled contact surface in the frame of the last joint.
    pub fingertip_patch: SurfacePointCloud,
    /// Index of this finger's first joint in the full joint vector.
    pub joint_offset: usize,
}

/// Kinematic tree with per-link point samples and collision boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct HandModel {
    spec: HandSpec,
    pub palm: LinkBody,
    pub fingers: Vec<Finger>,
    total_joints: usize,
}

fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

fn frame(spec: &FrameSpec) -> RigidTransform {
    rigid(so3_exp(&AxisAngle(v3(spec.rotation))), v3(spec.translation))
}

fn sample_box_surface(bbox: &OrientedBoundingBox, count: usize, seed: u64) -> Result<SurfacePointCloud> {
    let h = bbox.half_extents;
    // face pairs ordered x, y, z with areas 4*hy*hz etc.
    let areas = [4.0 * h.y * h.z, 4.0 * h.y * h.z, 4.0 * h.x * h.z, 4.0 * h.x * h.z, 4.0 * h.x * h.y, 4.0 * h.x * h.y];
    let total: f64 = areas.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count);
    let mut normals = Vec::with_capacity(count);
    for _ in 0..count {
        let mut u = rng.random_range(0.0..total);
        let mut face = 5;
        for (k, a) in areas.iter().enumerate() {
            if u < *a {
                face = k;
                break;
            }
            u -= a;
        }
        let axis = face / 2;
        let sign = if face % 2 == 0 { -1.0 } else { 1.0 };
        let mut local = Vec3::new(
            rng.random_range(-h.x..h.x),
            rng.random_range(-h.y..h.y),
            rng.random_range(-h.z..h.z),
        );
        local[axis] = sign * h[axis];
        let mut n = Vec3::zeros();
        n[axis] = sign;
        points.push(bbox.to_world(&local));
        normals.push(bbox.frame.rotation * n);
    }
    SurfacePointCloud::new(points, normals)
}

fn explicit_cloud(points: &[[f64; 3]], normals: &[[f64; 3]], what: &str) -> Result<SurfacePointCloud> {
    if points.len() != normals.len() {
        return Err(GraspError::InvalidHand(format!(
            "{what}: {} points but {} normals",
            points.len(),
            normals.len()
        )));
    }
    if points.is_empty() {
        return Err(GraspError::InvalidHand(format!("{what}: cloud is empty")));
    }
    SurfacePointCloud::new(points.iter().map(|p| v3(*p)).collect(), normals.iter().map(|n| v3(*n)).collect())
}

fn spherical_cap(center: Vec3, axis: UnitVec3, radius: f64, half_angle: f64, count: usize) -> Result<SurfacePointCloud> {
    let frame = crate::geometry::frame_from_z(&axis);
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let cos_max = half_angle.cos();
    let mut points = Vec::with_capacity(count);
    let mut normals = Vec::with_capacity(count);
    for k in 0..count {
        let cos_t = 1.0 - (1.0 - cos_max) * (k as f64 + 0.5) / count as f64;
        let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
        let phi = golden * k as f64;
        let local = Vec3::new(sin_t * phi.cos(), sin_t * phi.sin(), cos_t);
        let n = frame * local;
        normals.push(n);
        points.push(center + n * radius);
    }
    SurfacePointCloud::new(points, normals)
}

fn build_link(spec: &LinkSpec, what: &str) -> Result<LinkBody> {
    let b = &spec.bbox;
    let bbox = OrientedBoundingBox::new(rigid(so3_exp(&AxisAngle(v3(b.rotation))), v3(b.center)), v3(b.half_extents))
        .map_err(|e| GraspError::InvalidHand(format!("{what}: {e}")))?;
    let cloud = match &spec.cloud {
        CloudSpec::BoxSurface { count, seed } => {
            if *count == 0 {
                return Err(GraspError::InvalidHand(format!("{what}: cloud count must be positive")));
            }
            sample_box_surface(&bbox, *count, *seed)?
        }
        CloudSpec::Explicit { points, normals } => explicit_cloud(points, normals, what)?,
    };
    Ok(LinkBody { cloud, bbox })
}

fn unit(a: [f64; 3], what: &str) -> Result<UnitVec3> {
    let v = v3(a);
    if !(v.norm() > 1e-12) || !v.iter().all(|c| c.is_finite()) {
        return Err(GraspError::InvalidHand(format!("{what}: axis must be a nonzero finite vector")));
    }
    Ok(Unit::new_normalize(v))
}

impl HandModel {
    /// Validates a hand description and samples its surfaces.
    pub fn from_spec(spec: HandSpec) -> Result<Self> {
        if spec.format_version != HAND_FORMAT_VERSION {
            return Err(GraspError::InvalidHand(format!(
                "format_version {} is not supported (expected {HAND_FORMAT_VERSION})",
                spec.format_version
            )));
        }
        if spec.fingers.is_empty() {
            return Err(GraspError::InvalidHand("hand has no fingers".into()));
        }
        let palm = build_link(&spec.palm, "palm")?;
        let mut fingers = Vec::with_capacity(spec.fingers.len());
        let mut offset = 0;
        for fs in &spec.fingers {
            if fs.joints.is_empty() {
                return Err(GraspError::InvalidHand(format!("finger '{}': has no joints", fs.name)));
            }
            let mut joints = Vec::with_capacity(fs.joints.len());
            for (j, js) in fs.joints.iter().enumerate() {
                let what = format!("finger '{}' joint {} ('{}')", fs.name, j, js.name);
                if !(js.q_min < js.q_max) {
                    return Err(GraspError::InvalidHand(format!(
                        "{what}: q_min ({}) must be less than q_max ({})",
                        js.q_min, js.q_max
                    )));
                }
                let q_mean = js.q_mean.unwrap_or(0.5 * (js.q_min + js.q_max));
                let q_open = js.q_open.unwrap_or(js.q_min);
                for (label, v) in [("q_mean", q_mean), ("q_open", q_open)] {
                    if !(js.q_min..=js.q_max).contains(&v) {
                        return Err(GraspError::InvalidHand(format!("{what}: {label} ({v}) outside [q_min, q_max]")));
                    }
                }
                let alpha = js.alpha.unwrap_or(1.0);
                if !(alpha > 0.0) {
                    return Err(GraspError::InvalidHand(format!("{what}: alpha must be positive")));
                }
                let body = js.link.as_ref().map(|l| build_link(l, &what)).transpose()?;
                joints.push(RevoluteJoint {
                    name: js.name.clone(),
                    origin: frame(&js.origin),
                    axis: unit(js.axis, &what)?,
                    q_min: js.q_min,
                    q_max: js.q_max,
                    q_mean,
                    q_open,
                    alpha,
                    body,
                });
            }
            let what = format!("finger '{}' fingertip", fs.name);
            let fingertip_patch = match &fs.fingertip {
                PatchSpec::SphericalCap {
                    center,
                    axis,
                    radius,
                    half_angle,
                    count,
                } => {
                    if *count == 0 || !(*radius > 0.0) || !(*half_angle > 0.0 && *half_angle <= std::f64::consts::PI) {
                        return Err(GraspError::InvalidHand(format!(
                            "{what}: cap needs count > 0, radius > 0 and 0 < half_angle <= pi"
                        )));
                    }
                    spherical_cap(v3(*center), unit(*axis, &what)?, *radius, *half_angle, *count)?
                }
                PatchSpec::Explicit { points, normals } => explicit_cloud(points, normals, &what)?,
            };
            let n = joints.len();
            fingers.push(Finger {
                name: fs.name.clone(),
                joints,
                fingertip_patch,
                joint_offset: offset,
            });
            offset += n;
        }
        Ok(HandModel {
            spec,
            palm,
            fingers,
            total_joints: offset,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec = HandSpec::from_json(text).map_err(GraspError::InvalidHand)?;
        Self::from_spec(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GraspError::io(path, e))?;
        let spec = HandSpec::from_json(&text).map_err(|m| GraspError::parse(path, m))?;
        Self::from_spec(spec).map_err(|e| GraspError::parse(path, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_file(path, self.spec.to_json())
    }

    /// The three-finger model shipped with the crate.
    pub fn default_three_finger() -> Self {
        Self::from_spec(default_hand_spec()).expect("default hand spec is valid")
    }

    pub fn spec(&self) -> &HandSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn total_joints(&self) -> usize {
        self.total_joints
    }

    pub fn finger_count(&self) -> usize {
        self.fingers.len()
    }

    pub fn joints(&self) -> impl Iterator<Item = &RevoluteJoint> {
        self.fingers.iter().flat_map(|f| f.joints.iter())
    }

    pub fn q_min(&self) -> Vec<f64> {
        self.joints().map(|j| j.q_min).collect()
    }

    pub fn q_max(&self) -> Vec<f64> {
        self.joints().map(|j| j.q_max).collect()
    }

    pub fn q_mean(&self) -> Vec<f64> {
        self.joints().map(|j| j.q_mean).collect()
    }

    pub fn q_open(&self) -> Vec<f64> {
        self.joints().map(|j| j.q_open).collect()
    }

    pub fn alpha(&self) -> Vec<f64> {
        self.joints().map(|j| j.alpha).collect()
    }

    /// Every rigid body with a surface, palm first.
    pub fn bodies(&self) -> impl Iterator<Item = (LinkId, &LinkBody)> {
        std::iter::once((LinkId::Palm, &self.palm)).chain(self.fingers.iter().enumerate().flat_map(|(i, f)| {
            f.joints
                .iter()
                .enumerate()
                .filter_map(move |(j, jt)| jt.body.as_ref().map(|b| (LinkId::Finger { finger: i, joint: j }, b)))
        }))
    }

    /// Total hand surface samples: link clouds plus fingertip patches.
    pub fn point_count(&self) -> usize {
        self.bodies().map(|(_, b)| b.cloud.len()).sum::<usize>()
            + self.fingers.iter().map(|f| f.fingertip_patch.len()).sum::<usize>()
    }
}
