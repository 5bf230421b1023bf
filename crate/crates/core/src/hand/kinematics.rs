use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{HandModel, LinkId};
use crate::error::{GraspError, Result};
use crate::geometry::{mean, so3_exp, transform_point, AxisAngle, OrientedBoundingBox, RigidTransform, Vec3};

/// Palm pose plus joint vector, with joints inside their limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandState {
    pub pose: RigidTransform,
    q: Vec<f64>,
}

impl HandState {
    pub fn new(model: &HandModel, pose: RigidTransform, q: Vec<f64>) -> Result<Self> {
        if q.len() != model.total_joints() {
            return Err(GraspError::InvalidState(format!(
                "joint vector has {} entries, hand has {} joints",
                q.len(),
                model.total_joints()
            )));
        }
        for (k, (v, j)) in q.iter().zip(model.joints()).enumerate() {
            if !(j.q_min..=j.q_max).contains(v) {
                return Err(GraspError::JointBounds {
                    joint: k,
                    value: *v,
                    lo: j.q_min,
                    hi: j.q_max,
                });
            }
        }
        Ok(HandState { pose, q })
    }

    /// Palm at `pose`, every joint at its open value.
    pub fn open(model: &HandModel, pose: RigidTransform) -> Self {
        HandState { pose, q: model.q_open() }
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }
}

/// One rigid body placed in the world.
#[derive(Debug, Clone, PartialEq)]
pub struct PosedLink {
    pub id: LinkId,
    pub frame: RigidTransform,
    pub points: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    pub bbox: OrientedBoundingBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosedFinger {
    /// World joint axes and origins, proximal first.
    pub joint_axes: Vec<Vec3>,
    pub joint_origins: Vec<Vec3>,
    pub patch_points: Vec<Vec3>,
    pub patch_normals: Vec<Vec3>,
    pub tip_centroid: Vec3,
    pub tip_normal: Vec3,
    pub joint_offset: usize,
}

/// World-frame geometry of a hand in a given state.
#[derive(Debug, Clone, PartialEq)]
pub struct PosedHand {
    pub pose: RigidTransform,
    /// Palm first, then finger bodies in (finger, joint) order.
    pub links: Vec<PosedLink>,
    pub fingers: Vec<PosedFinger>,
    pub total_joints: usize,
}

fn place(tf: &RigidTransform, points: &[Vec3], normals: &[Vec3]) -> (Vec<Vec3>, Vec<Vec3>) {
    (
        points.iter().map(|p| transform_point(tf, p)).collect(),
        normals.iter().map(|n| tf.rotation * n).collect(),
    )
}

/// Places every link, box and fingertip patch for `state`.
pub fn forward_kinematics(model: &HandModel, state: &HandState) -> PosedHand {
    let pose = state.pose;
    let mut links = Vec::new();
    let (pts, nrm) = place(&pose, model.palm.cloud.points(), model.palm.cloud.normals());
    links.push(PosedLink {
        id: LinkId::Palm,
        frame: pose,
        points: pts,
        normals: nrm,
        bbox: model.palm.bbox.transformed(&pose),
    });
    let mut fingers = Vec::with_capacity(model.fingers.len());
    for (i, finger) in model.fingers.iter().enumerate() {
        let mut parent = pose;
        let mut axes = Vec::with_capacity(finger.joints.len());
        let mut origins = Vec::with_capacity(finger.joints.len());
        for (j, joint) in finger.joints.iter().enumerate() {
            let base = parent * joint.origin;
            axes.push(base.rotation * joint.axis.into_inner());
            origins.push(base.translation.vector);
            let q = state.q[finger.joint_offset + j];
            let rot = so3_exp(&AxisAngle(joint.axis.into_inner() * q));
            let frame = base * RigidTransform::from_parts(nalgebra::Translation3::identity(), rot);
            if let Some(body) = &joint.body {
                let (pts, nrm) = place(&frame, body.cloud.points(), body.cloud.normals());
                links.push(PosedLink {
                    id: LinkId::Finger { finger: i, joint: j },
                    frame,
                    points: pts,
                    normals: nrm,
                    bbox: body.bbox.transformed(&frame),
                });
            }
            parent = frame;
        }
        let (patch_points, patch_normals) = place(&parent, finger.fingertip_patch.points(), finger.fingertip_patch.normals());
        let tip_centroid = mean(&patch_points).expect("fingertip patch is nonempty");
        let n_sum = patch_normals.iter().fold(Vec3::zeros(), |a, n| a + n);
        let tip_normal = if n_sum.norm() > 1e-12 { n_sum.normalize() } else { patch_normals[0] };
        fingers.push(PosedFinger {
            joint_axes: axes,
            joint_origins: origins,
            patch_points,
            patch_normals,
            tip_centroid,
            tip_normal,
            joint_offset: finger.joint_offset,
        });
    }
    PosedHand {
        pose,
        links,
        fingers,
        total_joints: model.total_joints(),
    }
}

impl PosedHand {
    pub fn link(&self, id: LinkId) -> Option<&PosedLink> {
        self.links.iter().find(|l| l.id == id)
    }

    /// Every surface sample (link clouds and fingertip patches) with the link
    /// that carries it.
    pub fn surface_points(&self) -> impl Iterator<Item = (LinkId, &Vec3, &Vec3)> {
        let links = self.links.iter().flat_map(|l| l.points.iter().zip(&l.normals).map(move |(p, n)| (l.id, p, n)));
        let tips = self.fingers.iter().enumerate().flat_map(|(i, f)| {
            let id = LinkId::Finger {
                finger: i,
                joint: f.joint_axes.len() - 1,
            };
            f.patch_points.iter().zip(&f.patch_normals).map(move |(p, n)| (id, p, n))
        });
        links.chain(tips)
    }

    pub fn tip_centroids(&self) -> Vec<Vec3> {
        self.fingers.iter().map(|f| f.tip_centroid).collect()
    }

    /// World-frame 3 x N Jacobian of a point rigidly attached to `link`.
    pub fn point_jacobian_world(&self, link: LinkId, p: &Vec3) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(3, self.total_joints);
        if let LinkId::Finger { finger, joint } = link {
            let f = &self.fingers[finger];
            for j in 0..=joint {
                let col = f.joint_axes[j].cross(&(p - f.joint_origins[j]));
                jac.fixed_view_mut::<3, 1>(0, f.joint_offset + j).copy_from(&col);
            }
        }
        jac
    }

    /// World-frame 3 x N_i Jacobian of fingertip centroid `i` over its finger's joints.
    pub fn tip_translational_jacobian_world(&self, i: usize) -> DMatrix<f64> {
        let f = &self.fingers[i];
        let n = f.joint_axes.len();
        DMatrix::from_fn(3, n, |r, c| f.joint_axes[c].cross(&(f.tip_centroid - f.joint_origins[c]))[r])
    }

    /// World-frame 3 x N_i angular Jacobian of finger `i`'s distal link.
    pub fn tip_rotational_jacobian_world(&self, i: usize) -> DMatrix<f64> {
        let f = &self.fingers[i];
        DMatrix::from_fn(3, f.joint_axes.len(), |r, c| f.joint_axes[c][r])
    }

    fn to_palm(&self, jac: DMatrix<f64>) -> DMatrix<f64> {
        let rt = self.pose.rotation.matrix().transpose();
        let mut out = jac.clone();
        for c in 0..jac.ncols() {
            let col = rt * jac.fixed_view::<3, 1>(0, c);
            out.fixed_view_mut::<3, 1>(0, c).copy_from(&col);
        }
        out
    }
}

/// Fingertip-centroid Jacobian of finger `i` in the palm frame (3 x N_i).
pub fn translational_jacobian(model: &HandModel, state: &HandState, finger: usize) -> DMatrix<f64> {
    let posed = forward_kinematics(model, state);
    posed.to_palm(posed.tip_translational_jacobian_world(finger))
}

/// Angular Jacobian of finger `i`'s distal link in the palm frame (3 x N_i).
pub fn rotational_jacobian(model: &HandModel, state: &HandState, finger: usize) -> DMatrix<f64> {
    let posed = forward_kinematics(model, state);
    posed.to_palm(posed.tip_rotational_jacobian_world(finger))
}

/// Palm-frame 3 x N Jacobian of world point `p` attached to `link`.
pub fn point_jacobian(model: &HandModel, state: &HandState, link: LinkId, p: &Vec3) -> DMatrix<f64> {
    let posed = forward_kinematics(model, state);
    posed.to_palm(posed.point_jacobian_world(link, p))
}
