//! Approximate hand-object and hand-ground collision detection.
//!
//! Object points are tested for inclusion in each posed link box (enlarged by a
//! margin). Every included object point is paired with the nearest surface
//! sample of that link. Links whose pairs face the object from behind (the
//! link has passed through the surface) get their hand points moved to the
//! opposite box face, so the penalty pushes the link back out the short way.

use serde::{Deserialize, Serialize};

use crate::contact::IndexedCloud;
use crate::exec::{map_slice, Execution};
use crate::geometry::{Vec3, GROUND_NORMAL};
use crate::hand::{LinkId, PosedHand, PosedLink};

pub const DEFAULT_BOX_MARGIN: f64 = 0.002;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// The link face touching the object points toward it.
    Inner,
    /// The link went through the surface; the hand point sits on the far face.
    Outer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectPair {
    pub link: LinkId,
    pub object_index: usize,
    /// Index of the nearest sample in the link cloud.
    pub hand_index: usize,
    /// Hand point used by the penalty (replaced for outer-side pairs).
    pub hand_point: Vec3,
    /// Outward normal of the box face carrying `hand_point`.
    pub hand_normal: Vec3,
    pub object_point: Vec3,
    pub side: Side,
    /// Projection of the object point onto the plane of that face.
    pub face_point: Vec3,
}

impl ObjectPair {
    /// Link-fixed point that the penalty drives onto the object point.
    ///
    /// This is the face projection of the object point, pushed out by
    /// `clearance`, so the residual points straight out of the face. Using
    /// the sampled hand point itself would add a sideways component whenever
    /// the nearest sample sits on a neighbouring face.
    pub fn penalty_point(&self, clearance: f64) -> Vec3 {
        self.face_point + self.hand_normal * clearance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundPair {
    pub link: LinkId,
    pub hand_point: Vec3,
    pub foot: Vec3,
}

impl GroundPair {
    /// Signed height of the hand point; negative below the plane.
    pub fn penetration(&self) -> f64 {
        (self.hand_point - self.foot).dot(&GROUND_NORMAL)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CollisionSet {
    pub object_pairs: Vec<ObjectPair>,
    pub ground_pairs: Vec<GroundPair>,
}

impl CollisionSet {
    pub fn is_empty(&self) -> bool {
        self.object_pairs.is_empty() && self.ground_pairs.is_empty()
    }

    pub fn pair_count(&self) -> usize {
        self.object_pairs.len() + self.ground_pairs.len()
    }

    /// Object indices in collision, in pair order.
    pub fn object_indices(&self) -> Vec<usize> {
        self.object_pairs.iter().map(|p| p.object_index).collect()
    }
}

fn nearest_on_link(link: &PosedLink, o: &Vec3) -> usize {
    let mut best = (0, f64::INFINITY);
    for (k, p) in link.points.iter().enumerate() {
        let d = (p - o).norm_squared();
        if d < best.1 {
            best = (k, d);
        }
    }
    best.0
}

/// Box face closest to a point on the link surface, as (axis, sign).
fn face_of(link: &PosedLink, p: &Vec3) -> (usize, f64) {
    let local = link.bbox.to_local(p);
    let h = link.bbox.half_extents;
    let axis = (0..3)
        .min_by(|&a, &b| (h[a] - local[a].abs()).total_cmp(&(h[b] - local[b].abs())))
        .expect("three axes");
    (axis, if local[axis] >= 0.0 { 1.0 } else { -1.0 })
}

fn face_normal(link: &PosedLink, (axis, sign): (usize, f64)) -> Vec3 {
    let mut n = Vec3::zeros();
    n[axis] = sign;
    link.bbox.frame.rotation * n
}

/// Projects `x` onto the plane of a box face.
fn onto_face(link: &PosedLink, (axis, sign): (usize, f64), x: &Vec3) -> Vec3 {
    let mut local = link.bbox.to_local(x);
    local[axis] = sign * link.bbox.half_extents[axis];
    link.bbox.to_world(&local)
}

/// Moves `p` to the face opposite the one it lies on, keeping its in-face
/// coordinates. Returns the new point and the opposite face.
fn opposite_face(link: &PosedLink, p: &Vec3) -> (Vec3, (usize, f64)) {
    let (axis, sign) = face_of(link, p);
    let h = link.bbox.half_extents;
    let local = link.bbox.to_local(p);
    let mut q = Vec3::new(local.x.clamp(-h.x, h.x), local.y.clamp(-h.y, h.y), local.z.clamp(-h.z, h.z));
    q[axis] = -sign * h[axis];
    (link.bbox.to_world(&q), (axis, -sign))
}

fn detect_link(link: &PosedLink, object: &IndexedCloud, margin: f64) -> Vec<ObjectPair> {
    let pts = object.cloud.points();
    let mut pairs: Vec<ObjectPair> = pts
        .iter()
        .enumerate()
        .filter(|(_, o)| link.bbox.contains(o, margin))
        .map(|(i, o)| {
            let k = nearest_on_link(link, o);
            let face = face_of(link, &link.points[k]);
            ObjectPair {
                link: link.id,
                object_index: i,
                hand_index: k,
                hand_point: link.points[k],
                hand_normal: face_normal(link, face),
                object_point: *o,
                side: Side::Inner,
                face_point: onto_face(link, face, o),
            }
        })
        .collect();
    let facing: f64 = pairs
        .iter()
        .map(|p| p.hand_normal.dot(&object.cloud.normals()[p.object_index]))
        .sum();
    if facing > 0.0 {
        for p in &mut pairs {
            let (q, face) = opposite_face(link, &p.hand_point);
            p.hand_point = q;
            p.hand_normal = face_normal(link, face);
            p.face_point = onto_face(link, face, &p.object_point);
            p.side = Side::Outer;
        }
    }
    pairs
}

/// Hand-object pairs for every link box, sorted by (link, object index).
pub fn detect_object_collisions(posed: &PosedHand, object: &IndexedCloud, margin: f64, exec: Execution) -> Vec<ObjectPair> {
    let mut pairs: Vec<ObjectPair> = map_slice(exec, &posed.links, |l| detect_link(l, object, margin))
        .into_iter()
        .flatten()
        .collect();
    pairs.sort_by_key(|p| (p.link, p.object_index));
    pairs
}

/// Every hand surface point (links and fingertip patches) below `z = 0`.
pub fn detect_ground_collisions(posed: &PosedHand) -> Vec<GroundPair> {
    posed
        .surface_points()
        .filter(|(_, p, _)| p.z < 0.0)
        .map(|(link, p, _)| GroundPair {
            link,
            hand_point: *p,
            foot: Vec3::new(p.x, p.y, 0.0),
        })
        .collect()
}

pub fn detect_collisions(posed: &PosedHand, object: &IndexedCloud, margin: f64, exec: Execution) -> CollisionSet {
    CollisionSet {
        object_pairs: detect_object_collisions(posed, object, margin, exec),
        ground_pairs: detect_ground_collisions(posed),
    }
}

/// `sum ||p_l - o_l||^2 + sum ((p_l - o_g) . n_g)^2` at the current configuration.
pub fn eval_e_col(cols: &CollisionSet) -> f64 {
    let obj: f64 = cols.object_pairs.iter().map(|p| (p.hand_point - p.object_point).norm_squared()).sum();
    let gnd: f64 = cols.ground_pairs.iter().map(|g| g.penetration().powi(2)).sum();
    // Empty float sums are -0.0; start from +0.0 so exports print "0".
    0.0 + obj + gnd
}
