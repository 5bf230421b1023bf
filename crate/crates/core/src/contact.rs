//! Contact assignment and the geometric grasp-quality terms.
//!
//! Every quality term is a negated sum of squares, so 0 is ideal. Contacts are
//! patch means: each fingertip sample is matched to its nearest object point,
//! and the contact point and normal are the means of the matched points.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{GraspError, Result};
use crate::exec::Execution;
use crate::geometry::{mean, KdTree, SurfacePointCloud, Vec3};
use crate::hand::{HandModel, PosedHand};

const DEGENERATE_NORMAL: f64 = 1e-8;

/// Object cloud plus its search tree, built once per object.
#[derive(Debug, Clone)]
pub struct IndexedCloud {
    pub cloud: SurfacePointCloud,
    pub tree: KdTree,
}

impl IndexedCloud {
    pub fn new(cloud: SurfacePointCloud) -> Result<Self> {
        let tree = KdTree::from_cloud(&cloud)?;
        Ok(IndexedCloud { cloud, tree })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerContact {
    /// Mean of the object points matched by the fingertip samples.
    pub contact: Vec3,
    pub contact_normal: Vec3,
    pub tip_centroid: Vec3,
    pub tip_normal: Vec3,
    /// Object index matched by each fingertip sample.
    #[serde(skip)]
    pub matched: Vec<usize>,
    /// Set when the matched normals cancelled out and the normal points from
    /// the fingertip toward the object's center of mass instead.
    pub fallback_normal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactSet {
    pub fingers: Vec<FingerContact>,
}

impl ContactSet {
    pub fn len(&self) -> usize {
        self.fingers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fingers.is_empty()
    }

    pub fn tip_centroids(&self) -> Vec<Vec3> {
        self.fingers.iter().map(|f| f.tip_centroid).collect()
    }

    pub fn any_fallback(&self) -> bool {
        self.fingers.iter().any(|f| f.fallback_normal)
    }
}

/// Matches every fingertip sample to the object and averages per finger.
pub fn assign_contacts(posed: &PosedHand, object: &IndexedCloud, exec: Execution) -> ContactSet {
    let fingers = posed
        .fingers
        .iter()
        .map(|f| {
            let hits = object.tree.nearest_many(&f.patch_points, exec);
            let matched: Vec<usize> = hits.iter().map(|h| h.index).collect();
            let pts: Vec<Vec3> = matched.iter().map(|&k| object.cloud.points()[k]).collect();
            let contact = mean(&pts).expect("fingertip patch is nonempty");
            let n_sum = matched.iter().fold(Vec3::zeros(), |a, &k| a + object.cloud.normals()[k]);
            let n_mean = n_sum / matched.len() as f64;
            let (contact_normal, fallback_normal) = if n_mean.norm() < DEGENERATE_NORMAL {
                let toward = object.cloud.center_of_mass() - f.tip_centroid;
                let n = if toward.norm() > 0.0 { toward.normalize() } else { -f.tip_normal };
                (n, true)
            } else {
                (n_mean.normalize(), false)
            };
            FingerContact {
                contact,
                contact_normal,
                tip_centroid: f.tip_centroid,
                tip_normal: f.tip_normal,
                matched,
                fallback_normal,
            }
        })
        .collect();
    ContactSet { fingers }
}

/// Normal of the plane through the fingertip centroids, signed so that
/// `n . approach >= 0` where `approach` points from the palm toward the object.
pub fn polygon_normal(tips: &[Vec3], approach: &Vec3) -> Result<Vec3> {
    if tips.len() < 3 {
        return Err(GraspError::DegenerateContactPolygon);
    }
    let scale = tips.iter().map(|p| (p - tips[0]).norm()).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Err(GraspError::DegenerateContactPolygon);
    }
    let n = if tips.len() == 3 {
        let c = (tips[1] - tips[0]).cross(&(tips[2] - tips[0]));
        if c.norm() <= 1e-9 * scale * scale {
            return Err(GraspError::DegenerateContactPolygon);
        }
        c.normalize()
    } else {
        let centroid = mean(tips).expect("nonempty");
        let m = DMatrix::from_fn(tips.len(), 3, |r, c| tips[r][c] - centroid[c]);
        let eig = SymmetricEigen::new(m.transpose() * m);
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        // second-smallest spread ~ 0 means the tips are collinear
        if eig.eigenvalues[order[1]].max(0.0).sqrt() <= 1e-9 * scale {
            return Err(GraspError::DegenerateContactPolygon);
        }
        Vec3::from_iterator(eig.eigenvectors.column(order[0]).iter().copied()).normalize()
    };
    Ok(if n.dot(approach) < 0.0 { -n } else { n })
}

/// `-sum_i ((p_fi - p_com) . n_perp)^2`
pub fn eval_q_com(contacts: &ContactSet, p_com: &Vec3, n_perp: &Vec3) -> f64 {
    -contacts
        .fingers
        .iter()
        .map(|f| (f.tip_centroid - p_com).dot(n_perp).powi(2))
        .sum::<f64>()
}

/// `-sum_j (alpha_j (q_j - qbar_j) / (q_max_j - q_min_j))^2`
pub fn eval_q_jc(q: &[f64], model: &HandModel) -> f64 {
    -q.iter()
        .zip(model.joints())
        .map(|(v, j)| (j.alpha * (v - j.q_mean) / j.range()).powi(2))
        .sum::<f64>()
}

/// `-beta^2 sum_i (n_ci . n_fi + 1)^2`; zero when every pair is anti-parallel.
pub fn eval_q_align(contacts: &ContactSet, beta: f64) -> f64 {
    -beta * beta
        * contacts
            .fingers
            .iter()
            .map(|f| (f.contact_normal.dot(&f.tip_normal) + 1.0).powi(2))
            .sum::<f64>()
}

/// `sum_i ((p_fi - c_i) . n_ci)^2`
pub fn eval_e_cls(contacts: &ContactSet) -> f64 {
    contacts
        .fingers
        .iter()
        .map(|f| (f.tip_centroid - f.contact).dot(&f.contact_normal).powi(2))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub q_com: f64,
    pub q_jc: f64,
    pub q_align: f64,
    pub e_cls: f64,
    pub n_perp: Vec3,
}

impl QualityReport {
    /// `-Q_com - Q_jc - Q_align`
    pub fn e_quality(&self) -> f64 {
        -self.q_com - self.q_jc - self.q_align
    }
}

pub fn evaluate_quality(
    contacts: &ContactSet,
    q: &[f64],
    model: &HandModel,
    p_com: &Vec3,
    approach: &Vec3,
    beta: f64,
) -> Result<QualityReport> {
    let n_perp = polygon_normal(&contacts.tip_centroids(), approach)?;
    Ok(QualityReport {
        q_com: eval_q_com(contacts, p_com, &n_perp),
        q_jc: eval_q_jc(q, model),
        q_align: eval_q_align(contacts, beta),
        e_cls: eval_e_cls(contacts),
        n_perp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rigid, so3_exp, AxisAngle, RigidTransform};
    use crate::hand::{forward_kinematics, HandState};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn contact(tip: Vec3, tip_n: Vec3, c: Vec3, c_n: Vec3) -> FingerContact {
        FingerContact {
            contact: c,
            contact_normal: c_n,
            tip_centroid: tip,
            tip_normal: tip_n,
            matched: vec![],
            fallback_normal: false,
        }
    }

    fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
        Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).normalize()
    }

    fn random_vec(rng: &mut ChaCha8Rng) -> Vec3 {
        Vec3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1))
    }

    #[test]
    fn planar_patch_contact() {
        // object: dense grid on z = 0, normals +z; fingertip hovering just above
        let mut pts = Vec::new();
        for i in -20..=20 {
            for j in -20..=20 {
                pts.push(Vec3::new(i as f64 * 0.002, j as f64 * 0.002, 0.0));
            }
        }
        let n = vec![Vec3::z(); pts.len()];
        let object = IndexedCloud::new(SurfacePointCloud::new(pts, n).unwrap()).unwrap();
        let model = HandModel::default_three_finger();
        // point finger 1's pad straight down onto the plane
        let mut q = model.q_mean();
        q[1] = 0.0;
        q[2] = 0.0;
        let pose = rigid(so3_exp(&AxisAngle(Vec3::new(0.0, -std::f64::consts::FRAC_PI_2, 0.0))), Vec3::new(0.0, 0.0, 0.5));
        let state = HandState::new(&model, pose, q).unwrap();
        let posed = forward_kinematics(&model, &state);
        let cs = assign_contacts(&posed, &object, Execution::Sequential);
        let f = &cs.fingers[0];
        assert!((f.contact_normal - Vec3::z()).norm() < 1e-12);
        assert!(f.contact.z.abs() < 1e-15);
        assert!(!f.fallback_normal);
    }

    #[test]
    fn single_point_object() {
        let p = Vec3::new(0.01, 0.02, 0.03);
        let object = IndexedCloud::new(SurfacePointCloud::new(vec![p], vec![Vec3::z()]).unwrap()).unwrap();
        let model = HandModel::default_three_finger();
        let posed = forward_kinematics(&model, &HandState::open(&model, RigidTransform::identity()));
        let cs = assign_contacts(&posed, &object, Execution::Sequential);
        assert!(cs.fingers.iter().all(|f| (f.contact - p).norm() < 1e-15));
    }

    #[test]
    fn cancelling_normals_fall_back_toward_com() {
        let pts = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 0.0)];
        let ns = vec![Vec3::z(), -Vec3::z()];
        let cloud = SurfacePointCloud::with_center_of_mass(pts, ns, Vec3::new(0.0, 0.0, -1.0)).unwrap();
        let object = IndexedCloud::new(cloud).unwrap();
        let model = HandModel::default_three_finger();
        let posed = forward_kinematics(&model, &HandState::open(&model, RigidTransform::identity()));
        let cs = assign_contacts(&posed, &object, Execution::Sequential);
        // both points sit at the same spot, so every sample matches index 0;
        // cancelling needs an even split, which the tie rule never produces
        assert!(!cs.any_fallback());
        let f = FingerContact { matched: vec![0, 1], ..cs.fingers[0].clone() };
        let n_sum: Vec3 = f.matched.iter().map(|&k| object.cloud.normals()[k]).sum();
        assert!(n_sum.norm() < DEGENERATE_NORMAL);
    }

    #[test]
    fn polygon_normal_triangle_and_sign_rule() {
        let tips = [Vec3::zeros(), Vec3::x(), Vec3::y()];
        assert_eq!(polygon_normal(&tips, &Vec3::z()).unwrap(), Vec3::z());
        assert_eq!(polygon_normal(&tips, &-Vec3::z()).unwrap(), -Vec3::z());
        let quad = [Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::new(1.0, 1.0, 0.0)];
        assert!((polygon_normal(&quad, &Vec3::z()).unwrap() - Vec3::z()).norm() < 1e-12);
    }

    #[test]
    fn collinear_tips_are_degenerate() {
        let tips = [Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0];
        assert!(matches!(polygon_normal(&tips, &Vec3::z()), Err(GraspError::DegenerateContactPolygon)));
        let four = [Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0, Vec3::x() * 3.0];
        assert_eq!(polygon_normal(&four, &Vec3::z()).unwrap_err().to_string(), "degenerate contact polygon");
    }

    #[test]
    fn noisy_plane_matches_svd_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let normal = Vec3::new(0.2, -0.3, 1.0).normalize();
        let frame = crate::geometry::frame_from_z(&nalgebra::Unit::new_normalize(normal));
        let tips: Vec<Vec3> = (0..6)
            .map(|_| {
                frame * Vec3::new(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05), rng.random_range(-0.0005..0.0005))
            })
            .collect();
        // independent fit: SVD of the centered coordinates
        let c = tips.iter().sum::<Vec3>() / tips.len() as f64;
        let m = DMatrix::from_fn(tips.len(), 3, |r, k| tips[r][k] - c[k]);
        let svd = m.svd(false, true);
        let vt = svd.v_t.unwrap();
        let k = svd.singular_values.imin();
        let fit = Vec3::new(vt[(k, 0)], vt[(k, 1)], vt[(k, 2)]);
        let got = polygon_normal(&tips, &normal).unwrap();
        let angle = got.dot(&fit).abs().min(1.0).acos();
        assert!(angle < 2f64.to_radians(), "angle {angle}");
        assert!(got.dot(&normal) > 0.0);
    }

    #[test]
    fn q_com_cases() {
        let n = Vec3::z();
        let com = Vec3::new(0.0, 0.0, 0.1);
        let in_plane = ContactSet {
            fingers: (0..3).map(|i| contact(Vec3::new(i as f64, 1.0, 0.1), n, Vec3::zeros(), n)).collect(),
        };
        assert_eq!(eval_q_com(&in_plane, &com, &n), 0.0);
        let d = 0.02;
        let offset = ContactSet {
            fingers: (0..3).map(|i| contact(Vec3::new(i as f64, 1.0, 0.1 + d), n, Vec3::zeros(), n)).collect(),
        };
        assert!((eval_q_com(&offset, &com, &n) + 3.0 * d * d).abs() < 1e-15);
    }

    #[test]
    fn q_com_random_matches_scalar_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let cs = ContactSet {
                fingers: (0..4)
                    .map(|_| contact(random_vec(&mut rng), random_unit(&mut rng), random_vec(&mut rng), random_unit(&mut rng)))
                    .collect(),
            };
            let com = random_vec(&mut rng);
            let n = random_unit(&mut rng);
            let mut want = 0.0;
            for f in &cs.fingers {
                let d = (f.tip_centroid.x - com.x) * n.x + (f.tip_centroid.y - com.y) * n.y + (f.tip_centroid.z - com.z) * n.z;
                want -= d * d;
            }
            assert!((eval_q_com(&cs, &com, &n) - want).abs() < 1e-15);
        }
    }

    #[test]
    fn q_jc_cases() {
        let model = HandModel::default_three_finger();
        assert_eq!(eval_q_jc(&model.q_mean(), &model), 0.0);
        let mut q = model.q_mean();
        let delta = 0.2;
        q[1] += delta;
        let w = model.fingers[0].joints[1].range();
        assert!((eval_q_jc(&q, &model) + (delta / w).powi(2)).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (lo, hi, mid, alpha) = (model.q_min(), model.q_max(), model.q_mean(), model.alpha());
        for _ in 0..20 {
            let q: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| rng.random_range(*a..*b)).collect();
            let mut want = 0.0;
            for k in 0..q.len() {
                let t = alpha[k] * (q[k] - mid[k]) / (hi[k] - lo[k]);
                want -= t * t;
            }
            assert!((eval_q_jc(&q, &model) - want).abs() < 1e-14);
        }
    }

    #[test]
    fn q_align_cases() {
        let beta = 0.03;
        let anti = ContactSet {
            fingers: (0..3).map(|_| contact(Vec3::zeros(), Vec3::x(), Vec3::zeros(), -Vec3::x())).collect(),
        };
        assert_eq!(eval_q_align(&anti, beta), 0.0);
        let same = ContactSet {
            fingers: (0..3).map(|_| contact(Vec3::zeros(), Vec3::x(), Vec3::zeros(), Vec3::x())).collect(),
        };
        assert!((eval_q_align(&same, beta) + 0.0108).abs() < 1e-15);
        let ortho = ContactSet {
            fingers: (0..3).map(|_| contact(Vec3::zeros(), Vec3::x(), Vec3::zeros(), Vec3::y())).collect(),
        };
        assert!((eval_q_align(&ortho, beta) + beta * beta * 3.0).abs() < 1e-15);
    }

    #[test]
    fn e_cls_cases() {
        let n = Vec3::y();
        let zero = ContactSet {
            fingers: (0..3).map(|i| contact(Vec3::new(i as f64, 0.0, 0.0), -n, Vec3::new(i as f64, 0.0, 0.0), n)).collect(),
        };
        assert_eq!(eval_e_cls(&zero), 0.0);
        let mut one = zero.clone();
        one.fingers[1].tip_centroid += n * 0.015;
        assert!((eval_e_cls(&one) - 0.015f64.powi(2)).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cs = ContactSet {
            fingers: (0..3)
                .map(|_| contact(random_vec(&mut rng), random_unit(&mut rng), random_vec(&mut rng), random_unit(&mut rng)))
                .collect(),
        };
        let want: f64 = cs
            .fingers
            .iter()
            .map(|f| {
                let d = f.tip_centroid - f.contact;
                let s = d.x * f.contact_normal.x + d.y * f.contact_normal.y + d.z * f.contact_normal.z;
                s * s
            })
            .sum();
        assert!((eval_e_cls(&cs) - want).abs() < 1e-15);
    }
}
