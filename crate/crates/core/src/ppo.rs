//! Palm pose step: a linear least-squares problem in the palm twist
//! `x = [r, dt]`, with joints held fixed.

use nalgebra::{DMatrix, DVector, Vector6};
use serde::{Deserialize, Serialize};

use crate::collision::CollisionSet;
use crate::contact::ContactSet;
use crate::error::{GraspError, Result};
use crate::geometry::{so3_exp, AxisAngle, Vec3, GROUND_NORMAL};
use crate::hand::HandState;

/// Origin of a least-squares row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowTag {
    Com,
    Jc,
    Align,
    Obj,
    Gnd,
    Cls,
    /// Tikhonov rows `sqrt(mu) I x = 0` that penalize the step length.
    Step,
}

/// Appends `sqrt(rho * tr(M^T M) / n) * I` rows with zero targets.
pub(crate) fn append_step_rows(m: &DMatrix<f64>, v: &DVector<f64>, tags: &mut Vec<RowTag>, rho: f64) -> (DMatrix<f64>, DVector<f64>) {
    let (rows, n) = m.shape();
    let scale = (rho * m.norm_squared() / n as f64).sqrt();
    if rho <= 0.0 || scale == 0.0 {
        return (m.clone(), v.clone());
    }
    let mut out = DMatrix::zeros(rows + n, n);
    out.rows_mut(0, rows).copy_from(m);
    for k in 0..n {
        out[(rows + k, k)] = scale;
    }
    let mut rhs = DVector::zeros(rows + n);
    rhs.rows_mut(0, rows).copy_from(v);
    tags.extend(std::iter::repeat_n(RowTag::Step, n));
    (out, rhs)
}

/// Weights and offsets shared by the palm and joint systems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyParams {
    /// Penalty weight `w` on collision and closeness rows.
    pub w: f64,
    /// Alignment weight.
    pub beta: f64,
    /// Object-collision rows target `hand_point + clearance * hand_normal`.
    pub clearance: f64,
    /// Ground rows target this height instead of 0.
    pub ground_clearance: f64,
}

impl PenaltyParams {
    /// Exact penalty rows with no clearances.
    pub fn plain(w: f64, beta: f64) -> Self {
        PenaltyParams {
            w,
            beta,
            clearance: 0.0,
            ground_clearance: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpoSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub tags: Vec<RowTag>,
}

impl PpoSystem {
    pub fn rows(&self, tag: RowTag) -> impl Iterator<Item = usize> + '_ {
        self.tags.iter().enumerate().filter(move |(_, t)| **t == tag).map(|(k, _)| k)
    }

    /// Adds step-length damping relative to the system's scale; `rho = 0`
    /// leaves the system unchanged.
    pub fn with_step_damping(mut self, rho: f64) -> Self {
        let (a, b) = append_step_rows(&self.a, &self.b, &mut self.tags, rho);
        self.a = a;
        self.b = b;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PalmIncrement {
    pub r: AxisAngle,
    pub dt: Vec3,
}

impl PalmIncrement {
    pub fn zero() -> Self {
        PalmIncrement {
            r: AxisAngle::zero(),
            dt: Vec3::zeros(),
        }
    }
}

/// Per-step caps on the palm twist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustRegion {
    pub max_rotation: f64,
    pub max_translation: f64,
}

impl Default for TrustRegion {
    fn default() -> Self {
        TrustRegion {
            max_rotation: 0.3,
            max_translation: 0.02,
        }
    }
}

struct Rows {
    a: Vec<[f64; 6]>,
    b: Vec<f64>,
    tags: Vec<RowTag>,
}

impl Rows {
    fn push(&mut self, tag: RowTag, rot: Vec3, trans: Vec3, b: f64) {
        self.a.push([rot.x, rot.y, rot.z, trans.x, trans.y, trans.z]);
        self.b.push(b);
        self.tags.push(tag);
    }
}

/// Assembles the palm system. A palm twist moves a world point by
/// `r x p + dt`, so every row is linear in `x`.
pub fn build_ppo_system(
    contacts: &ContactSet,
    collisions: &CollisionSet,
    p_com: &Vec3,
    n_perp: &Vec3,
    params: &PenaltyParams,
) -> PpoSystem {
    let (w, beta) = (params.w, params.beta);
    let mut rows = Rows {
        a: Vec::new(),
        b: Vec::new(),
        tags: Vec::new(),
    };
    for f in &contacts.fingers {
        let p = f.tip_centroid;
        rows.push(RowTag::Com, p.cross(n_perp), *n_perp, n_perp.dot(&(p_com - p)));
    }
    for f in &contacts.fingers {
        let (nf, nc) = (f.tip_normal, f.contact_normal);
        rows.push(RowTag::Align, nf.cross(&nc) * beta, Vec3::zeros(), -beta * (nf.dot(&nc) + 1.0));
    }
    for pair in &collisions.object_pairs {
        let p = pair.penalty_point(params.clearance);
        let target = w * (pair.object_point - p);
        // rows of w [-p^, I]
        let hat = crate::geometry::so3_hat(&p);
        for k in 0..3 {
            let rot = -Vec3::new(hat[(k, 0)], hat[(k, 1)], hat[(k, 2)]) * w;
            let mut trans = Vec3::zeros();
            trans[k] = w;
            rows.push(RowTag::Obj, rot, trans, target[k]);
        }
    }
    for g in &collisions.ground_pairs {
        let p = g.hand_point;
        let n = GROUND_NORMAL;
        let height = (p - g.foot).dot(&n);
        rows.push(RowTag::Gnd, p.cross(&n) * w, n * w, w * (params.ground_clearance - height));
    }
    for f in &contacts.fingers {
        let (p, nc) = (f.tip_centroid, f.contact_normal);
        rows.push(RowTag::Cls, p.cross(&nc) * w, nc * w, w * (f.contact - p).dot(&nc));
    }
    let m = rows.b.len();
    PpoSystem {
        a: DMatrix::from_fn(m, 6, |r, c| rows.a[r][c]),
        b: DVector::from_vec(rows.b),
        tags: rows.tags,
    }
}

/// Damped normal equations `(A^T A + lambda I)^-1 A^T b` with
/// `lambda = 1e-9 tr(A^T A) / n`. Returns zeros for an all-zero system.
pub(crate) fn damped_least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let n = a.ncols();
    let mut ata = a.transpose() * a;
    let atb = a.transpose() * b;
    let lambda = 1e-9 * ata.trace() / n as f64;
    if lambda == 0.0 {
        return Some(DVector::zeros(n));
    }
    for k in 0..n {
        ata[(k, k)] += lambda;
    }
    ata.cholesky().map(|c| c.solve(&atb))
}

fn all_finite(a: &DMatrix<f64>, b: &DVector<f64>) -> bool {
    a.iter().chain(b.iter()).all(|v| v.is_finite())
}

/// Least-squares palm increment, scaled uniformly to fit the trust region.
pub fn solve_ppo(sys: &PpoSystem, trust: &TrustRegion) -> Result<PalmIncrement> {
    if !all_finite(&sys.a, &sys.b) {
        return Err(GraspError::IllPosedPpo);
    }
    let x = damped_least_squares(&sys.a, &sys.b).ok_or(GraspError::IllPosedPpo)?;
    let x = Vector6::from_iterator(x.iter().copied());
    if !x.iter().all(|v| v.is_finite()) {
        return Err(GraspError::IllPosedPpo);
    }
    let r = x.fixed_rows::<3>(0).into_owned();
    let dt = x.fixed_rows::<3>(3).into_owned();
    let mut scale: f64 = 1.0;
    if r.norm() > trust.max_rotation {
        scale = scale.min(trust.max_rotation / r.norm());
    }
    if dt.norm() > trust.max_translation {
        scale = scale.min(trust.max_translation / dt.norm());
    }
    Ok(PalmIncrement {
        r: AxisAngle(r * scale),
        dt: dt * scale,
    })
}

/// `R' = dR R`, `t' = dR t + dt`; joints unchanged.
pub fn apply_palm_update(state: &HandState, inc: &PalmIncrement) -> HandState {
    let dr = so3_exp(&inc.r);
    let mut next = state.clone();
    next.pose.rotation = dr * state.pose.rotation;
    next.pose.translation.vector = dr * state.pose.translation.vector + inc.dt;
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::{GroundPair, ObjectPair, Side};
    use crate::contact::FingerContact;
    use crate::geometry::{rigid, rotation_defect};
    use crate::hand::{HandModel, LinkId};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rv(rng: &mut ChaCha8Rng) -> Vec3 {
        Vec3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1))
    }

    fn ru(rng: &mut ChaCha8Rng) -> Vec3 {
        Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).normalize()
    }

    fn random_contacts(rng: &mut ChaCha8Rng, n: usize) -> ContactSet {
        ContactSet {
            fingers: (0..n)
                .map(|_| FingerContact {
                    contact: rv(rng),
                    contact_normal: ru(rng),
                    tip_centroid: rv(rng),
                    tip_normal: ru(rng),
                    matched: vec![],
                    fallback_normal: false,
                })
                .collect(),
        }
    }

    fn random_collisions(rng: &mut ChaCha8Rng, n_obj: usize, n_gnd: usize) -> CollisionSet {
        CollisionSet {
            object_pairs: (0..n_obj)
                .map(|i| {
                    let hp = rv(rng);
                    ObjectPair {
                        link: LinkId::Palm,
                        object_index: i,
                        hand_index: 0,
                        hand_point: hp,
                        hand_normal: ru(rng),
                        object_point: rv(rng),
                        side: Side::Inner,
                        face_point: hp,
                    }
                })
                .collect(),
            ground_pairs: (0..n_gnd)
                .map(|_| {
                    let p = Vec3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.02..0.0));
                    GroundPair {
                        link: LinkId::Palm,
                        hand_point: p,
                        foot: Vec3::new(p.x, p.y, 0.0),
                    }
                })
                .collect(),
        }
    }

    #[test]
    fn block_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cs = random_contacts(&mut rng, 3);
        let sys = build_ppo_system(&cs, &CollisionSet::default(), &Vec3::zeros(), &Vec3::z(), &PenaltyParams::plain(1.0, 0.03));
        assert_eq!(sys.a.nrows(), 9);
        let cols = random_collisions(&mut rng, 4, 5);
        let sys = build_ppo_system(&cs, &cols, &Vec3::zeros(), &Vec3::z(), &PenaltyParams::plain(1.0, 0.03));
        assert_eq!(sys.a.nrows(), 3 + 3 + 12 + 5 + 3);
        let order: Vec<RowTag> = sys.tags.iter().copied().fold(Vec::new(), |mut v, t| {
            if v.last() != Some(&t) {
                v.push(t);
            }
            v
        });
        assert_eq!(order, vec![RowTag::Com, RowTag::Align, RowTag::Obj, RowTag::Gnd, RowTag::Cls]);
    }

    #[test]
    fn satisfied_grasp_has_zero_rhs() {
        let p_com = Vec3::new(0.01, 0.02, 0.03);
        let normals = [Vec3::x(), -Vec3::x(), Vec3::y()];
        let cs = ContactSet {
            fingers: normals
                .iter()
                .map(|n| FingerContact {
                    contact: p_com,
                    contact_normal: -n,
                    tip_centroid: p_com,
                    tip_normal: *n,
                    matched: vec![],
                    fallback_normal: false,
                })
                .collect(),
        };
        let sys = build_ppo_system(&cs, &CollisionSet::default(), &p_com, &Vec3::z(), &PenaltyParams::plain(2.0, 0.03));
        assert!(sys.b.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rows_match_formula_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cs = random_contacts(&mut rng, 3);
        let cols = random_collisions(&mut rng, 2, 2);
        let (p_com, n_perp) = (rv(&mut rng), ru(&mut rng));
        let (w, beta) = (1.7, 0.03);
        let sys = build_ppo_system(&cs, &cols, &p_com, &n_perp, &PenaltyParams::plain(w, beta));
        let cross = |a: Vec3, b: Vec3| [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
        let dot = |a: Vec3, b: Vec3| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        let mut want_a: Vec<[f64; 6]> = Vec::new();
        let mut want_b = Vec::new();
        for f in &cs.fingers {
            let c = cross(f.tip_centroid, n_perp);
            want_a.push([c[0], c[1], c[2], n_perp[0], n_perp[1], n_perp[2]]);
            want_b.push(dot(n_perp, p_com - f.tip_centroid));
        }
        for f in &cs.fingers {
            let c = cross(f.tip_normal, f.contact_normal);
            want_a.push([beta * c[0], beta * c[1], beta * c[2], 0.0, 0.0, 0.0]);
            want_b.push(-beta * (dot(f.tip_normal, f.contact_normal) + 1.0));
        }
        for pr in &cols.object_pairs {
            let p = pr.hand_point;
            // -p^ rows
            let m = [[0.0, p[2], -p[1]], [-p[2], 0.0, p[0]], [p[1], -p[0], 0.0]];
            for k in 0..3 {
                let mut row = [w * m[k][0], w * m[k][1], w * m[k][2], 0.0, 0.0, 0.0];
                row[3 + k] = w;
                want_a.push(row);
                want_b.push(w * (pr.object_point[k] - p[k]));
            }
        }
        for g in &cols.ground_pairs {
            let c = cross(g.hand_point, Vec3::z());
            want_a.push([w * c[0], w * c[1], w * c[2], 0.0, 0.0, w]);
            want_b.push(-w * g.hand_point[2]);
        }
        for f in &cs.fingers {
            let c = cross(f.tip_centroid, f.contact_normal);
            let n = f.contact_normal;
            want_a.push([w * c[0], w * c[1], w * c[2], w * n[0], w * n[1], w * n[2]]);
            want_b.push(w * dot(f.contact - f.tip_centroid, n));
        }
        assert_eq!(sys.a.nrows(), want_a.len());
        for r in 0..want_a.len() {
            for c in 0..6 {
                assert!((sys.a[(r, c)] - want_a[r][c]).abs() < 1e-15, "a[{r},{c}]");
            }
            assert!((sys.b[r] - want_b[r]).abs() < 1e-15, "b[{r}]");
        }
    }

    #[test]
    fn linearization_matches_finite_motion() {
        // each row predicts the first-order change of its residual under a small twist
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = rv(&mut rng);
        let n = ru(&mut rng);
        let x = Vector6::new(1e-6, -2e-6, 0.5e-6, 3e-6, 1e-6, -2e-6);
        let r = AxisAngle(x.fixed_rows::<3>(0).into_owned());
        let moved = so3_exp(&r) * p + x.fixed_rows::<3>(3);
        let row = [p.cross(&n), n];
        let pred = row[0].dot(&r.0) + row[1].dot(&x.fixed_rows::<3>(3).into_owned());
        assert!(((moved - p).dot(&n) - pred).abs() < 1e-11);
    }

    fn sys(a: DMatrix<f64>, b: DVector<f64>) -> PpoSystem {
        let tags = vec![RowTag::Com; a.nrows()];
        PpoSystem { a, b, tags }
    }

    fn big() -> TrustRegion {
        TrustRegion {
            max_rotation: f64::INFINITY,
            max_translation: f64::INFINITY,
        }
    }

    #[test]
    fn identity_system_returns_rhs() {
        let b = DVector::from_vec(vec![0.01, -0.02, 0.03, 0.004, 0.005, -0.006]);
        let inc = solve_ppo(&sys(DMatrix::identity(6, 6), b.clone()), &big()).unwrap();
        for k in 0..3 {
            assert!((inc.r.0[k] - b[k]).abs() < 1e-9);
            assert!((inc.dt[k] - b[k + 3]).abs() < 1e-9);
        }
        let zero = solve_ppo(&sys(DMatrix::identity(6, 6), DVector::zeros(6)), &big()).unwrap();
        assert_eq!(zero, PalmIncrement::zero());
        let empty = solve_ppo(&sys(DMatrix::zeros(0, 6), DVector::zeros(0)), &big()).unwrap();
        assert_eq!(empty, PalmIncrement::zero());
    }

    #[test]
    fn matches_qr_oracle_and_is_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let a = DMatrix::from_fn(12, 6, |_, _| rng.random_range(-1.0..1.0));
            let b = DVector::from_fn(12, |_, _| rng.random_range(-1.0..1.0));
            let qr = a.clone().qr();
            let want = qr.r().solve_upper_triangular(&(qr.q().transpose() * &b)).unwrap();
            let inc = solve_ppo(&sys(a.clone(), b.clone()), &big()).unwrap();
            let x = DVector::from_iterator(6, inc.r.0.iter().chain(inc.dt.iter()).copied());
            assert!((&x - &want).amax() < 1e-8);
            let grad = a.transpose() * (&a * &x - &b);
            assert!(grad.norm() <= 1e-6 * (a.transpose() * &b).norm());
            assert!((&a * &x - &b).norm() <= b.norm());
        }
    }

    #[test]
    fn trust_region_scales_uniformly() {
        let b = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.001]);
        let inc = solve_ppo(&sys(DMatrix::identity(6, 6), b), &TrustRegion::default()).unwrap();
        assert!((inc.r.0.norm() - 0.3).abs() < 1e-9);
        assert!((inc.dt.z - 0.0003).abs() < 1e-9);
    }

    #[test]
    fn non_finite_is_ill_posed() {
        let mut a = DMatrix::identity(6, 6);
        a[(2, 2)] = f64::NAN;
        let err = solve_ppo(&sys(a, DVector::zeros(6)), &big()).unwrap_err();
        assert_eq!(err.to_string(), "ill-posed PPO system");
    }

    #[test]
    fn palm_update_composes() {
        let model = HandModel::default_three_finger();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let state = HandState::open(&model, rigid(so3_exp(&AxisAngle(ru(&mut rng))), rv(&mut rng)));
        assert_eq!(apply_palm_update(&state, &PalmIncrement::zero()), state);
        let d = Vec3::new(0.01, -0.02, 0.005);
        let moved = apply_palm_update(&state, &PalmIncrement { r: AxisAngle::zero(), dt: d });
        assert_eq!(moved.pose.rotation, state.pose.rotation);
        assert!((moved.pose.translation.vector - state.pose.translation.vector - d).norm() < 1e-15);
        let a = PalmIncrement { r: AxisAngle(ru(&mut rng) * 0.2), dt: rv(&mut rng) };
        let b = PalmIncrement { r: AxisAngle(ru(&mut rng) * 0.1), dt: rv(&mut rng) };
        let twice = apply_palm_update(&apply_palm_update(&state, &a), &b);
        let ta = rigid(so3_exp(&a.r), a.dt);
        let tb = rigid(so3_exp(&b.r), b.dt);
        let once = tb * ta * state.pose;
        assert!((twice.pose.rotation.matrix() - once.rotation.matrix()).amax() < 1e-12);
        assert!((twice.pose.translation.vector - once.translation.vector).norm() < 1e-12);
        let (orth, det) = rotation_defect(&twice.pose.rotation);
        assert!(orth < 1e-12 && det < 1e-12);
        assert_eq!(twice.q(), state.q());
    }
}
