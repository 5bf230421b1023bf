use grasp_core::contact::{assign_contacts, evaluate_quality, IndexedCloud};
use grasp_core::exec::Execution;
use grasp_core::geometry::{rigid, rotation_defect, sample_mesh, so3_exp, so3_log, AxisAngle, Vec3};
use grasp_core::hand::{forward_kinematics, translational_jacobian, HandModel, HandState, LinkId};
use grasp_core::hand::point_jacobian;
use grasp_core::jpo::{solve_box_ls, BoxSolverParams, JpoSystem};
use grasp_core::planner::approach_direction;
use grasp_core::ppo::{apply_palm_update, solve_ppo, PalmIncrement, PpoSystem, RowTag, TrustRegion};
use grasp_core::shapes::{on_ground, uv_sphere};
use nalgebra::{DMatrix, DVector, Point3};
use proptest::prelude::*;

fn vec3(range: f64) -> impl Strategy<Value = Vec3> {
    (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn unit_fractions(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.01..0.99f64, n)
}

fn state(model: &HandModel, r: Vec3, t: Vec3, fractions: &[f64]) -> HandState {
    let q = model.joints().zip(fractions).map(|(j, f)| j.q_min + f * j.range()).collect();
    HandState::new(model, rigid(so3_exp(&AxisAngle(r)), t), q).unwrap()
}

fn sphere() -> IndexedCloud {
    let mesh = on_ground(uv_sphere(0.05, 24, 48));
    IndexedCloud::new(sample_mesh(&mesh.triangles(), 2000, 5).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exp_is_a_rotation_and_log_inverts_it(r in vec3(1.8)) {
        prop_assume!(r.norm() < std::f64::consts::PI - 1e-3);
        let rot = so3_exp(&AxisAngle(r));
        let (orth, det) = rotation_defect(&rot);
        prop_assert!(orth < 1e-12 && det < 1e-12);
        prop_assert!((so3_log(&rot).0 - r).norm() < 1e-9);
    }

    #[test]
    fn fingertip_jacobian_matches_finite_differences(
        r in vec3(3.0), t in vec3(0.2), f in unit_fractions(8), finger in 0usize..3,
    ) {
        let model = HandModel::default_three_finger();
        let s = state(&model, r, t, &f);
        let jac = translational_jacobian(&model, &s, finger);
        let offset = model.fingers[finger].joint_offset;
        let inv = s.pose.inverse();
        let h = 1e-6;
        let mut fd = DMatrix::zeros(3, jac.ncols());
        for c in 0..jac.ncols() {
            let tip = |d: f64| {
                let mut q = s.q().to_vec();
                q[offset + c] += d;
                let p = forward_kinematics(&model, &HandState::new(&model, s.pose, q).unwrap()).fingers[finger].tip_centroid;
                (inv * Point3::from(p)).coords
            };
            fd.set_column(c, &((tip(h) - tip(-h)) / (2.0 * h)));
        }
        prop_assert!((&jac - &fd).norm() <= 1e-5 * jac.norm().max(1e-12));
    }

    #[test]
    fn point_jacobian_at_tip_centroid_restricts_to_fingertip_jacobian(
        r in vec3(3.0), t in vec3(0.2), f in unit_fractions(8), finger in 0usize..3,
    ) {
        let model = HandModel::default_three_finger();
        let s = state(&model, r, t, &f);
        let posed = forward_kinematics(&model, &s);
        let last = model.fingers[finger].joints.len() - 1;
        let p = posed.fingers[finger].tip_centroid;
        let full = point_jacobian(&model, &s, LinkId::Finger { finger, joint: last }, &p);
        let tip = translational_jacobian(&model, &s, finger);
        let offset = model.fingers[finger].joint_offset;
        prop_assert!((full.columns(offset, tip.ncols()) - &tip).norm() < 1e-12);
        let other = full.norm_squared() - full.columns(offset, tip.ncols()).norm_squared();
        prop_assert!(other == 0.0);
        prop_assert!(point_jacobian(&model, &s, LinkId::Palm, &p).norm() == 0.0);
    }

    #[test]
    fn quality_is_rigid_invariant_and_signed(
        r in vec3(3.0), t in vec3(0.3), f in unit_fractions(8), tilt in vec3(0.3),
    ) {
        let model = HandModel::default_three_finger();
        let object = sphere();
        let pose = rigid(so3_exp(&AxisAngle(Vec3::new(std::f64::consts::PI, 0.0, 0.0) + tilt)), Vec3::new(0.0, 0.0, 0.13));
        let s = HandState::new(&model, pose, state(&model, Vec3::zeros(), Vec3::zeros(), &f).q().to_vec()).unwrap();
        let quality = |s: &HandState, obj: &IndexedCloud| {
            let contacts = assign_contacts(&forward_kinematics(&model, s), obj, Execution::Sequential);
            evaluate_quality(&contacts, s.q(), &model, &obj.cloud.center_of_mass(), &approach_direction(s), 0.03).unwrap()
        };
        let a = quality(&s, &object);
        prop_assert!(a.q_com <= 0.0 && a.q_jc <= 0.0 && a.q_align <= 0.0 && a.e_cls >= 0.0);

        let tf = rigid(so3_exp(&AxisAngle(r)), t);
        let moved_obj = IndexedCloud::new(object.cloud.transformed(&tf)).unwrap();
        let mut moved = s.clone();
        moved.pose = tf * s.pose;
        let b = quality(&moved, &moved_obj);
        prop_assert!((a.q_com - b.q_com).abs() < 1e-12);
        prop_assert!((a.q_align - b.q_align).abs() < 1e-12);
        prop_assert!(a.q_jc == b.q_jc);
        prop_assert!((a.e_cls - b.e_cls).abs() < 1e-12);
    }

    #[test]
    fn palm_step_never_worsens_the_linear_model(
        rows in 6usize..30, seed in any::<u64>(), rot_cap in 0.01..1.0f64, trans_cap in 0.001..0.1f64,
    ) {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(rows, 6, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(rows, |_, _| rng.random_range(-1.0..1.0));
        let sys = PpoSystem { a: a.clone(), b: b.clone(), tags: vec![RowTag::Obj; rows] };
        let trust = TrustRegion { max_rotation: rot_cap, max_translation: trans_cap };
        let inc = solve_ppo(&sys, &trust).unwrap();
        prop_assert!(inc.r.0.norm() <= rot_cap * (1.0 + 1e-12));
        prop_assert!(inc.dt.norm() <= trans_cap * (1.0 + 1e-12));
        let x = DVector::from_iterator(6, inc.r.0.iter().chain(inc.dt.iter()).copied());
        prop_assert!((&a * x - &b).norm_squared() <= b.norm_squared() * (1.0 + 1e-12));

        let model = HandModel::default_three_finger();
        let mut s = HandState::open(&model, rigid(so3_exp(&AxisAngle(Vec3::new(0.3, -1.0, 2.0))), Vec3::zeros()));
        for _ in 0..50 {
            s = apply_palm_update(&s, &inc);
        }
        let (orth, det) = rotation_defect(&s.pose.rotation);
        prop_assert!(orth < 1e-10 && det < 1e-10);
        prop_assert_eq!(apply_palm_update(&s, &PalmIncrement::zero()), s);
    }

    #[test]
    fn joint_step_is_feasible_and_improves(
        n in 1usize..9, extra in 0usize..12, seed in any::<u64>(),
    ) {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let m = n + extra;
        let c = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let d = DVector::from_fn(m, |_, _| rng.random_range(-3.0..3.0));
        let lo = DVector::from_fn(n, |_, _| -rng.random_range(0.0..1.0));
        let hi = DVector::from_fn(n, |_, _| rng.random_range(0.0..1.0));
        let sys = JpoSystem { c: c.clone(), d: d.clone(), lo: lo.clone(), hi: hi.clone(), tags: vec![RowTag::Jc; m] };
        let sol = solve_box_ls(&sys, &BoxSolverParams::default()).unwrap();
        for i in 0..n {
            prop_assert!(sol.dq[i] >= lo[i] && sol.dq[i] <= hi[i]);
        }
        let obj = sys.objective(&sol.dq);
        prop_assert!(obj <= d.norm_squared());
        let warm = c.clone().svd(true, true).solve(&d, 1e-12).unwrap();
        let clamped = DVector::from_fn(n, |i, _| warm[i].clamp(lo[i], hi[i]));
        prop_assert!(obj <= sys.objective(&clamped) + 1e-9 * d.norm_squared());
    }
}

#[test]
fn sphere_contact_normals_are_radial() {
    let model = HandModel::default_three_finger();
    let object = sphere();
    let center = object.cloud.center_of_mass();
    let pose = rigid(so3_exp(&AxisAngle(Vec3::new(std::f64::consts::PI, 0.0, 0.0))), Vec3::new(0.0, 0.0, 0.14));
    let s = HandState::open(&model, pose);
    let contacts = assign_contacts(&forward_kinematics(&model, &s), &object, Execution::Sequential);
    for f in &contacts.fingers {
        let radial = (f.contact - center).normalize();
        let angle = f.contact_normal.dot(&radial).clamp(-1.0, 1.0).acos();
        assert!(angle < 5f64.to_radians(), "normal {:.2} deg off radial", angle.to_degrees());
    }
}
