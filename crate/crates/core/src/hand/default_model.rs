use std::f64::consts::{PI, SQRT_2};

use super::spec::*;

const PROXIMAL_LENGTH: f64 = 0.05;
const DISTAL_LENGTH: f64 = 0.025;
const FINGER_BASE_X: f64 = 0.035;
const FINGER_BASE_Y: f64 = 0.012;

fn proximal_link(seed: u64) -> LinkSpec {
    LinkSpec {
        bbox: BoxSpec {
            center: [0.0, 0.0, -PROXIMAL_LENGTH / 2.0],
            rotation: [0.0; 3],
            half_extents: [0.005, 0.009, PROXIMAL_LENGTH / 2.0],
        },
        cloud: CloudSpec::BoxSurface { count: 150, seed },
    }
}

fn distal_link(seed: u64) -> LinkSpec {
    LinkSpec {
        bbox: BoxSpec {
            center: [0.0, 0.0, -DISTAL_LENGTH / 2.0],
            rotation: [0.0; 3],
            half_extents: [0.004, 0.008, DISTAL_LENGTH / 2.0],
        },
        cloud: CloudSpec::BoxSurface { count: 100, seed },
    }
}

/// Compliant pad facing inward (-x) just past the end of the distal box, so a
/// pad pressed onto a surface does not drag the rigid link into it.
fn fingertip() -> PatchSpec {
    PatchSpec::SphericalCap {
        center: [-0.003, 0.0, -0.033],
        axis: [-1.0, 0.0, 0.0],
        radius: 0.01,
        half_angle: PI / 6.0,
        count: 216,
    }
}

fn flex_joints(alpha: Option<f64>, origin: FrameSpec, seed: u64) -> Vec<JointSpec> {
    vec![
        JointSpec {
            name: "proximal".into(),
            origin,
            axis: [0.0, 1.0, 0.0],
            q_min: -0.5,
            q_max: 0.5,
            q_mean: None,
            q_open: None,
            alpha,
            link: Some(proximal_link(seed)),
        },
        JointSpec {
            name: "distal".into(),
            origin: FrameSpec {
                translation: [0.0, 0.0, -PROXIMAL_LENGTH],
                rotation: [0.0; 3],
            },
            axis: [0.0, 1.0, 0.0],
            q_min: -0.5,
            q_max: 0.5,
            q_mean: None,
            q_open: None,
            alpha,
            link: Some(distal_link(seed + 1)),
        },
    ]
}

fn spread_finger(name: &str, y: f64, seed: u64) -> FingerSpec {
    let mut joints = vec![JointSpec {
        name: "spread".into(),
        origin: FrameSpec {
            translation: [FINGER_BASE_X, y, 0.0],
            rotation: [0.0; 3],
        },
        axis: [0.0, 0.0, 1.0],
        q_min: -0.5,
        q_max: 0.5,
        q_mean: None,
        q_open: Some(0.0),
        alpha: None,
        link: None,
    }];
    joints.extend(flex_joints(
        None,
        FrameSpec {
            translation: [0.0; 3],
            rotation: [0.0; 3],
        },
        seed,
    ));
    FingerSpec {
        name: name.into(),
        joints,
        fingertip: fingertip(),
    }
}

/// Three-finger hand: two spreading fingers facing a fixed opposing finger.
///
/// The palm frame's -z axis is the approach direction; fingers hang below the
/// palm and curl toward the hand axis. Fingers 1-2 have spread, proximal and
/// distal joints; finger 3 has proximal and distal joints with centering
/// weight sqrt(2). Surface samples: palm 400, each proximal link 150, each
/// distal link 100 and each fingertip 216, for 1798 in total.
pub fn default_hand_spec() -> HandSpec {
    let thumb = FingerSpec {
        name: "f3".into(),
        joints: flex_joints(
            Some(SQRT_2),
            FrameSpec {
                translation: [-FINGER_BASE_X, 0.0, 0.0],
                rotation: [0.0, 0.0, PI],
            },
            30,
        ),
        fingertip: fingertip(),
    };
    HandSpec {
        format_version: HAND_FORMAT_VERSION,
        name: "default-three-finger".into(),
        palm: LinkSpec {
            bbox: BoxSpec {
                center: [0.0, 0.0, 0.015],
                rotation: [0.0; 3],
                half_extents: [0.045, 0.04, 0.015],
            },
            cloud: CloudSpec::BoxSurface { count: 400, seed: 1 },
        },
        fingers: vec![spread_finger("f1", FINGER_BASE_Y, 10), spread_finger("f2", -FINGER_BASE_Y, 20), thumb],
    }
}
