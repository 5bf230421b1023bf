//! On-disk hand description.
//!
//! A hand file is JSON with a `format_version` field. Frames are given as a
//! translation plus an axis-angle rotation (radians); all lengths are meters.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "name": "example",
//!   "palm": { "box": { "center": [0, 0, 0.015], "half_extents": [0.045, 0.04, 0.015] },
//!             "cloud": { "box_surface": { "count": 400, "seed": 1 } } },
//!   "fingers": [
//!     { "name": "f1",
//!       "joints": [
//!         { "name": "proximal", "origin": { "translation": [0.035, 0, 0] }, "axis": [0, 1, 0],
//!           "q_min": -0.5, "q_max": 0.7,
//!           "link": { "box": { "center": [0, 0, -0.025], "half_extents": [0.007, 0.009, 0.025] },
//!                     "cloud": { "box_surface": { "count": 150, "seed": 2 } } } }
//!       ],
//!       "fingertip": { "spherical_cap": { "center": [0.0, 0, -0.03], "axis": [-1, 0, 0],
//!                                         "radius": 0.012, "half_angle": 0.5236, "count": 216 } } }
//!   ]
//! }
//! ```
//!
//! Optional joint fields: `q_mean` (defaults to the range midpoint), `q_open`
//! (the pose the planner starts from, defaults to `q_min`) and `alpha` (the
//! joint-centering weight, defaults to 1).

use serde::{Deserialize, Serialize};

pub const HAND_FORMAT_VERSION: u32 = 1;

fn is_zero3(v: &[f64; 3]) -> bool {
    *v == [0.0; 3]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandSpec {
    pub format_version: u32,
    pub name: String,
    pub palm: LinkSpec,
    pub fingers: Vec<FingerSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FingerSpec {
    pub name: String,
    pub joints: Vec<JointSpec>,
    /// Contact surface, expressed in the frame of the last joint.
    pub fingertip: PatchSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    pub name: String,
    /// Joint frame in the parent frame (palm for the first joint).
    pub origin: FrameSpec,
    pub axis: [f64; 3],
    pub q_min: f64,
    pub q_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_open: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Rigid body moved by this joint, in the joint frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<LinkSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSpec {
    pub translation: [f64; 3],
    #[serde(default, skip_serializing_if = "is_zero3")]
    pub rotation: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    #[serde(rename = "box")]
    pub bbox: BoxSpec,
    pub cloud: CloudSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub center: [f64; 3],
    #[serde(default, skip_serializing_if = "is_zero3")]
    pub rotation: [f64; 3],
    pub half_extents: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloudSpec {
    /// Uniform samples on the link box surface.
    BoxSurface { count: usize, seed: u64 },
    Explicit { points: Vec<[f64; 3]>, normals: Vec<[f64; 3]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchSpec {
    /// Area-uniform spiral samples on a spherical cap; normals point out of
    /// the sphere.
    SphericalCap {
        center: [f64; 3],
        axis: [f64; 3],
        radius: f64,
        half_angle: f64,
        count: usize,
    },
    Explicit { points: Vec<[f64; 3]>, normals: Vec<[f64; 3]> },
}

impl HandSpec {
    pub fn from_json(text: &str) -> Result<HandSpec, String> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            format!("field `{path}`: {inner}")
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("hand spec serializes");
        s.push('\n');
        s
    }
}
