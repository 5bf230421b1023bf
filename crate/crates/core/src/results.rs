//! Machine-readable run outputs.
//!
//! A run produces two JSON documents. The results file holds everything that
//! is a function of the inputs, seed and worker count, so two identical runs
//! write identical bytes. The manifest adds what is not reproducible: wall
//! times and the code version. Per-iteration traces export as CSV.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{GraspError, Result};
use crate::geometry::RigidTransform;
use crate::hand::HandState;
use crate::planner::{GraspResult, IterationRecord, PlanOutput, PlannerConfig};

pub const RESULTS_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// JSON has no encoding for NaN or infinity.
fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseRecord {
    /// Row-major rotation matrix.
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl From<&RigidTransform> for PoseRecord {
    fn from(t: &RigidTransform) -> Self {
        let r = t.rotation.matrix();
        PoseRecord {
            rotation: std::array::from_fn(|i| std::array::from_fn(|j| r[(i, j)])),
            translation: [t.translation.x, t.translation.y, t.translation.z],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateRecord {
    pub pose: PoseRecord,
    pub q: Vec<f64>,
}

impl From<&HandState> for StateRecord {
    fn from(s: &HandState) -> Self {
        StateRecord {
            pose: PoseRecord::from(&s.pose),
            q: s.q().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactRecord {
    pub contact: [f64; 3],
    pub normal: [f64; 3],
    pub tip_centroid: [f64; 3],
    pub fallback_normal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraspRecord {
    /// Position in the quality ranking, best first.
    pub rank: usize,
    /// Position in draw order.
    pub sample: usize,
    pub cluster: usize,
    pub accepted: bool,
    pub collision_free: bool,
    pub error: Option<String>,
    pub e_quality: Option<f64>,
    pub q_com: Option<f64>,
    pub q_jc: Option<f64>,
    pub q_align: Option<f64>,
    pub e_cls: Option<f64>,
    pub e_col: Option<f64>,
    pub object_pairs: usize,
    pub ground_pairs: usize,
    pub initial_state: StateRecord,
    pub state: StateRecord,
    pub contacts: Vec<ContactRecord>,
    pub trace: Vec<IterationRecord>,
}

impl GraspRecord {
    pub fn new(rank: usize, r: &GraspResult) -> Self {
        let q = r.quality.as_ref();
        let contacts = r
            .contacts
            .iter()
            .flat_map(|c| &c.fingers)
            .map(|f| ContactRecord {
                contact: f.contact.into(),
                normal: f.contact_normal.into(),
                tip_centroid: f.tip_centroid.into(),
                fallback_normal: f.fallback_normal,
            })
            .collect();
        GraspRecord {
            rank,
            sample: r.sample,
            cluster: r.cluster,
            accepted: r.accepted,
            collision_free: r.collision_free,
            error: r.error.clone(),
            e_quality: finite(r.e_quality()),
            q_com: q.and_then(|q| finite(q.q_com)),
            q_jc: q.and_then(|q| finite(q.q_jc)),
            q_align: q.and_then(|q| finite(q.q_align)),
            e_cls: q.and_then(|q| finite(q.e_cls)),
            e_col: finite(r.e_col),
            object_pairs: r.object_pairs,
            ground_pairs: r.ground_pairs,
            initial_state: StateRecord::from(&r.initial_state),
            state: StateRecord::from(&r.state),
            contacts,
            trace: r.trace.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterRecord {
    pub center: [f64; 3],
    pub normal: [f64; 3],
    pub trials: u32,
    pub successes: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub samples: usize,
    pub accepted: usize,
    pub collision_free: usize,
    pub errors: usize,
}

impl Summary {
    pub fn of<'a>(results: impl IntoIterator<Item = &'a GraspResult>) -> Self {
        let mut s = Summary {
            samples: 0,
            accepted: 0,
            collision_free: 0,
            errors: 0,
        };
        for r in results {
            s.samples += 1;
            s.accepted += r.accepted as usize;
            s.collision_free += r.collision_free as usize;
            s.errors += r.error.is_some() as usize;
        }
        s
    }
}

/// Paths exactly as given on input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub object: String,
    /// `None` for the built-in hand.
    pub hand: Option<String>,
    pub object_points: usize,
    pub hand_points: usize,
}

/// Deterministic record of a planning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultsFile {
    pub schema_version: u32,
    pub inputs: Inputs,
    pub config: PlannerConfig,
    pub summary: Summary,
    pub clusters: Vec<ClusterRecord>,
    pub grasps: Vec<GraspRecord>,
}

impl ResultsFile {
    pub fn new(inputs: Inputs, config: &PlannerConfig, out: &PlanOutput) -> Self {
        let s = &out.sampler;
        let clusters = (0..s.len())
            .map(|k| ClusterRecord {
                center: s.centers[k].into(),
                normal: s.normals[k].into(),
                trials: s.trials[k],
                successes: s.successes[k],
            })
            .collect();
        ResultsFile {
            schema_version: RESULTS_SCHEMA_VERSION,
            inputs,
            config: config.clone(),
            summary: Summary::of(&out.results),
            clusters,
            grasps: out.results.iter().enumerate().map(|(i, r)| GraspRecord::new(i, r)).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("results serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: ResultsFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let inner = e.inner();
            format!("line {} column {}: {} at `{}`", inner.line(), inner.column(), inner, e.path())
        })?;
        if file.schema_version != RESULTS_SCHEMA_VERSION {
            return Err(format!(
                "unsupported schema_version {} (expected {RESULTS_SCHEMA_VERSION})",
                file.schema_version
            ));
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GraspError::io(path, e))?;
        Self::from_json(&text).map_err(|m| GraspError::parse(path, m))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestGrasp {
    pub sample: usize,
    pub cluster: usize,
    pub accepted: bool,
    pub collision_free: bool,
    pub iterations: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestStats {
    pub samples: usize,
    pub accepted: usize,
    pub collision_free: usize,
    /// Sum of per-sample wall times.
    pub total_sample_time_s: f64,
    /// Zero when there are no samples.
    pub mean_sample_time_s: f64,
    pub max_sample_time_s: f64,
}

impl ManifestStats {
    pub fn of(grasps: &[ManifestGrasp]) -> Self {
        let total: f64 = grasps.iter().map(|g| g.wall_time_s).sum();
        ManifestStats {
            samples: grasps.len(),
            accepted: grasps.iter().filter(|g| g.accepted).count(),
            collision_free: grasps.iter().filter(|g| g.collision_free).count(),
            total_sample_time_s: total,
            mean_sample_time_s: if grasps.is_empty() { 0.0 } else { total / grasps.len() as f64 },
            max_sample_time_s: grasps.iter().map(|g| g.wall_time_s).fold(0.0, f64::max),
        }
    }
}

/// Run provenance and timings. Stats are recomputable from `grasps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub schema_version: u32,
    pub code_version: String,
    pub inputs: Inputs,
    pub seed: u64,
    pub config: PlannerConfig,
    /// Grasps in draw order.
    pub grasps: Vec<ManifestGrasp>,
    pub stats: ManifestStats,
    /// Whole `plan` call, including clustering.
    pub plan_wall_time_s: f64,
}

impl RunManifest {
    pub fn new(inputs: Inputs, config: &PlannerConfig, out: &PlanOutput, plan_wall_time_s: f64) -> Self {
        let mut grasps: Vec<ManifestGrasp> = out
            .results
            .iter()
            .map(|r| ManifestGrasp {
                sample: r.sample,
                cluster: r.cluster,
                accepted: r.accepted,
                collision_free: r.collision_free,
                iterations: r.trace.len(),
                wall_time_s: r.wall_time.as_secs_f64(),
            })
            .collect();
        grasps.sort_by_key(|g| g.sample);
        let stats = ManifestStats::of(&grasps);
        RunManifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            code_version: CODE_VERSION.to_string(),
            inputs,
            seed: config.seed,
            config: config.clone(),
            grasps,
            stats,
            plan_wall_time_s,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serialize");
        s.push('\n');
        s
    }
}

pub const TRACE_HEADER: &str = "sample,t,w,e_quality,e_penalty,e_col,e_cls";

/// One row per recorded iteration, grasps in the given order.
pub fn trace_csv<'a>(grasps: impl IntoIterator<Item = &'a GraspRecord>) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for g in grasps {
        for r in &g.trace {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                g.sample, r.t, r.w, r.e_quality, r.e_penalty, r.e_col, r.e_cls
            )
            .unwrap();
        }
    }
    out
}

pub const TRACE_BANDS_HEADER: &str = "t,runs,e_quality_mean,e_quality_std,e_penalty_mean,e_penalty_std";

/// Mean and population standard deviation of both objectives at each `t`,
/// over every grasp whose trace reaches it.
pub fn trace_bands_csv(grasps: &[GraspRecord]) -> String {
    let t_end = grasps.iter().map(|g| g.trace.len()).max().unwrap_or(0);
    let mut out = String::from(TRACE_BANDS_HEADER);
    out.push('\n');
    for t in 0..t_end {
        let rows: Vec<&IterationRecord> = grasps.iter().filter_map(|g| g.trace.get(t)).collect();
        let (mq, sq) = mean_std(rows.iter().map(|r| r.e_quality));
        let (mp, sp) = mean_std(rows.iter().map(|r| r.e_penalty));
        writeln!(out, "{t},{},{mq},{sq},{mp},{sp}", rows.len()).unwrap();
    }
    out
}

/// Mean and population standard deviation.
pub fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    if n == 0.0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
