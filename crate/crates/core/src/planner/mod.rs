//! Outer sampling loop and the alternating palm/joint optimization.

mod sampler;

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use sampler::{draw_initial_state, init_sampler, place_hand, SamplerState};

use crate::collision::{detect_collisions, eval_e_col, CollisionSet, DEFAULT_BOX_MARGIN};
use crate::contact::{assign_contacts, evaluate_quality, ContactSet, IndexedCloud, QualityReport};
use crate::error::{GraspError, Result};
use crate::exec::{map_slice, with_workers, Execution};
use crate::geometry::Vec3;
use crate::hand::{forward_kinematics, HandModel, HandState, PosedHand};
use crate::jpo::{apply_joint_update, build_jpo_system, solve_box_ls, BoxSolverParams};
use crate::ppo::{apply_palm_update, build_ppo_system, solve_ppo, PenaltyParams, TrustRegion};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerConfig {
    /// Last iteration index; the loop runs `t = 0..=t_max`.
    pub t_max: usize,
    pub w0: f64,
    pub w_growth: f64,
    pub beta: f64,
    pub n_samples: usize,
    pub k_clusters: usize,
    /// Initial palm distance from the chosen cluster center (m).
    pub standoff: f64,
    pub seed: u64,
    /// Largest accepted closeness error (m^2).
    pub e_cls_tol: f64,
    /// Link boxes are enlarged by this much for detection (m).
    pub box_margin: f64,
    /// Object-collision rows push link faces this far past the object (m).
    pub clearance: f64,
    /// Ground rows lift colliding points to this height (m).
    pub ground_clearance: f64,
    pub trust_region: TrustRegion,
    /// Relative step damping of the palm system (0 disables it).
    pub ppo_step_damping: f64,
    /// Relative step damping of the joint system (0 disables it).
    pub jpo_step_damping: f64,
    pub box_solver: BoxSolverParams,
    /// Samples run concurrently in batches of this size.
    pub workers: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            t_max: 40,
            w0: 1.0,
            w_growth: 1.1,
            beta: 0.03,
            n_samples: 10,
            k_clusters: 10,
            standoff: 0.10,
            seed: 0,
            e_cls_tol: 1e-4,
            box_margin: DEFAULT_BOX_MARGIN,
            clearance: 0.008,
            ground_clearance: 0.001,
            trust_region: TrustRegion::default(),
            ppo_step_damping: 1e-4,
            jpo_step_damping: 1e-4,
            box_solver: BoxSolverParams::default(),
            workers: 4,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(GraspError::InvalidConfig(m.to_string()));
        let positive = [
            ("w0", self.w0),
            ("beta", self.beta),
            ("standoff", self.standoff),
            ("e_cls_tol", self.e_cls_tol),
            ("trust_region.max_rotation", self.trust_region.max_rotation),
            ("trust_region.max_translation", self.trust_region.max_translation),
            ("box_solver.tolerance", self.box_solver.tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be positive and finite, got {v}"));
            }
        }
        let non_negative = [
            ("box_margin", self.box_margin),
            ("clearance", self.clearance),
            ("ground_clearance", self.ground_clearance),
            ("ppo_step_damping", self.ppo_step_damping),
            ("jpo_step_damping", self.jpo_step_damping),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be non-negative, got {v}"));
            }
        }
        if !(self.w_growth >= 1.0 && self.w_growth.is_finite()) {
            return bad(&format!("w_growth must be at least 1, got {}", self.w_growth));
        }
        if self.k_clusters == 0 {
            return bad("k_clusters must be positive");
        }
        if self.workers == 0 {
            return bad("workers must be positive");
        }
        if self.box_solver.power_iterations == 0 {
            return bad("box_solver.power_iterations must be positive");
        }
        Ok(())
    }

    /// Penalty weight of iteration `t`: `w0 * w_growth^t`.
    pub fn penalty_weight(&self, t: usize) -> f64 {
        self.w0 * self.w_growth.powf(t as f64)
    }

    fn penalty(&self, t: usize) -> PenaltyParams {
        PenaltyParams {
            w: self.penalty_weight(t),
            beta: self.beta,
            clearance: self.clearance,
            ground_clearance: self.ground_clearance,
        }
    }
}

/// Objective values at one iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    pub w: f64,
    /// `-Q_com - Q_jc - Q_align`
    pub e_quality: f64,
    /// `E_col + E_cls`, unweighted.
    pub e_penalty: f64,
    pub e_col: f64,
    pub e_cls: f64,
    pub object_pairs: usize,
    pub ground_pairs: usize,
}

/// Everything known about the hand at one configuration.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub posed: PosedHand,
    pub contacts: ContactSet,
    pub collisions: CollisionSet,
    pub quality: QualityReport,
    pub e_col: f64,
}

impl Evaluation {
    pub fn record(&self, t: usize, w: f64) -> IterationRecord {
        IterationRecord {
            t,
            w,
            e_quality: self.quality.e_quality(),
            e_penalty: self.e_col + self.quality.e_cls,
            e_col: self.e_col,
            e_cls: self.quality.e_cls,
            object_pairs: self.collisions.object_pairs.len(),
            ground_pairs: self.collisions.ground_pairs.len(),
        }
    }
}

/// Approach direction (palm -z) in the world frame.
pub fn approach_direction(state: &HandState) -> Vec3 {
    -(state.pose.rotation * Vec3::z())
}

/// Forward kinematics, contact assignment, collision detection and quality.
pub fn evaluate(state: &HandState, object: &IndexedCloud, model: &HandModel, cfg: &PlannerConfig) -> Result<Evaluation> {
    let exec = Execution::Sequential;
    let posed = forward_kinematics(model, state);
    let contacts = assign_contacts(&posed, object, exec);
    let collisions = detect_collisions(&posed, object, cfg.box_margin, exec);
    let p_com = object.cloud.center_of_mass();
    let quality = evaluate_quality(&contacts, state.q(), model, &p_com, &approach_direction(state), cfg.beta)?;
    let e_col = eval_e_col(&collisions);
    Ok(Evaluation {
        posed,
        contacts,
        collisions,
        quality,
        e_col,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraspResult {
    /// Position of the sample in draw order.
    pub sample: usize,
    pub cluster: usize,
    pub initial_state: HandState,
    pub state: HandState,
    pub contacts: Option<ContactSet>,
    pub quality: Option<QualityReport>,
    pub e_col: f64,
    pub object_pairs: usize,
    pub ground_pairs: usize,
    /// No hand-object or hand-ground pairs at the final state.
    pub collision_free: bool,
    /// Collision-free, closeness within tolerance and no fallback normals.
    pub accepted: bool,
    pub trace: Vec<IterationRecord>,
    /// Solver failure that ended the sample early.
    pub error: Option<String>,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl GraspResult {
    pub fn e_quality(&self) -> f64 {
        self.quality.map_or(f64::INFINITY, |q| q.e_quality())
    }

    pub fn e_cls(&self) -> f64 {
        self.quality.map_or(f64::INFINITY, |q| q.e_cls)
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    sample: usize,
    cluster: usize,
    init: &HandState,
    state: HandState,
    eval: Result<Evaluation>,
    trace: Vec<IterationRecord>,
    error: Option<String>,
    cfg: &PlannerConfig,
    start: Instant,
) -> GraspResult {
    let (contacts, quality, e_col, op, gp, error) = match eval {
        Ok(e) => (
            Some(e.contacts),
            Some(e.quality),
            e.e_col,
            e.collisions.object_pairs.len(),
            e.collisions.ground_pairs.len(),
            error,
        ),
        Err(err) => (None, None, f64::INFINITY, 0, 0, error.or(Some(err.to_string()))),
    };
    let collision_free = quality.is_some() && op == 0 && gp == 0;
    let accepted = error.is_none()
        && collision_free
        && quality.is_some_and(|q| q.e_cls <= cfg.e_cls_tol)
        && contacts.as_ref().is_some_and(|c| !c.any_fallback());
    GraspResult {
        sample,
        cluster,
        initial_state: init.clone(),
        state,
        contacts,
        quality,
        e_col,
        object_pairs: op,
        ground_pairs: gp,
        collision_free,
        accepted,
        trace,
        error,
        wall_time: start.elapsed(),
    }
}

/// One alternating run from `init`.
///
/// Each iteration refreshes contacts, takes a palm step, refreshes contacts
/// again and takes a joint step, with the penalty weight of that iteration.
/// The trace holds the iterate at the start of every iteration.
pub fn iterative_ppo_jpo(
    init: &HandState,
    object: &IndexedCloud,
    model: &HandModel,
    cfg: &PlannerConfig,
) -> GraspResult {
    run_sample(0, 0, init, object, model, cfg)
}

fn run_sample(
    sample: usize,
    cluster: usize,
    init: &HandState,
    object: &IndexedCloud,
    model: &HandModel,
    cfg: &PlannerConfig,
) -> GraspResult {
    let start = Instant::now();
    let p_com = object.cloud.center_of_mass();
    let mut state = init.clone();
    let mut trace = Vec::with_capacity(cfg.t_max + 1);
    for t in 0..=cfg.t_max {
        let mut step = || -> Result<HandState> {
            let params = cfg.penalty(t);
            let ev = evaluate(&state, object, model, cfg)?;
            trace.push(ev.record(t, params.w));
            let sys = build_ppo_system(&ev.contacts, &ev.collisions, &p_com, &ev.quality.n_perp, &params)
                .with_step_damping(cfg.ppo_step_damping);
            let inc = solve_ppo(&sys, &cfg.trust_region)?;
            let moved = apply_palm_update(&state, &inc);
            let ev = evaluate(&moved, object, model, cfg)?;
            let sys = build_jpo_system(
                &ev.contacts,
                &ev.collisions,
                &moved,
                &ev.posed,
                model,
                &p_com,
                &ev.quality.n_perp,
                &params,
            )
            .with_step_damping(cfg.jpo_step_damping);
            let sol = solve_box_ls(&sys, &cfg.box_solver)?;
            apply_joint_update(model, &moved, &sol.dq)
        };
        match step() {
            Ok(next) => state = next,
            Err(e) => {
                let eval = evaluate(&state, object, model, cfg);
                return finish(sample, cluster, init, state, eval, trace, Some(e.to_string()), cfg, start);
            }
        }
    }
    let eval = evaluate(&state, object, model, cfg);
    finish(sample, cluster, init, state, eval, trace, None, cfg, start)
}

/// Ranked grasps plus the sampler's final counts.
#[derive(Debug, Clone)]
pub struct PlanOutput {
    pub results: Vec<GraspResult>,
    pub sampler: SamplerState,
}

impl PlanOutput {
    pub fn accepted(&self) -> usize {
        self.results.iter().filter(|r| r.accepted).count()
    }
}

/// Runs `n_samples` guided restarts.
///
/// Samples are drawn in batches of `workers`; every batch runs concurrently
/// and the sampler counts are updated in sample order once it finishes, so
/// the output depends only on the seed and the worker count. Results are
/// sorted by quality error, best first.
pub fn plan(object: &IndexedCloud, model: &HandModel, cfg: &PlannerConfig) -> Result<PlanOutput> {
    cfg.validate()?;
    let mut sampler = init_sampler(&object.cloud, cfg.k_clusters, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut results = Vec::with_capacity(cfg.n_samples);
    let exec = if cfg.workers > 1 { Execution::Parallel } else { Execution::Sequential };
    with_workers(cfg.workers, || {
        let mut next = 0;
        while next < cfg.n_samples {
            let batch = cfg.workers.min(cfg.n_samples - next);
            let draws: Vec<(usize, usize, HandState)> = (0..batch)
                .map(|i| {
                    let (k, s) = draw_initial_state(&sampler, model, cfg.standoff, &mut rng);
                    (next + i, k, s)
                })
                .collect();
            let done = map_slice(exec, &draws, |(i, k, s)| run_sample(*i, *k, s, object, model, cfg));
            for r in done {
                sampler.record(r.cluster, r.accepted);
                results.push(r);
            }
            next += batch;
        }
    });
    results.sort_by(|a, b| a.e_quality().total_cmp(&b.e_quality()));
    Ok(PlanOutput { results, sampler })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rigid, sample_mesh};
    use crate::shapes::{on_ground, uv_sphere};

    fn sphere() -> IndexedCloud {
        let mesh = on_ground(uv_sphere(0.05, 24, 48));
        IndexedCloud::new(sample_mesh(&mesh.triangles(), 2000, 1).unwrap()).unwrap()
    }

    #[test]
    fn schedule_values() {
        let cfg = PlannerConfig::default();
        assert_eq!(cfg.penalty_weight(0), 1.0);
        assert!((cfg.penalty_weight(7) - 1.9487171).abs() < 1e-7);
    }

    #[test]
    fn config_validation() {
        assert!(PlannerConfig::default().validate().is_ok());
        let bad = PlannerConfig { w_growth: 0.9, ..Default::default() };
        assert!(matches!(bad.validate(), Err(GraspError::InvalidConfig(_))));
        let bad = PlannerConfig { beta: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_samples_is_empty() {
        let model = HandModel::default_three_finger();
        let cfg = PlannerConfig { n_samples: 0, ..Default::default() };
        let out = plan(&sphere(), &model, &cfg).unwrap();
        assert!(out.results.is_empty());
    }

    #[test]
    fn far_object_not_accepted() {
        let model = HandModel::default_three_finger();
        let cfg = PlannerConfig { t_max: 0, ..Default::default() };
        let far = rigid(nalgebra::Rotation3::identity(), Vec3::new(5.0, 5.0, 5.0));
        let r = iterative_ppo_jpo(&HandState::open(&model, far), &sphere(), &model, &cfg);
        assert!(r.collision_free);
        assert!(!r.accepted);
        assert!(r.e_cls() > cfg.e_cls_tol);
        assert_eq!(r.trace.len(), 1);
    }

    #[test]
    fn trace_and_bounds() {
        let model = HandModel::default_three_finger();
        let cfg = PlannerConfig { n_samples: 2, workers: 1, ..Default::default() };
        let out = plan(&sphere(), &model, &cfg).unwrap();
        for r in &out.results {
            assert!(r.trace.len() <= cfg.t_max + 1);
            assert!(r.state.q().iter().zip(model.joints()).all(|(v, j)| *v >= j.q_min && *v <= j.q_max));
            for (t, rec) in r.trace.iter().enumerate() {
                assert_eq!(rec.t, t);
                assert_eq!(rec.w, cfg.penalty_weight(t));
            }
        }
        assert!(out.results.windows(2).all(|w| w[0].e_quality() <= w[1].e_quality()));
    }
}
