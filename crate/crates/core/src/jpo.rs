//! Joint step: box-constrained least squares in `dq` with the palm held fixed,
//! solved by projected gradient from a clamped warm start plus an exact
//! active-set refinement.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::collision::CollisionSet;
use crate::contact::ContactSet;
use crate::error::{GraspError, Result};
use crate::geometry::{Vec3, GROUND_NORMAL};
use crate::hand::{HandModel, HandState, PosedHand};
use crate::ppo::{append_step_rows, damped_least_squares, PenaltyParams, RowTag};

#[derive(Debug, Clone, PartialEq)]
pub struct JpoSystem {
    pub c: DMatrix<f64>,
    pub d: DVector<f64>,
    pub lo: DVector<f64>,
    pub hi: DVector<f64>,
    pub tags: Vec<RowTag>,
}

impl JpoSystem {
    pub fn rows(&self, tag: RowTag) -> impl Iterator<Item = usize> + '_ {
        self.tags.iter().enumerate().filter(move |(_, t)| **t == tag).map(|(k, _)| k)
    }

    /// Adds step-length damping relative to the system's scale; `rho = 0`
    /// leaves the system unchanged.
    pub fn with_step_damping(mut self, rho: f64) -> Self {
        let (c, d) = append_step_rows(&self.c, &self.d, &mut self.tags, rho);
        self.c = c;
        self.d = d;
        self
    }

    pub fn objective(&self, dq: &DVector<f64>) -> f64 {
        (&self.c * dq - &self.d).norm_squared()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxSolverParams {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub power_iterations: usize,
}

impl Default for BoxSolverParams {
    fn default() -> Self {
        BoxSolverParams {
            max_iterations: 200,
            tolerance: 1e-8,
            power_iterations: 20,
        }
    }
}

struct Rows {
    n: usize,
    data: Vec<f64>,
    d: Vec<f64>,
    tags: Vec<RowTag>,
}

impl Rows {
    /// Appends a row that is nonzero only on columns `offset..offset + row.len()`.
    fn push(&mut self, tag: RowTag, offset: usize, row: &[f64], d: f64) {
        let start = self.data.len();
        self.data.resize(start + self.n, 0.0);
        self.data[start + offset..start + offset + row.len()].copy_from_slice(row);
        self.d.push(d);
        self.tags.push(tag);
    }
}

fn project(v: &Vec3, jac: &DMatrix<f64>) -> Vec<f64> {
    (0..jac.ncols())
        .map(|c| v.x * jac[(0, c)] + v.y * jac[(1, c)] + v.z * jac[(2, c)])
        .collect()
}

/// Assembles the joint system at the current state. Rows mirror the palm
/// system with palm twists replaced by world-frame joint Jacobians.
#[allow(clippy::too_many_arguments)]
pub fn build_jpo_system(
    contacts: &ContactSet,
    collisions: &CollisionSet,
    state: &HandState,
    posed: &PosedHand,
    model: &HandModel,
    p_com: &Vec3,
    n_perp: &Vec3,
    params: &PenaltyParams,
) -> JpoSystem {
    let (w, beta) = (params.w, params.beta);
    let n = model.total_joints();
    let mut rows = Rows {
        n,
        data: Vec::new(),
        d: Vec::new(),
        tags: Vec::new(),
    };
    let jv: Vec<DMatrix<f64>> = (0..posed.fingers.len()).map(|i| posed.tip_translational_jacobian_world(i)).collect();
    for (i, f) in contacts.fingers.iter().enumerate() {
        let off = posed.fingers[i].joint_offset;
        rows.push(RowTag::Com, off, &project(n_perp, &jv[i]), (p_com - f.tip_centroid).dot(n_perp));
    }
    for (k, (j, q)) in model.joints().zip(state.q()).enumerate() {
        let s = j.alpha / j.range();
        rows.push(RowTag::Jc, k, &[s], s * (j.q_mean - q));
    }
    for (i, f) in contacts.fingers.iter().enumerate() {
        let jw = posed.tip_rotational_jacobian_world(i);
        let axis = f.tip_normal.cross(&f.contact_normal) * beta;
        let d = -beta * (f.contact_normal.dot(&f.tip_normal) + 1.0);
        rows.push(RowTag::Align, posed.fingers[i].joint_offset, &project(&axis, &jw), d);
    }
    for pair in &collisions.object_pairs {
        let p = pair.penalty_point(params.clearance);
        let jac = posed.point_jacobian_world(pair.link, &p);
        let target = w * (pair.object_point - p);
        for k in 0..3 {
            let row: Vec<f64> = (0..n).map(|c| w * jac[(k, c)]).collect();
            rows.push(RowTag::Obj, 0, &row, target[k]);
        }
    }
    for g in &collisions.ground_pairs {
        let jac = posed.point_jacobian_world(g.link, &g.hand_point);
        let row: Vec<f64> = project(&(GROUND_NORMAL * w), &jac);
        rows.push(RowTag::Gnd, 0, &row, w * (params.ground_clearance - g.penetration()));
    }
    for (i, f) in contacts.fingers.iter().enumerate() {
        let nc = f.contact_normal;
        let row = project(&(nc * w), &jv[i]);
        rows.push(RowTag::Cls, posed.fingers[i].joint_offset, &row, w * (f.contact - f.tip_centroid).dot(&nc));
    }
    let m = rows.d.len();
    let q = state.q();
    JpoSystem {
        c: DMatrix::from_row_slice(m, n, &rows.data),
        d: DVector::from_vec(rows.d),
        lo: DVector::from_iterator(n, model.joints().zip(q).map(|(j, v)| j.q_min - v)),
        hi: DVector::from_iterator(n, model.joints().zip(q).map(|(j, v)| j.q_max - v)),
        tags: rows.tags,
    }
}

fn clamp(v: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(v.len(), v.iter().zip(lo.iter().zip(hi)).map(|(x, (l, h))| x.clamp(*l, *h)))
}

/// Largest singular value of `c` by power iteration on `c^T c`.
fn sigma_max(c: &DMatrix<f64>, iterations: usize) -> f64 {
    let n = c.ncols();
    if n == 0 || c.nrows() == 0 {
        return 0.0;
    }
    let ctc = c.transpose() * c;
    // fixed, non-symmetric start vector so no eigenvector is missed by accident
    let mut v = DVector::from_fn(n, |k, _| 1.0 + 0.1 * k as f64);
    v.normalize_mut();
    let mut lambda = 0.0;
    for _ in 0..iterations {
        let u = &ctc * &v;
        let norm = u.norm();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm;
        v = u / norm;
    }
    lambda.sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxSolution {
    pub dq: DVector<f64>,
    pub iterations: usize,
}

/// Projected gradient with step `0.9 / sigma_max(C)^2`, warm-started from the
/// damped unconstrained solution clamped into the box, then refined exactly
/// on the active set it identifies.
pub fn solve_box_ls(sys: &JpoSystem, params: &BoxSolverParams) -> Result<BoxSolution> {
    let finite = sys.c.iter().chain(sys.d.iter()).chain(sys.lo.iter()).chain(sys.hi.iter()).all(|v| v.is_finite());
    if !finite {
        return Err(GraspError::IllPosedJpo);
    }
    let x0 = damped_least_squares(&sys.c, &sys.d).ok_or(GraspError::IllPosedJpo)?;
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(GraspError::IllPosedJpo);
    }
    let mut x = clamp(&x0, &sys.lo, &sys.hi);
    let sigma = sigma_max(&sys.c, params.power_iterations);
    if sigma == 0.0 {
        return Ok(BoxSolution { dq: x, iterations: 0 });
    }
    let gamma = 0.9 / (sigma * sigma);
    let ct = sys.c.transpose();
    for it in 0..params.max_iterations {
        let grad = &ct * (&sys.c * &x - &sys.d);
        let next = clamp(&(&x - grad * gamma), &sys.lo, &sys.hi);
        let step = (&next - &x).amax();
        x = next;
        if step < params.tolerance {
            return Ok(BoxSolution {
                dq: refine_on_active_set(sys, x),
                iterations: it + 1,
            });
        }
    }
    Ok(BoxSolution {
        dq: refine_on_active_set(sys, x),
        iterations: params.max_iterations,
    })
}

/// Finishes a projected-gradient iterate with an exact solve on its free
/// joints, releasing bound joints whose gradient points into the box. Stops
/// as soon as a refined point would leave the box, and never returns a
/// point with a larger objective than `x`.
fn refine_on_active_set(sys: &JpoSystem, x: DVector<f64>) -> DVector<f64> {
    let n = x.len();
    let mut fixed: Vec<Option<f64>> = (0..n)
        .map(|i| {
            if x[i] <= sys.lo[i] {
                Some(sys.lo[i])
            } else if x[i] >= sys.hi[i] {
                Some(sys.hi[i])
            } else {
                None
            }
        })
        .collect();
    let mut best_obj = sys.objective(&x);
    let mut best = x;
    for _ in 0..=n {
        let free: Vec<usize> = (0..n).filter(|&i| fixed[i].is_none()).collect();
        let mut y = DVector::from_fn(n, |i, _| fixed[i].unwrap_or(0.0));
        if !free.is_empty() {
            let cf = sys.c.select_columns(&free);
            let r = &sys.d - &sys.c * &y;
            let svd = cf.svd(true, true);
            let eps = 1e-12 * svd.singular_values.max();
            let Ok(sol) = svd.solve(&r, eps) else { break };
            for (a, &i) in free.iter().enumerate() {
                y[i] = sol[a];
            }
        }
        if (0..n).any(|i| !(y[i] >= sys.lo[i] && y[i] <= sys.hi[i])) {
            break;
        }
        let obj = sys.objective(&y);
        if obj <= best_obj {
            best_obj = obj;
            best = y.clone();
        }
        let g = sys.c.transpose() * (&sys.c * &y - &sys.d);
        // a joint on its lower bound wants to rise when g < 0, and vice versa
        let release = (0..n)
            .filter_map(|i| match fixed[i] {
                Some(b) if b == sys.lo[i] && g[i] < 0.0 => Some((i, -g[i])),
                Some(b) if b == sys.hi[i] && g[i] > 0.0 => Some((i, g[i])),
                _ => None,
            })
            .max_by(|a, b| a.1.total_cmp(&b.1));
        match release {
            Some((i, _)) => fixed[i] = None,
            None => break,
        }
    }
    best
}

/// `q' = q + dq`, rejected if any joint leaves its limits.
pub fn apply_joint_update(model: &HandModel, state: &HandState, dq: &DVector<f64>) -> Result<HandState> {
    if dq.len() != state.q().len() {
        return Err(GraspError::InvalidState(format!(
            "joint increment has {} entries, hand has {} joints",
            dq.len(),
            state.q().len()
        )));
    }
    let q: Vec<f64> = state.q().iter().zip(dq.iter()).map(|(a, b)| a + b).collect();
    HandState::new(model, state.pose, q)
}
