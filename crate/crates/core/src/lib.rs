//! Precision-grasp planning for multi-fingered hands on object point clouds.
//!
//! The planner alternates a closed-form least-squares update of the palm pose
//! with a box-constrained least-squares update of the finger joints. Contacts
//! come from nearest-neighbor matches between fingertip patches and the
//! object cloud; hand-object and hand-ground penetration is penalised with a
//! weight that grows every iteration. An outer loop restarts the search from
//! K-means cluster centers of the object surface, favouring centers that
//! produced accepted grasps before.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod collision;
pub mod contact;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod hand;
pub mod io;
pub mod jpo;
pub mod planner;
pub mod ppo;
pub mod results;
pub mod shapes;

pub use error::{GraspError, Result};
