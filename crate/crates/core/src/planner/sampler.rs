//! Guided sampling of initial hand placements over K-means cluster centers.

use std::f64::consts::TAU;

use nalgebra::{Rotation3, Unit};
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{frame_from_z, kmeans, rigid, SurfacePointCloud, Vec3};
use crate::hand::{HandModel, HandState};

/// Cluster centers with per-cluster trial and success counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerState {
    pub centers: Vec<Vec3>,
    /// Outward normal of each center.
    pub normals: Vec<Vec3>,
    pub trials: Vec<u32>,
    pub successes: Vec<u32>,
}

impl SamplerState {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Laplace-smoothed success rate `(s + 1) / (n + 2)` of each cluster.
    pub fn weights(&self) -> Vec<f64> {
        self.trials
            .iter()
            .zip(&self.successes)
            .map(|(n, s)| (*s as f64 + 1.0) / (*n as f64 + 2.0))
            .collect()
    }

    pub fn record(&mut self, cluster: usize, success: bool) {
        self.trials[cluster] += 1;
        if success {
            self.successes[cluster] += 1;
        }
    }

    /// Picks a cluster with probability proportional to its weight.
    pub fn choose<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let w = self.weights();
        let total: f64 = w.iter().sum();
        let mut u = rng.random::<f64>() * total;
        for (k, wk) in w.iter().enumerate() {
            if u < *wk {
                return k;
            }
            u -= wk;
        }
        w.len() - 1
    }
}

/// Clusters the object surface; each center's normal is the normalized mean
/// of its members' normals.
pub fn init_sampler(object: &SurfacePointCloud, k: usize, seed: u64) -> Result<SamplerState> {
    let km = kmeans(object.points(), k, seed)?;
    let mut sums = vec![Vec3::zeros(); km.centers.len()];
    for (i, c) in km.assignment.iter().enumerate() {
        sums[*c] += object.normals()[i];
    }
    let normals = sums
        .iter()
        .zip(&km.centers)
        .map(|(s, c)| {
            if s.norm() > 1e-12 {
                s.normalize()
            } else {
                let out = c - object.center_of_mass();
                if out.norm() > 1e-12 {
                    out.normalize()
                } else {
                    Vec3::z()
                }
            }
        })
        .collect();
    let n = km.centers.len();
    Ok(SamplerState {
        centers: km.centers,
        normals,
        trials: vec![0; n],
        successes: vec![0; n],
    })
}

/// Open hand with the palm `standoff` above `center` along `normal`, palm +z
/// along the normal (so the approach direction faces the surface), rolled by
/// `roll` about the approach axis.
pub fn place_hand(model: &HandModel, center: &Vec3, normal: &Vec3, standoff: f64, roll: f64) -> HandState {
    let z = Unit::new_normalize(*normal);
    let rot = frame_from_z(&z) * Rotation3::from_axis_angle(&Vec3::z_axis(), roll);
    HandState::open(model, rigid(rot, center + z.into_inner() * standoff))
}

/// Draws a cluster and a uniform roll, returning the cluster index and state.
pub fn draw_initial_state<R: Rng + ?Sized>(
    sampler: &SamplerState,
    model: &HandModel,
    standoff: f64,
    rng: &mut R,
) -> (usize, HandState) {
    let k = sampler.choose(rng);
    let roll = rng.random_range(0.0..TAU);
    (k, place_hand(model, &sampler.centers[k], &sampler.normals[k], standoff, roll))
}
