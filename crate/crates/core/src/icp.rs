//! Point-to-point ICP of a mesh model against an observed point cloud.

use nalgebra::{Matrix3, Point3, Rotation3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{RigidPose, TriangleMesh};
use crate::spatial::KdTree;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IcpConfig {
    pub max_iter: usize,
    /// Correspondences farther apart than this are rejected (mm).
    pub corr_dist: f64,
    pub model_samples: usize,
    /// Stop when the RMS changes by less than this fraction.
    pub rel_tol: f64,
    pub min_points: usize,
    pub min_correspondences: usize,
    pub seed: u64,
}

impl Default for IcpConfig {
    fn default() -> Self {
        Self {
            max_iter: 50,
            corr_dist: 5.0,
            model_samples: 10_000,
            rel_tol: 1e-6,
            min_points: 100,
            min_correspondences: 30,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IcpResult {
    pub pose: RigidPose,
    /// Set when there was too little data and `pose` is the initial pose.
    pub flagged: bool,
    pub iterations: usize,
    /// Truncated RMS, `sqrt(mean(min(d², corr_dist²)))`, before the first
    /// and after every accepted iteration.
    pub rms_history: Vec<f64>,
}

impl IcpResult {
    fn unchanged(initial: &RigidPose) -> Self {
        Self {
            pose: *initial,
            flagged: true,
            iterations: 0,
            rms_history: Vec::new(),
        }
    }
}

pub fn icp_refine(initial: &RigidPose, mesh: &TriangleMesh, observed: &[Point3<f64>], cfg: &IcpConfig) -> IcpResult {
    if observed.len() < cfg.min_points || mesh.is_empty() {
        return IcpResult::unchanged(initial);
    }
    let mut model: Vec<Point3<f64>> = mesh.sample_surface(cfg.model_samples, cfg.seed);
    model.extend_from_slice(mesh.vertices());
    let tree = KdTree::build(&model);
    let cap = cfg.corr_dist * cfg.corr_dist;

    // Nearest model point (object frame) for each observed point.
    let matches = |pose: &RigidPose| -> (Vec<(usize, usize)>, f64) {
        let found: Vec<(usize, f64)> = observed
            .par_iter()
            .map(|o| tree.nearest(&pose.inverse_transform_point(o)).expect("nonempty model"))
            .collect();
        let mut pairs = Vec::new();
        let mut cost = 0.0;
        for (i, &(j, d2)) in found.iter().enumerate() {
            if d2 <= cap {
                pairs.push((i, j));
            }
            cost += d2.min(cap);
        }
        (pairs, (cost / observed.len() as f64).sqrt())
    };

    let mut pose = *initial;
    let (mut pairs, mut rms) = matches(&pose);
    if pairs.len() < cfg.min_correspondences {
        return IcpResult::unchanged(initial);
    }
    let mut history = vec![rms];
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        let src: Vec<Point3<f64>> = pairs.iter().map(|&(_, j)| model[j]).collect();
        let dst: Vec<Point3<f64>> = pairs.iter().map(|&(i, _)| observed[i]).collect();
        let Some(next) = kabsch(&src, &dst) else { break };
        let (next_pairs, next_rms) = matches(&next);
        iterations += 1;
        if next_rms > rms || next_pairs.len() < cfg.min_correspondences {
            break;
        }
        let change = (rms - next_rms) / rms.max(1e-300);
        pose = next;
        pairs = next_pairs;
        rms = next_rms;
        history.push(rms);
        if change < cfg.rel_tol {
            break;
        }
    }
    IcpResult {
        pose,
        flagged: false,
        iterations,
        rms_history: history,
    }
}

/// Rigid transform minimising `Σ |T·src − dst|²`.
pub fn kabsch(src: &[Point3<f64>], dst: &[Point3<f64>]) -> Option<RigidPose> {
    if src.len() < 3 || src.len() != dst.len() {
        return None;
    }
    let n = src.len() as f64;
    let cs = src.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let cd = dst.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let h = src
        .iter()
        .zip(dst)
        .fold(Matrix3::zeros(), |acc, (s, d)| acc + (s.coords - cs) * (d.coords - cd).transpose());
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u?, svd.v_t?);
    let mut d = Matrix3::identity();
    if (v_t.transpose() * u.transpose()).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let r = v_t.transpose() * d * u.transpose();
    let rotation = Rotation3::from_matrix(&r);
    Some(RigidPose {
        rotation,
        translation: cd - rotation * cs,
    })
}
