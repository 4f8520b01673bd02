//! Depth completion and pose accuracy metrics.

use crate::error::Result;
use crate::geometry::{DepthMap, Grid, RigidPose, TriangleMesh};

/// Depth error under which a recovered pixel counts (mm).
pub const COMPLETION_TOLERANCE_MM: f64 = 2.0;
/// A pose is correct when ADD is below this fraction of the diameter.
pub const ADD_DIAMETER_FRACTION: f64 = 0.1;

/// Pixels of `object` that are missing in `before`.
pub fn completion_mask(before: &DepthMap, object: &Grid<bool>) -> Result<Grid<bool>> {
    before.ensure_same_dims(object)?;
    let data = before.data().iter().zip(object.data()).map(|(d, &o)| o && d.is_nan()).collect();
    Grid::from_vec(before.width(), before.height(), data)
}

/// Percentage of `mask` pixels whose `after` depth is within `err_mm` of
/// ground truth. An empty mask scores 100.
pub fn depth_completion_pct(
    before: &DepthMap,
    after: &DepthMap,
    gt: &DepthMap,
    err_mm: f64,
    mask: &Grid<bool>,
) -> Result<f64> {
    before.ensure_same_dims(after)?;
    before.ensure_same_dims(gt)?;
    before.ensure_same_dims(mask)?;
    let mut total = 0usize;
    let mut recovered = 0usize;
    for i in 0..mask.len() {
        if !mask.data()[i] {
            continue;
        }
        total += 1;
        let (a, g) = (after.data()[i], gt.data()[i]);
        if !a.is_nan() && !g.is_nan() && (a - g).abs() < err_mm {
            recovered += 1;
        }
    }
    if total == 0 {
        return Ok(100.0);
    }
    Ok(100.0 * recovered as f64 / total as f64)
}

/// Mean distance between the mesh vertices under the two poses.
pub fn add_error(est: &RigidPose, gt: &RigidPose, mesh: &TriangleMesh) -> f64 {
    let v = mesh.vertices();
    if v.is_empty() {
        return 0.0;
    }
    let sum: f64 = v.iter().map(|x| (est.transform_point(x) - gt.transform_point(x)).norm()).sum();
    sum / v.len() as f64
}

/// Pose with its accuracy against ground truth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseEstimate {
    pub pose: RigidPose,
    pub add_mm: f64,
    pub correct: bool,
}

impl PoseEstimate {
    pub fn evaluate(pose: RigidPose, gt: &RigidPose, mesh: &TriangleMesh) -> Self {
        let add_mm = add_error(&pose, gt, mesh);
        Self {
            pose,
            add_mm,
            correct: add_mm < ADD_DIAMETER_FRACTION * mesh.diameter(),
        }
    }
}
