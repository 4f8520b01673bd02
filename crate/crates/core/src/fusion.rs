//! Reprojection fusion of new depth views into the reference view.
//!
//! Valid pixels of a new view are lifted to 3D, projected into the reference
//! camera and z-buffered. Only pixels missing in the reference map are
//! filled; the depth written is the intersection of the reference pixel ray
//! with the local tangent plane of the contributing point, which avoids the
//! half-pixel depth error of a plain nearest-pixel splat on slanted surfaces.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{estimate_normals_pca_with, DepthMap, PcaNormalConfig, PinholeCamera};

/// Default consistency gate (mm).
pub const CONSISTENCY_MM: f64 = 2.0;
/// Contributions whose surface is seen at a grazing angle from the reference
/// camera (|cos| below this) are dropped.
const MIN_FACING_COS: f64 = 0.05;

const FOOTPRINT: [(i64, i64); 9] = [(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (1, -1), (-1, 1), (1, 1)];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub consistency_mm: f64,
    pub normals: PcaNormalConfig,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            consistency_mm: CONSISTENCY_MM,
            normals: PcaNormalConfig::default(),
        }
    }
}

/// Reference view being completed.
#[derive(Clone, Debug)]
pub struct FusionState {
    reference: PinholeCamera,
    original: DepthMap,
    fused: DepthMap,
    /// Accepted world points with the index of the view that produced them
    /// (0 is the reference capture).
    points: Vec<(Point3<f64>, usize)>,
    views: usize,
    cfg: FusionConfig,
}

/// What one fusion step did.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FuseStats {
    pub filled: usize,
    pub accepted: usize,
    pub rejected: usize,
}

impl FusionState {
    pub fn new(reference: PinholeCamera, depth: DepthMap) -> Result<Self> {
        Self::with_config(reference, depth, FusionConfig::default())
    }

    pub fn with_config(reference: PinholeCamera, depth: DepthMap, cfg: FusionConfig) -> Result<Self> {
        let (w, h) = depth.dims();
        if (w, h) != (reference.width(), reference.height()) {
            return Err(crate::Error::DimensionMismatch {
                left: (w, h),
                right: (reference.width(), reference.height()),
            });
        }
        let points = (0..depth.len())
            .filter_map(|i| {
                let (u, v) = depth.coords(i);
                depth.value(u, v).map(|d| (reference.backproject(u, v, d), 0))
            })
            .collect();
        Ok(Self {
            reference,
            fused: depth.clone(),
            original: depth,
            points,
            views: 1,
            cfg,
        })
    }

    pub fn reference(&self) -> &PinholeCamera {
        &self.reference
    }

    pub fn original(&self) -> &DepthMap {
        &self.original
    }

    /// Current completed reference depth map.
    pub fn fused(&self) -> &DepthMap {
        &self.fused
    }

    pub fn points(&self) -> &[(Point3<f64>, usize)] {
        &self.points
    }

    /// World points of the fused reference depth map.
    pub fn fused_points(&self) -> Vec<Point3<f64>> {
        (0..self.fused.len())
            .filter_map(|i| {
                let (u, v) = self.fused.coords(i);
                self.fused.value(u, v).map(|d| self.reference.backproject(u, v, d))
            })
            .collect()
    }

    /// Fuses a depth map taken by `camera`.
    pub fn fuse_view(&mut self, depth: &DepthMap, camera: &PinholeCamera) -> Result<FuseStats> {
        let normals = estimate_normals_pca_with(depth, camera, &self.cfg.normals)?;
        let ref_eye = self.reference.center();
        let axis = self.reference.pose.transform_vector(&Vector3::z());
        let (w, h) = self.fused.dims();
        // Per reference pixel: (footprint distance², point depth, depth on
        // the contribution's tangent plane).
        let mut zbuf: Vec<Option<(f64, f64, f64)>> = vec![None; w * h];
        let mut stats = FuseStats::default();
        let gate = self.cfg.consistency_mm;
        for i in 0..depth.len() {
            let (u, v) = depth.coords(i);
            let Some(d) = depth.value(u, v) else { continue };
            let p = camera.backproject(u, v, d);
            let Some((fu, fv, z)) = self.reference.project(&p) else { continue };
            if z <= 0.0 {
                continue;
            }
            let to_ref = (ref_eye - p).normalize();
            let normal = normals.normal(u, v);
            if normal.is_some_and(|n| n.dot(&to_ref) < MIN_FACING_COS) {
                stats.rejected += 1;
                continue;
            }
            // Splat into the 3×3 neighbourhood so oblique views leave no
            // sub-pixel gaps; off-centre pixels need a tangent plane.
            let (cu, cv) = (fu.round() as i64, fv.round() as i64);
            for (du, dv) in FOOTPRINT {
                let (ru, rv) = (cu + du, cv + dv);
                if ru < 0 || rv < 0 || ru >= w as i64 || rv >= h as i64 {
                    continue;
                }
                let (ru, rv) = (ru as usize, rv as usize);
                let centre = du == 0 && dv == 0;
                let ray = self.reference.pixel_ray_world(ru, rv);
                let planar = normal.map(|n| n.dot(&(p - ref_eye)) / n.dot(&ray));
                let zc = match planar {
                    Some(t) if (t * ray.dot(&axis) - z).abs() <= gate => {
                        // Off-centre pixels must land back on a consistent
                        // source measurement, or silhouettes would grow.
                        if !centre && !backed_by(depth, camera, &(ref_eye + ray * t), gate) {
                            continue;
                        }
                        t * ray.dot(&axis)
                    }
                    _ if centre => z,
                    _ => continue,
                };
                let dist2 = (ru as f64 - fu).powi(2) + (rv as f64 - fv).powi(2);
                let slot = &mut zbuf[rv * w + ru];
                let replace = match *slot {
                    None => true,
                    Some((best_d2, best_z, _)) => z < best_z - gate || ((z - best_z).abs() <= gate && dist2 < best_d2),
                };
                if replace {
                    *slot = Some((dist2, z, zc));
                }
            }
        }
        for (idx, entry) in zbuf.into_iter().enumerate() {
            let Some((_, _, zc)) = entry else { continue };
            let (u, v) = self.fused.coords(idx);
            let p = self.reference.backproject(u, v, zc);
            let current = self.fused.data()[idx];
            if current.is_nan() {
                self.fused.data_mut()[idx] = zc;
                self.points.push((p, self.views));
                stats.filled += 1;
                stats.accepted += 1;
            } else if (zc - current).abs() <= self.cfg.consistency_mm {
                self.points.push((p, self.views));
                stats.accepted += 1;
            } else {
                stats.rejected += 1;
            }
        }
        self.views += 1;
        Ok(stats)
    }
}

/// True when `q` projects onto a pixel of `depth` whose measurement agrees
/// with it.
fn backed_by(depth: &DepthMap, camera: &PinholeCamera, q: &Point3<f64>, gate: f64) -> bool {
    camera
        .project_to_pixel(q)
        .and_then(|(u, v, z)| depth.value(u, v).map(|d| (d - z).abs() <= gate))
        .unwrap_or(false)
}

/// Functional form of [`FusionState::fuse_view`].
pub fn fuse_view(state: &FusionState, depth: &DepthMap, camera: &PinholeCamera) -> Result<FusionState> {
    let mut next = state.clone();
    next.fuse_view(depth, camera)?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{raycast_view, shapes, Intrinsics, RigidPose, SceneModel};
    use crate::reflectance::PhongMaterial;
    use std::sync::Arc;

    fn bits(d: &DepthMap) -> Vec<u64> {
        d.data().iter().map(|x| x.to_bits()).collect()
    }

    fn scene() -> SceneModel {
        let mesh = Arc::new(shapes::plate(120.0, 120.0, 4).unwrap());
        SceneModel::single(mesh, RigidPose::from_euler_deg([25.0, 0.0, 0.0], Vector3::zeros()), PhongMaterial::MATTE)
    }

    fn camera_at(eye: Point3<f64>) -> PinholeCamera {
        let pose = RigidPose::look_at(eye, Point3::origin(), -Vector3::y()).unwrap();
        PinholeCamera::new(Intrinsics::centered(64, 48, 80.0), pose).unwrap()
    }

    #[test]
    fn self_fusion_is_identity() {
        let cam = camera_at(Point3::new(0.0, 0.0, -300.0));
        let d = raycast_view(&scene(), &cam).depth;
        let mut st = FusionState::new(cam, d.clone()).unwrap();
        st.fuse_view(&d, &cam).unwrap();
        assert_eq!(bits(st.fused()), bits(&d));
    }

    #[test]
    fn empty_view_changes_nothing() {
        let cam = camera_at(Point3::new(0.0, 0.0, -300.0));
        let d = raycast_view(&scene(), &cam).depth;
        let mut st = FusionState::new(cam, d.clone()).unwrap();
        let stats = st.fuse_view(&DepthMap::missing(64, 48), &cam).unwrap();
        assert_eq!(stats, FuseStats::default());
        assert_eq!(bits(st.fused()), bits(&d));
    }

    #[test]
    fn second_view_fills_hole_accurately() {
        let s = scene();
        let cam = camera_at(Point3::new(0.0, 0.0, -300.0));
        let gt = raycast_view(&s, &cam).depth;
        let mut holey = gt.clone();
        for v in 18..30 {
            for u in 26..38 {
                *holey.at_mut(u, v) = f64::NAN;
            }
        }
        let other = camera_at(Point3::new(80.0, -40.0, -280.0));
        let d2 = raycast_view(&s, &other).depth;
        let mut st = FusionState::new(cam, holey.clone()).unwrap();
        st.fuse_view(&d2, &other).unwrap();
        for v in 18..30 {
            for u in 26..38 {
                let got = st.fused().value(u, v).expect("filled");
                assert!((got - gt.value(u, v).unwrap()).abs() < 0.2, "({u},{v}) {got}");
            }
        }
        // Original pixels untouched.
        for i in 0..holey.len() {
            if !holey.data()[i].is_nan() {
                assert_eq!(holey.data()[i].to_bits(), st.fused().data()[i].to_bits());
            }
        }
    }

    #[test]
    fn disjoint_views_commute() {
        let s = scene();
        let cam = camera_at(Point3::new(0.0, 0.0, -300.0));
        let base = DepthMap::missing(64, 48);
        let a_cam = camera_at(Point3::new(60.0, 0.0, -290.0));
        let b_cam = camera_at(Point3::new(-60.0, 0.0, -290.0));
        let keep = |d: DepthMap, cam: &PinholeCamera, left: bool| {
            // Keep only points landing in one half of the reference image.
            DepthMap::from_fn(64, 48, |u, v| {
                let Some(z) = d.value(u, v) else { return f64::NAN };
                let p = cam.backproject(u, v, z);
                match camera_at(Point3::new(0.0, 0.0, -300.0)).project(&p) {
                    Some((x, _, _)) if (x < 31.5) == left && (x - 31.5).abs() > 2.0 => z,
                    _ => f64::NAN,
                }
            })
        };
        let da = keep(raycast_view(&s, &a_cam).depth, &a_cam, true);
        let db = keep(raycast_view(&s, &b_cam).depth, &b_cam, false);
        let mut ab = FusionState::new(cam, base.clone()).unwrap();
        ab.fuse_view(&da, &a_cam).unwrap();
        ab.fuse_view(&db, &b_cam).unwrap();
        let mut ba = FusionState::new(cam, base).unwrap();
        ba.fuse_view(&db, &b_cam).unwrap();
        ba.fuse_view(&da, &a_cam).unwrap();
        assert_eq!(bits(ab.fused()), bits(ba.fused()));
        assert!(ab.fused().valid_count() > 0);
    }
}
