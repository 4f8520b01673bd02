use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::camera::PinholeCamera;
use super::maps::{DepthMap, NormalMap, MISSING};
use crate::error::{Error, Result};

/// Neighbourhood used for PCA normals: the `k` nearest 3D points among the
/// valid pixels of a `(2r+1)²` window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PcaNormalConfig {
    pub window_radius: usize,
    pub k: usize,
}

impl Default for PcaNormalConfig {
    fn default() -> Self {
        Self {
            window_radius: 5,
            k: 16,
        }
    }
}

/// World-frame normals from local PCA of the back-projected depth map,
/// oriented towards the camera.
pub fn estimate_normals_pca(depth: &DepthMap, camera: &PinholeCamera, k: usize) -> Result<NormalMap> {
    estimate_normals_pca_with(
        depth,
        camera,
        &PcaNormalConfig {
            k,
            ..Default::default()
        },
    )
}

pub fn estimate_normals_pca_with(
    depth: &DepthMap,
    camera: &PinholeCamera,
    cfg: &PcaNormalConfig,
) -> Result<NormalMap> {
    if cfg.k < 3 {
        return Err(Error::InvalidArgument(format!("PCA normals need k >= 3, got {}", cfg.k)));
    }
    let (w, h) = depth.dims();
    if (w, h) != (camera.width(), camera.height()) {
        return Err(Error::DimensionMismatch {
            left: (w, h),
            right: (camera.width(), camera.height()),
        });
    }
    let points: Vec<Option<Point3<f64>>> = (0..w * h)
        .map(|i| {
            let (u, v) = depth.coords(i);
            depth.value(u, v).map(|z| camera.backproject(u, v, z))
        })
        .collect();
    let eye = camera.center();
    let r = cfg.window_radius as isize;
    let normals: Vec<Vector3<f64>> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let Some(p) = points[i] else {
                return Vector3::repeat(MISSING);
            };
            let (u, v) = (i % w, i / w);
            let mut neigh: Vec<(f64, Point3<f64>)> = Vec::with_capacity(((2 * r + 1) * (2 * r + 1)) as usize);
            for dv in -r..=r {
                for du in -r..=r {
                    let (uu, vv) = (u as isize + du, v as isize + dv);
                    if uu < 0 || vv < 0 || uu >= w as isize || vv >= h as isize {
                        continue;
                    }
                    if let Some(q) = points[vv as usize * w + uu as usize] {
                        neigh.push(((q - p).norm_squared(), q));
                    }
                }
            }
            if neigh.len() < cfg.k {
                return Vector3::repeat(MISSING);
            }
            neigh.select_nth_unstable_by(cfg.k - 1, |a, b| a.0.total_cmp(&b.0));
            let nearest = &neigh[..cfg.k];
            plane_normal(nearest.iter().map(|(_, q)| *q))
                .map(|n| if n.dot(&(eye - p)) < 0.0 { -n } else { n })
                .unwrap_or_else(|| Vector3::repeat(MISSING))
        })
        .collect();
    NormalMap::from_vec(w, h, normals)
}

/// Smallest-eigenvalue direction of the point covariance, `None` when the
/// points do not span a plane.
fn plane_normal(points: impl Iterator<Item = Point3<f64>> + Clone) -> Option<Vector3<f64>> {
    let n = points.clone().count() as f64;
    let mean = points.clone().fold(Vector3::zeros(), |acc, p| acc + p.coords) / n;
    let cov = points.fold(Matrix3::zeros(), |acc, p| {
        let d = p.coords - mean;
        acc + d * d.transpose()
    }) / n;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (mid, large) = (eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]);
    if large <= 1e-18 || mid <= 1e-9 * large {
        return None;
    }
    Some(eig.eigenvectors.column(order[0]).normalize())
}
