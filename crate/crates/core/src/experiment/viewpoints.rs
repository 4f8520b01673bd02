use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::RigidPose;
use crate::planner::ViewpointCandidate;

/// Fibonacci-lattice rig poses on a sphere (or its upper half, world +z up)
/// around `center`, each looking at `center`. Index 0 is the +z pole.
pub fn viewpoint_sphere(
    center: Point3<f64>,
    radius_mm: f64,
    count: usize,
    hemisphere: bool,
) -> Result<Vec<ViewpointCandidate>> {
    if count == 0 {
        return Err(Error::InvalidArgument("viewpoint count must be >= 1".into()));
    }
    if !(radius_mm > 0.0 && radius_mm.is_finite()) {
        return Err(Error::InvalidArgument(format!("viewpoint radius must be > 0 (got {radius_mm})")));
    }
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = if hemisphere {
                1.0 - i as f64 / count as f64
            } else if count == 1 {
                1.0
            } else {
                1.0 - 2.0 * i as f64 / (count - 1) as f64
            };
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            let dir = Vector3::new(r * phi.cos(), r * phi.sin(), z);
            let eye = center + dir * radius_mm;
            let pose = RigidPose::look_at(eye, center, Vector3::z())?;
            Ok(ViewpointCandidate { id: i, pose })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_viewpoint_is_the_pole() {
        let c = Point3::new(1.0, 2.0, 3.0);
        let v = viewpoint_sphere(c, 100.0, 1, true).unwrap();
        assert_eq!(v.len(), 1);
        assert!((v[0].pose.origin() - Point3::new(1.0, 2.0, 103.0)).norm() < 1e-12);
    }

    #[test]
    fn centers_on_sphere_and_looking_inward() {
        let c = Point3::new(5.0, -3.0, 10.0);
        for hemi in [true, false] {
            for v in viewpoint_sphere(c, 250.0, 40, hemi).unwrap() {
                let o = v.pose.origin();
                assert!(((o - c).norm() - 250.0).abs() < 1e-9);
                let axis = v.pose.transform_vector(&Vector3::z());
                assert!((axis - (c - o).normalize()).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn hemisphere_stays_above() {
        let v = viewpoint_sphere(Point3::origin(), 300.0, 100, true).unwrap();
        assert!(v.iter().all(|c| c.pose.origin().z >= 0.0));
        let full = viewpoint_sphere(Point3::origin(), 300.0, 100, false).unwrap();
        assert!(full.iter().any(|c| c.pose.origin().z < 0.0));
    }

    #[test]
    fn deterministic_and_ids_sequential() {
        let a = viewpoint_sphere(Point3::origin(), 300.0, 32, true).unwrap();
        let b = viewpoint_sphere(Point3::origin(), 300.0, 32, true).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().enumerate().all(|(i, c)| c.id == i));
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(viewpoint_sphere(Point3::origin(), 300.0, 0, true).is_err());
        assert!(viewpoint_sphere(Point3::origin(), -1.0, 3, true).is_err());
    }
}
