use std::ops::Mul;

use nalgebra::{Matrix3, Point3, Rotation3, Unit, Vector3};

use crate::error::{Error, Result};

const ORTHONORMAL_TOL: f64 = 1e-6;

/// A rigid transform `x ↦ R·x + t` (millimetres).
///
/// Used both for object poses (object → world) and camera poses
/// (camera → world).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidPose {
    pub rotation: Rotation3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidPose {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidPose {
    pub fn identity() -> Self {
        Self {
            rotation: Rotation3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a pose from a raw matrix, rejecting anything that is not a proper
    /// rotation within 1e-6.
    pub fn from_matrix(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let gram = rotation.transpose() * rotation;
        let off = (gram - Matrix3::identity()).abs().max();
        let det = rotation.determinant();
        if off > ORTHONORMAL_TOL || (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::InvalidArgument(format!(
                "rotation is not orthonormal with det +1 (|RᵀR−I|∞ = {off:.3e}, det = {det:.6})"
            )));
        }
        Ok(Self {
            rotation: Rotation3::from_matrix_unchecked(rotation),
            translation,
        })
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Rotation3::identity(),
            translation,
        }
    }

    /// Rotation given as a rotation vector (axis · angle, radians).
    pub fn from_rotation_vector(rotvec: Vector3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: Rotation3::new(rotvec),
            translation,
        }
    }

    /// Intrinsic XYZ Euler angles in degrees.
    pub fn from_euler_deg(angles: [f64; 3], translation: Vector3<f64>) -> Self {
        let [rx, ry, rz] = angles.map(f64::to_radians);
        Self {
            rotation: Rotation3::from_euler_angles(rx, ry, rz),
            translation,
        }
    }

    /// Camera-to-world pose for a camera at `eye` whose optical axis (+z)
    /// points at `target`. Image rows (+y) point away from `up`.
    pub fn look_at(eye: Point3<f64>, target: Point3<f64>, up: Vector3<f64>) -> Result<Self> {
        let forward = target - eye;
        if forward.norm() < 1e-12 {
            return Err(Error::InvalidArgument("look_at eye equals target".into()));
        }
        let z = forward.normalize();
        let mut up = up;
        if z.cross(&up).norm() < 1e-9 {
            // Looking along the up vector: pick any perpendicular reference.
            up = if z.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        }
        let x = z.cross(&up).normalize();
        let y = z.cross(&x);
        let rotation = Matrix3::from_columns(&[x, y, z]);
        Ok(Self {
            rotation: Rotation3::from_matrix_unchecked(rotation),
            translation: eye.coords,
        })
    }

    pub fn transform_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    pub fn inverse_transform_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation.inverse() * (p.coords - self.translation))
    }

    pub fn inverse(&self) -> Self {
        let r = self.rotation.inverse();
        Self {
            rotation: r,
            translation: -(r * self.translation),
        }
    }

    /// Position of the frame origin in the parent frame.
    pub fn origin(&self) -> Point3<f64> {
        Point3::from(self.translation)
    }

    /// Rotation angle of `self⁻¹ ∘ other` in degrees.
    pub fn angle_to_deg(&self, other: &RigidPose) -> f64 {
        (self.rotation.inverse() * other.rotation).angle().to_degrees()
    }

    pub fn rotate_about(axis: Unit<Vector3<f64>>, angle_rad: f64) -> Self {
        Self {
            rotation: Rotation3::from_axis_angle(&axis, angle_rad),
            translation: Vector3::zeros(),
        }
    }

    /// True when the rotation part is orthonormal with determinant +1.
    pub fn is_valid(&self) -> bool {
        let m = self.rotation.matrix();
        let off = (m.transpose() * m - Matrix3::identity()).abs().max();
        off <= ORTHONORMAL_TOL && (m.determinant() - 1.0).abs() <= ORTHONORMAL_TOL
    }
}

impl Mul for RigidPose {
    type Output = RigidPose;

    /// `(a * b)(x) = a(b(x))`.
    fn mul(self, rhs: RigidPose) -> RigidPose {
        RigidPose {
            rotation: self.rotation * rhs.rotation,
            translation: self.rotation * rhs.translation + self.translation,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_non_orthonormal() {
        let m = Matrix3::new(1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0);
        assert!(RigidPose::from_matrix(m, Vector3::zeros()).is_err());
        let reflect = Matrix3::new(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(RigidPose::from_matrix(reflect, Vector3::zeros()).is_err());
    }

    #[test]
    fn inverse_round_trip() {
        let p = RigidPose::from_euler_deg([10.0, -20.0, 35.0], Vector3::new(1.0, 2.0, 3.0));
        let q = Point3::new(4.0, -5.0, 6.0);
        let back = p.inverse().transform_point(&p.transform_point(&q));
        assert_relative_eq!(back, q, epsilon = 1e-12);
        assert_relative_eq!(p.inverse_transform_point(&p.transform_point(&q)), q, epsilon = 1e-12);
        let id = p * p.inverse();
        assert_relative_eq!(id.translation, Vector3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn look_at_points_axis_at_target() {
        let eye = Point3::new(100.0, 50.0, 300.0);
        let pose = RigidPose::look_at(eye, Point3::origin(), Vector3::z()).unwrap();
        let axis = pose.transform_vector(&Vector3::z());
        assert_relative_eq!(axis, (Point3::origin() - eye).normalize(), epsilon = 1e-12);
        assert!(pose.is_valid());
        // Degenerate up vector still produces a valid frame.
        let down = RigidPose::look_at(Point3::new(0.0, 0.0, 400.0), Point3::origin(), Vector3::z())
            .unwrap();
        assert!(down.is_valid());
    }
}
