use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::pose::RigidPose;
use crate::error::{Error, Result};

/// Pinhole intrinsics without lens distortion. Pixel `(u, v)` has its centre
/// at image coordinates `(u, v)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    /// Principal point at the image centre.
    pub fn centered(width: usize, height: usize, focal: f64) -> Self {
        Self {
            fx: focal,
            fy: focal,
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.fx > 0.0 && self.fy > 0.0) {
            problems.push(format!("focal lengths must be positive (fx={}, fy={})", self.fx, self.fy));
        }
        if self.width == 0 || self.height == 0 {
            problems.push("image size must be nonzero".to_string());
        }
        if !(0.0..self.width as f64).contains(&self.cx) || !(0.0..self.height as f64).contains(&self.cy) {
            problems.push(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(problems.join("; ")))
        }
    }
}

/// A posed pinhole camera (camera → world). Camera frame: +x right, +y down,
/// +z along the optical axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PinholeCamera {
    pub intrinsics: Intrinsics,
    pub pose: RigidPose,
}

impl PinholeCamera {
    pub fn new(intrinsics: Intrinsics, pose: RigidPose) -> Result<Self> {
        intrinsics.validate()?;
        if !pose.is_valid() {
            return Err(Error::InvalidArgument("camera pose rotation is not orthonormal".into()));
        }
        Ok(Self { intrinsics, pose })
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    pub fn center(&self) -> Point3<f64> {
        self.pose.origin()
    }

    /// Camera-frame ray direction through pixel `(u, v)` with unit z component.
    #[inline]
    pub fn pixel_ray_camera(&self, u: f64, v: f64) -> Vector3<f64> {
        let k = &self.intrinsics;
        Vector3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0)
    }

    /// World-frame unit ray direction through the centre of pixel `(u, v)`.
    pub fn pixel_ray_world(&self, u: usize, v: usize) -> Vector3<f64> {
        self.pose
            .transform_vector(&self.pixel_ray_camera(u as f64, v as f64))
            .normalize()
    }

    /// World point seen at pixel `(u, v)` with z-depth `depth`.
    pub fn backproject(&self, u: usize, v: usize, depth: f64) -> Point3<f64> {
        let p = self.pixel_ray_camera(u as f64, v as f64) * depth;
        self.pose.transform_point(&Point3::from(p))
    }

    /// Continuous image coordinates and z-depth of a world point, `None` when
    /// the point is at or behind the camera plane.
    pub fn project(&self, p: &Point3<f64>) -> Option<(f64, f64, f64)> {
        let c = self.pose.inverse_transform_point(p);
        if c.z <= 1e-9 {
            return None;
        }
        let k = &self.intrinsics;
        Some((k.fx * c.x / c.z + k.cx, k.fy * c.y / c.z + k.cy, c.z))
    }

    /// Nearest pixel and z-depth of a world point, `None` outside the image.
    pub fn project_to_pixel(&self, p: &Point3<f64>) -> Option<(usize, usize, f64)> {
        let (x, y, z) = self.project(p)?;
        let (u, v) = (x.round(), y.round());
        if u < 0.0 || v < 0.0 || u >= self.width() as f64 || v >= self.height() as f64 {
            return None;
        }
        Some((u as usize, v as usize, z))
    }

    /// Same intrinsics, different pose.
    pub fn with_pose(&self, pose: RigidPose) -> Self {
        Self {
            intrinsics: self.intrinsics,
            pose,
        }
    }
}

/// World-placed active stereo sensor: two cameras plus a point-like projector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StereoRig {
    pub left: PinholeCamera,
    pub right: PinholeCamera,
    pub projector_pose: RigidPose,
    /// Projector radiant intensity `L_p` (canonical units).
    pub projector_intensity: f64,
    /// Ambient intensity `L_a`, 0 by default.
    pub ambient_intensity: f64,
    /// Apply `(d_ref / d)²` falloff to the projector light.
    pub inverse_square_falloff: bool,
    /// Distance (mm) at which the falloff factor is 1.
    pub falloff_reference_mm: f64,
}

impl StereoRig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.projector_intensity > 0.0) {
            problems.push("projector_intensity must be > 0".to_string());
        }
        if !(self.ambient_intensity >= 0.0) {
            problems.push("ambient_intensity must be >= 0".to_string());
        }
        if (self.left.center() - self.right.center()).norm() < 1e-9 {
            problems.push("left and right cameras must not coincide".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(problems.join("; ")))
        }
    }

    pub fn projector_position(&self) -> Point3<f64> {
        self.projector_pose.origin()
    }

    /// Projector light reaching a point at `distance` mm.
    pub fn incident_intensity(&self, distance: f64) -> f64 {
        if self.inverse_square_falloff && distance > 0.0 {
            let r = self.falloff_reference_mm / distance;
            self.projector_intensity * r * r
        } else {
            self.projector_intensity
        }
    }
}

/// Rig-frame description of the sensor. The rig origin sits midway between
/// the cameras at the projector; all optical axes are parallel to rig +z.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigLayout {
    pub intrinsics: Intrinsics,
    /// Distance between the camera centres (mm).
    pub baseline_mm: f64,
    /// Projector position relative to the rig origin (mm).
    #[serde(default)]
    pub projector_offset_mm: [f64; 3],
    #[serde(default = "default_intensity")]
    pub projector_intensity: f64,
    #[serde(default)]
    pub ambient_intensity: f64,
    #[serde(default)]
    pub inverse_square_falloff: bool,
    #[serde(default = "default_falloff_reference")]
    pub falloff_reference_mm: f64,
}

fn default_intensity() -> f64 {
    1.0
}

fn default_falloff_reference() -> f64 {
    500.0
}

impl RigLayout {
    pub fn new(intrinsics: Intrinsics, baseline_mm: f64) -> Self {
        Self {
            intrinsics,
            baseline_mm,
            projector_offset_mm: [0.0; 3],
            projector_intensity: 1.0,
            ambient_intensity: 0.0,
            inverse_square_falloff: false,
            falloff_reference_mm: default_falloff_reference(),
        }
    }

    /// Places the rig in the world with the given rig → world pose.
    pub fn place(&self, rig_pose: &RigidPose) -> Result<StereoRig> {
        let half = self.baseline_mm / 2.0;
        let left = *rig_pose * RigidPose::from_translation(Vector3::new(-half, 0.0, 0.0));
        let right = *rig_pose * RigidPose::from_translation(Vector3::new(half, 0.0, 0.0));
        let projector =
            *rig_pose * RigidPose::from_translation(Vector3::from(self.projector_offset_mm));
        let rig = StereoRig {
            left: PinholeCamera::new(self.intrinsics, left)?,
            right: PinholeCamera::new(self.intrinsics, right)?,
            projector_pose: projector,
            projector_intensity: self.projector_intensity,
            ambient_intensity: self.ambient_intensity,
            inverse_square_falloff: self.inverse_square_falloff,
            falloff_reference_mm: self.falloff_reference_mm,
        };
        rig.validate()?;
        Ok(rig)
    }
}
