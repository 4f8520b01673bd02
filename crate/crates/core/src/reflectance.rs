//! Phong reflectance: diffuse and specular radiance received by a camera
//! from a surface lit by the projector.

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PinholeCamera, RadianceMap, SceneModel, SceneTracer, StereoRig, MISSING};

const UNIT_TOL: f64 = 1e-6;

/// Phong coefficients of one material.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhongMaterial {
    /// Diffuse coefficient.
    pub k_d: f64,
    /// Specular coefficient.
    pub k_s: f64,
    /// Glossiness exponent.
    pub n: f64,
}

impl PhongMaterial {
    pub fn new(k_d: f64, k_s: f64, n: f64) -> Result<Self> {
        let m = Self { k_d, k_s, n };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_d >= 0.0 && self.k_s >= 0.0 && self.n > 0.0) || !self.n.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "Phong material needs k_d >= 0, k_s >= 0, n > 0 (got {}, {}, {})",
                self.k_d, self.k_s, self.n
            )));
        }
        Ok(())
    }

    /// Polished metal fitting.
    pub const TUBE_FITTING: PhongMaterial = PhongMaterial { k_d: 0.037, k_s: 0.74, n: 19.9 };
    /// Connector with a glossier metallic finish.
    pub const DIN_CONNECTOR: PhongMaterial = PhongMaterial { k_d: 0.04, k_s: 0.82, n: 38.9 };
    /// Matte reference surface.
    pub const MATTE: PhongMaterial = PhongMaterial { k_d: 0.45, k_s: 0.02, n: 8.65 };
}

/// Local geometry at a surface point. All directions point away from the
/// surface and are unit length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShadingFrame {
    pub point: Point3<f64>,
    pub normal: Vector3<f64>,
    pub to_light: Vector3<f64>,
    pub to_camera: Vector3<f64>,
}

impl ShadingFrame {
    pub fn new(
        point: Point3<f64>,
        normal: Vector3<f64>,
        to_light: Vector3<f64>,
        to_camera: Vector3<f64>,
    ) -> Result<Self> {
        for (name, v) in [("normal", normal), ("to_light", to_light), ("to_camera", to_camera)] {
            if (v.norm() - 1.0).abs() > UNIT_TOL {
                return Err(Error::InvalidArgument(format!("{name} is not unit length (|v| = {})", v.norm())));
            }
        }
        Ok(Self {
            point,
            normal,
            to_light,
            to_camera,
        })
    }

    /// Frame at `point` lit from `light` and seen from `eye`. The normal is
    /// flipped, if needed, to face the eye.
    pub fn looking_at(point: Point3<f64>, normal: Vector3<f64>, light: &Point3<f64>, eye: &Point3<f64>) -> Self {
        let to_light = (light - point).normalize();
        let to_camera = (eye - point).normalize();
        let normal = if normal.dot(&to_camera) < 0.0 { -normal } else { normal };
        Self {
            point,
            normal,
            to_light,
            to_camera,
        }
    }

    /// cos θ between light direction and normal.
    pub fn cos_theta(&self) -> f64 {
        self.to_light.dot(&self.normal)
    }

    /// cos α between mirror ray and camera direction; unclamped.
    pub fn cos_alpha(&self) -> f64 {
        let r = 2.0 * self.cos_theta() * self.normal - self.to_light;
        r.dot(&self.to_camera)
    }
}

/// `L_in · max(0, L·N)`.
pub fn diffuse_radiance(l_in: f64, frame: &ShadingFrame) -> f64 {
    l_in * frame.cos_theta().max(0.0)
}

/// Mirror direction `2(L·N)N − L`.
pub fn mirror_ray(frame: &ShadingFrame) -> Result<Vector3<f64>> {
    let c = frame.cos_theta();
    if c < 0.0 {
        return Err(Error::LightBelowSurface(c));
    }
    Ok(2.0 * c * frame.normal - frame.to_light)
}

/// `L_in · (R·C)^n` inside the lobe, 0 outside it or when the light is below
/// the surface.
pub fn specular_radiance(l_in: f64, frame: &ShadingFrame, mat: &PhongMaterial) -> f64 {
    if frame.cos_theta() < 0.0 {
        return 0.0;
    }
    let cos_alpha = frame.cos_alpha();
    if cos_alpha <= 0.0 {
        return 0.0;
    }
    l_in * cos_alpha.min(1.0).powf(mat.n)
}

/// `k_d·E_d + k_s·E_s`.
pub fn phong_radiance(l_in: f64, frame: &ShadingFrame, mat: &PhongMaterial) -> f64 {
    mat.k_d * diffuse_radiance(l_in, frame) + mat.k_s * specular_radiance(l_in, frame, mat)
}

/// Light sources seen by the scene.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Illumination {
    pub projector: Point3<f64>,
    pub projector_intensity: f64,
    pub ambient_intensity: f64,
    pub inverse_square_falloff: bool,
    pub falloff_reference_mm: f64,
}

impl Illumination {
    pub fn from_rig(rig: &StereoRig) -> Self {
        Self {
            projector: rig.projector_position(),
            projector_intensity: rig.projector_intensity,
            ambient_intensity: rig.ambient_intensity,
            inverse_square_falloff: rig.inverse_square_falloff,
            falloff_reference_mm: rig.falloff_reference_mm,
        }
    }

    /// Projector intensity arriving at `point`.
    pub fn incident(&self, point: &Point3<f64>) -> f64 {
        if self.inverse_square_falloff {
            let d = (self.projector - point).norm();
            if d > 0.0 {
                let r = self.falloff_reference_mm / d;
                return self.projector_intensity * r * r;
            }
        }
        self.projector_intensity
    }

    /// Radiance sent from `point` towards `eye`. `occluders`, when given, is
    /// used for the hard shadow test towards the projector; shadowed points
    /// keep only the ambient term.
    pub fn radiance_at(
        &self,
        point: &Point3<f64>,
        normal: &Vector3<f64>,
        eye: &Point3<f64>,
        mat: &PhongMaterial,
        occluders: Option<&SceneTracer>,
    ) -> f64 {
        let ambient = mat.k_d * self.ambient_intensity;
        let frame = ShadingFrame::looking_at(*point, *normal, &self.projector, eye);
        if frame.cos_theta() <= 0.0 {
            return ambient;
        }
        if occluders.is_some_and(|t| t.segment_blocked(point, &self.projector)) {
            return ambient;
        }
        phong_radiance(self.incident(point), &frame, mat) + ambient
    }
}

/// Radiance map seen by `camera`; `MISSING` off-object.
pub fn render_radiance(scene: &SceneModel, camera: &PinholeCamera, light: &Illumination) -> RadianceMap {
    render_radiance_with(&SceneTracer::new(scene), scene, camera, light)
}

pub fn render_radiance_with(
    tracer: &SceneTracer,
    scene: &SceneModel,
    camera: &PinholeCamera,
    light: &Illumination,
) -> RadianceMap {
    let (w, h) = (camera.width(), camera.height());
    let eye = camera.center();
    let rows: Vec<Vec<f64>> = (0..h)
        .into_par_iter()
        .map(|v| {
            (0..w)
                .map(|u| {
                    let dir = camera.pixel_ray_world(u, v);
                    match tracer.trace(&eye, &dir) {
                        Some(hit) => light.radiance_at(
                            &hit.point,
                            &hit.normal,
                            &eye,
                            scene.material_of(hit.instance as usize),
                            Some(tracer),
                        ),
                        None => MISSING,
                    }
                })
                .collect()
        })
        .collect();
    RadianceMap::from_vec(w, h, rows.into_iter().flatten().collect()).expect("sized")
}
