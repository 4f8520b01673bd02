//! Active stereo capture: intensities, depth-sensing probability and
//! simulated depth with dropout.

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    IntensityImage, PinholeCamera, ProbabilityMap, RadianceMap, SceneModel, SceneTracer, StereoRig, DepthMap, MISSING,
};
use crate::reflectance::{render_radiance_with, Illumination, PhongMaterial};
use crate::response::ResponseCurve;

/// How a probability becomes a measured / dropped pixel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum DropoutMode {
    /// Measured when a uniform draw is below `P`.
    #[default]
    Stochastic,
    /// Measured when `P ≥ threshold`.
    Deterministic { threshold: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensingConfig {
    /// Decay constant σ (intensity levels).
    pub sigma: f64,
    pub z_min_valid: f64,
    pub z_max_valid: f64,
    pub exposure_time: f64,
    pub dropout_mode: DropoutMode,
    /// Seed for dropout draws and depth noise.
    pub seed: u64,
    pub depth_noise_std: f64,
}

impl Default for SensingConfig {
    fn default() -> Self {
        Self {
            sigma: 100.0,
            z_min_valid: 5.0,
            z_max_valid: 255.0,
            exposure_time: 1.0,
            dropout_mode: DropoutMode::Stochastic,
            seed: 0,
            depth_noise_std: 0.1,
        }
    }
}

impl SensingConfig {
    /// Deterministic variant with threshold τ.
    pub fn deterministic(threshold: f64) -> Self {
        Self {
            dropout_mode: DropoutMode::Deterministic { threshold },
            ..Default::default()
        }
    }

    /// All problems, each naming its field.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        if !(self.sigma > 0.0) {
            p.push(format!("sensing.sigma must be > 0 (got {})", self.sigma));
        }
        if !(0.0 <= self.z_min_valid && self.z_min_valid < self.z_max_valid && self.z_max_valid <= 255.0) {
            p.push(format!(
                "sensing.z_min_valid / z_max_valid must satisfy 0 <= min < max <= 255 (got {}, {})",
                self.z_min_valid, self.z_max_valid
            ));
        }
        if !(self.exposure_time > 0.0) {
            p.push(format!("sensing.exposure_time must be > 0 (got {})", self.exposure_time));
        }
        if let DropoutMode::Deterministic { threshold } = self.dropout_mode {
            if !(threshold > 0.0 && threshold < 1.0) {
                p.push(format!("sensing.dropout_mode.threshold must be in (0, 1) (got {threshold})"));
            }
        }
        if !(self.depth_noise_std >= 0.0) {
            p.push(format!("sensing.depth_noise_std must be >= 0 (got {})", self.depth_noise_std));
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(p.join("; ")))
        }
    }
}

/// `exp((Z − Z_max)/σ)` inside `[Z_min, Z_max]`, 0 outside.
pub fn sensing_probability(z: f64, cfg: &SensingConfig) -> f64 {
    if z < cfg.z_min_valid || z > cfg.z_max_valid || z.is_nan() {
        return 0.0;
    }
    ((z - cfg.z_max_valid) / cfg.sigma).exp()
}

/// Elementwise `min(P_L, P_R)`.
pub fn stereo_probability(p_left: &ProbabilityMap, p_right: &ProbabilityMap) -> Result<ProbabilityMap> {
    p_left.ensure_same_dims(p_right)?;
    let data = p_left.data().iter().zip(p_right.data()).map(|(a, b)| a.min(*b)).collect();
    ProbabilityMap::from_vec(p_left.width(), p_left.height(), data)
}

/// Probability that `camera` images `point` well enough to match. Zero
/// outside the image or, with `occluders`, when the point is hidden.
#[allow(clippy::too_many_arguments)]
pub fn camera_probability(
    point: &Point3<f64>,
    normal: &Vector3<f64>,
    camera: &PinholeCamera,
    light: &Illumination,
    material: &PhongMaterial,
    curve: &ResponseCurve,
    cfg: &SensingConfig,
    occluders: Option<&SceneTracer>,
) -> f64 {
    if camera.project_to_pixel(point).is_none() {
        return 0.0;
    }
    let eye = camera.center();
    let prob = |e: f64| sensing_probability(curve.intensity_continuous(e, cfg.exposure_time), cfg);
    // Shade without shadows first; rays are only cast when they can change
    // the answer.
    let p_lit = prob(light.radiance_at(point, normal, &eye, material, None));
    let p_shadow = prob(material.k_d * light.ambient_intensity);
    if p_lit == 0.0 && p_shadow == 0.0 {
        return 0.0;
    }
    let Some(tracer) = occluders else { return p_lit };
    if !tracer.visible_from(&eye, point) {
        return 0.0;
    }
    if p_lit != p_shadow && tracer.segment_blocked(point, &light.projector) {
        return p_shadow;
    }
    p_lit
}

/// `min(P_L, P_R)` for a surface point seen by both cameras of `rig`.
pub fn point_probability(
    point: &Point3<f64>,
    normal: &Vector3<f64>,
    rig: &StereoRig,
    material: &PhongMaterial,
    curve: &ResponseCurve,
    cfg: &SensingConfig,
    occluders: Option<&SceneTracer>,
) -> f64 {
    let light = Illumination::from_rig(rig);
    let pl = camera_probability(point, normal, &rig.left, &light, material, curve, cfg, occluders);
    if pl == 0.0 {
        return 0.0;
    }
    pl.min(camera_probability(point, normal, &rig.right, &light, material, curve, cfg, occluders))
}

/// Everything one simulated shot produces.
#[derive(Clone, Debug)]
pub struct Capture {
    pub depth: DepthMap,
    pub left: IntensityImage,
    pub right: IntensityImage,
    /// `min(P_L, P_R)` in the left view.
    pub probability: ProbabilityMap,
    pub p_left: ProbabilityMap,
    /// Right-camera probability of the surface seen at each left pixel.
    pub p_right: ProbabilityMap,
}

/// Simulates one active stereo shot; depth lives in the left camera.
pub fn simulate_capture(scene: &SceneModel, rig: &StereoRig, curve: &ResponseCurve, cfg: &SensingConfig) -> Capture {
    simulate_capture_with(&SceneTracer::new(scene), scene, rig, curve, cfg)
}

pub fn simulate_capture_with(
    tracer: &SceneTracer,
    scene: &SceneModel,
    rig: &StereoRig,
    curve: &ResponseCurve,
    cfg: &SensingConfig,
) -> Capture {
    let light = Illumination::from_rig(rig);
    let cam = &rig.left;
    let (w, h) = (cam.width(), cam.height());
    let eye = cam.center();
    let axis = cam.pose.transform_vector(&Vector3::z());
    let noise = Normal::new(0.0, cfg.depth_noise_std.max(0.0)).expect("finite std");

    // Per pixel: (depth, P_L, P_R, radiance seen by the left camera).
    let rows: Vec<Vec<(f64, f64, f64, f64)>> = (0..h)
        .into_par_iter()
        .map(|v| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(v as u64);
            (0..w)
                .map(|u| {
                    // Fixed number of draws per pixel keeps streams aligned.
                    let draw: f64 = rng.random();
                    let jitter = noise.sample(&mut rng);
                    let dir = cam.pixel_ray_world(u, v);
                    let Some(hit) = tracer.trace(&eye, &dir) else {
                        return (MISSING, 0.0, 0.0, MISSING);
                    };
                    let mat = scene.material_of(hit.instance as usize);
                    let e = light.radiance_at(&hit.point, &hit.normal, &eye, mat, Some(tracer));
                    let pl = sensing_probability(curve.intensity_continuous(e, cfg.exposure_time), cfg);
                    let pr = camera_probability(&hit.point, &hit.normal, &rig.right, &light, mat, curve, cfg, Some(tracer));
                    let p = pl.min(pr);
                    let measured = match cfg.dropout_mode {
                        DropoutMode::Stochastic => draw < p,
                        DropoutMode::Deterministic { threshold } => p >= threshold,
                    };
                    let depth = if measured { hit.distance * dir.dot(&axis) + jitter } else { MISSING };
                    (depth, pl, pr, e)
                })
                .collect()
        })
        .collect();

    let cells: Vec<(f64, f64, f64, f64)> = rows.into_iter().flatten().collect();
    let grid = |f: fn(&(f64, f64, f64, f64)) -> f64| {
        RadianceMap::from_vec(w, h, cells.iter().map(f).collect()).expect("sized")
    };
    let depth = grid(|c| c.0);
    let p_left = grid(|c| c.1);
    let p_right = grid(|c| c.2);
    let left_radiance = grid(|c| c.3);
    let probability = stereo_probability(&p_left, &p_right).expect("same dims");
    let right_radiance = render_radiance_with(tracer, scene, &rig.right, &light);
    Capture {
        depth,
        left: intensity_image(&left_radiance, curve, cfg.exposure_time),
        right: intensity_image(&right_radiance, curve, cfg.exposure_time),
        probability,
        p_left,
        p_right,
    }
}

/// Quantizes a radiance map; off-object pixels take the floor intensity.
pub fn intensity_image(radiance: &RadianceMap, curve: &ResponseCurve, dt: f64) -> IntensityImage {
    radiance.map(|&e| if e.is_nan() { curve.z_min() } else { curve.intensity_from_radiance(e, dt) })
}

/// Left-camera image under full projector illumination.
pub fn white_pattern_image(scene: &SceneModel, rig: &StereoRig, curve: &ResponseCurve, dt: f64) -> IntensityImage {
    let light = Illumination::from_rig(rig);
    let radiance = render_radiance_with(&SceneTracer::new(scene), scene, &rig.left, &light);
    intensity_image(&radiance, curve, dt)
}
