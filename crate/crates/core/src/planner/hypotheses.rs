use std::sync::Arc;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{raycast_with, PinholeCamera, RaycastResult, RigidPose, SceneTracer, TriangleMesh};
use crate::reflectance::PhongMaterial;

/// One candidate object pose.
#[derive(Clone, Debug)]
pub struct PoseHypothesis {
    pub pose: RigidPose,
    pub confidence: f64,
    pub mesh: Arc<TriangleMesh>,
    pub material: PhongMaterial,
}

/// Hypotheses with their softmax weights.
#[derive(Clone, Debug)]
pub struct PoseHypothesisSet {
    hypotheses: Vec<PoseHypothesis>,
    weights: Vec<f64>,
}

impl PoseHypothesisSet {
    pub fn new(hypotheses: Vec<PoseHypothesis>) -> Result<Self> {
        if hypotheses.is_empty() {
            return Err(Error::InvalidArgument("need at least one pose hypothesis".into()));
        }
        if let Some(h) = hypotheses.iter().find(|h| !h.confidence.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite confidence {}", h.confidence)));
        }
        let conf: Vec<f64> = hypotheses.iter().map(|h| h.confidence).collect();
        Ok(Self {
            weights: softmax(&conf),
            hypotheses,
        })
    }

    pub fn hypotheses(&self) -> &[PoseHypothesis] {
        &self.hypotheses
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    /// Highest-confidence hypothesis (first on ties).
    pub fn best(&self) -> &PoseHypothesis {
        let mut best = &self.hypotheses[0];
        for h in &self.hypotheses[1..] {
            if h.confidence > best.confidence {
                best = h;
            }
        }
        best
    }
}

/// Numerically stable softmax.
pub fn softmax(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Synthetic stand-in for a template-matching pose estimator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HypothesisConfig {
    pub count: usize,
    /// Per-axis rotation-vector standard deviation (degrees).
    pub rot_std_deg: f64,
    /// Per-axis translation standard deviation (mm).
    pub trans_std_mm: f64,
    /// Multiplies the normalized perturbation magnitude.
    pub confidence_scale: f64,
    /// Standard deviation of the noise added to each confidence.
    pub confidence_jitter: f64,
}

impl Default for HypothesisConfig {
    fn default() -> Self {
        Self {
            count: 5,
            rot_std_deg: 3.0,
            trans_std_mm: 3.0,
            confidence_scale: 1.0,
            confidence_jitter: 0.5,
        }
    }
}

impl HypothesisConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        if self.count == 0 {
            p.push("hypotheses.count must be >= 1".to_string());
        }
        for (name, v) in [
            ("rot_std_deg", self.rot_std_deg),
            ("trans_std_mm", self.trans_std_mm),
            ("confidence_scale", self.confidence_scale),
            ("confidence_jitter", self.confidence_jitter),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                p.push(format!("hypotheses.{name} must be a finite value >= 0 (got {v})"));
            }
        }
        p
    }
}

/// Perturbs `gt` about the object origin. Confidence is
/// `−scale·|δ| + jitter`, where `|δ|` is the perturbation measured in
/// standard deviations; without pose noise there is no jitter either.
pub fn synthetic_hypotheses(
    gt: &RigidPose,
    mesh: Arc<TriangleMesh>,
    material: PhongMaterial,
    cfg: &HypothesisConfig,
    seed: u64,
) -> Result<PoseHypothesisSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let noisy = cfg.rot_std_deg > 0.0 || cfg.trans_std_mm > 0.0;
    let mut hyps = Vec::with_capacity(cfg.count);
    for _ in 0..cfg.count {
        let r = Vector3::from_fn(|_, _| std_normal.sample(&mut rng));
        let t = Vector3::from_fn(|_, _| std_normal.sample(&mut rng));
        let jitter = std_normal.sample(&mut rng);
        let rotvec = r * cfg.rot_std_deg.to_radians();
        let delta = RigidPose::from_rotation_vector(rotvec, Vector3::zeros());
        let pose = RigidPose {
            rotation: delta.rotation * gt.rotation,
            translation: gt.translation + t * cfg.trans_std_mm,
        };
        let mut magnitude_sq = 0.0;
        if cfg.rot_std_deg > 0.0 {
            magnitude_sq += r.norm_squared();
        }
        if cfg.trans_std_mm > 0.0 {
            magnitude_sq += t.norm_squared();
        }
        let confidence = if noisy {
            -cfg.confidence_scale * magnitude_sq.sqrt() + cfg.confidence_jitter * jitter
        } else {
            0.0
        };
        hyps.push(PoseHypothesis {
            pose,
            confidence,
            mesh: Arc::clone(&mesh),
            material,
        });
    }
    PoseHypothesisSet::new(hyps)
}

/// Depth and normals of the hypothesized object alone in the reference view.
pub fn hypothesis_maps(h: &PoseHypothesis, reference: &PinholeCamera) -> RaycastResult {
    raycast_with(&SceneTracer::for_mesh(&h.mesh, &h.pose), reference)
}
