use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::viewpoints::viewpoint_sphere;
use crate::error::{Error, Result};
use crate::fusion::FusionConfig;
use crate::geometry::{io, shapes, Instance, Intrinsics, RigLayout, RigidPose, SceneModel, TriangleMesh};
use crate::icp::IcpConfig;
use crate::planner::{HypothesisConfig, Policy, StopConditions, ViewpointCandidate};
use crate::reflectance::PhongMaterial;
use crate::response::ResponseCurve;
use crate::sensor::SensingConfig;

/// A full experiment: world, sensor, planner settings and the runs to make.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub scene: SceneSpec,
    pub rig: RigSpec,
    pub response: ResponseSpec,
    pub candidates: CandidateSpec,
    #[serde(default)]
    pub sensing: SensingConfig,
    #[serde(default)]
    pub hypotheses: HypothesisConfig,
    /// Draw a fresh hypothesis set after every captured view.
    #[serde(default)]
    pub refresh_hypotheses: bool,
    /// Material assumed by the planner; defaults to the target's true material.
    #[serde(default)]
    pub planning_material: Option<MaterialSpec>,
    #[serde(default = "default_policies")]
    pub policies: Vec<Policy>,
    #[serde(default)]
    pub stop: StopConditions,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub fusion: FusionConfig,
    #[serde(default)]
    pub icp: IcpConfig,
    /// Run ICP on the fused cloud after every iteration.
    #[serde(default = "default_true")]
    pub evaluate_pose: bool,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_policies() -> Vec<Policy> {
    Policy::ALL.to_vec()
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

fn default_true() -> bool {
    true
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

/// Objects in the world; the first one is the target whose pose is
/// hypothesized and whose pixels are scored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub objects: Vec<ObjectSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub shape: ShapeSpec,
    #[serde(default)]
    pub pose: PoseSpec,
    pub material: MaterialSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ShapeSpec {
    Plate {
        width_mm: f64,
        height_mm: f64,
        #[serde(default = "default_divisions")]
        divisions: usize,
    },
    Sphere {
        radius_mm: f64,
        #[serde(default = "default_subdivisions")]
        subdivisions: u32,
    },
    BentPlate {
        width_mm: f64,
        height_mm: f64,
        dihedral_deg: f64,
        #[serde(default = "default_divisions")]
        divisions: usize,
    },
    /// OBJ or PLY file, relative to the config file.
    Mesh { path: PathBuf },
}

fn default_divisions() -> usize {
    8
}

fn default_subdivisions() -> u32 {
    3
}

impl ShapeSpec {
    pub fn build(&self) -> Result<TriangleMesh> {
        match self {
            ShapeSpec::Plate { width_mm, height_mm, divisions } => shapes::plate(*width_mm, *height_mm, *divisions),
            ShapeSpec::Sphere { radius_mm, subdivisions } => shapes::sphere(*radius_mm, *subdivisions),
            ShapeSpec::BentPlate { width_mm, height_mm, dihedral_deg, divisions } => {
                shapes::bent_plate(*width_mm, *height_mm, *dihedral_deg, *divisions)
            }
            ShapeSpec::Mesh { path } => io::load_mesh(path),
        }
    }

    fn problems(&self, field: &str) -> Vec<String> {
        let mut p = Vec::new();
        let mut positive = |name: &str, v: f64| {
            if !(v > 0.0 && v.is_finite()) {
                p.push(format!("{field}.{name} must be > 0 (got {v})"));
            }
        };
        match self {
            ShapeSpec::Plate { width_mm, height_mm, .. } => {
                positive("width_mm", *width_mm);
                positive("height_mm", *height_mm);
            }
            ShapeSpec::Sphere { radius_mm, .. } => positive("radius_mm", *radius_mm),
            ShapeSpec::BentPlate { width_mm, height_mm, dihedral_deg, .. } => {
                positive("width_mm", *width_mm);
                positive("height_mm", *height_mm);
                if !(*dihedral_deg > 0.0 && *dihedral_deg <= 180.0) {
                    p.push(format!("{field}.dihedral_deg must be in (0, 180] (got {dihedral_deg})"));
                }
            }
            ShapeSpec::Mesh { path } => {
                if !path.is_file() {
                    p.push(format!("{field}.path: unresolved path {}", path.display()));
                }
            }
        }
        p
    }
}

/// Object → world placement: intrinsic XYZ Euler angles then translation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoseSpec {
    pub translation_mm: [f64; 3],
    pub rotation_deg: [f64; 3],
}

impl PoseSpec {
    pub fn pose(&self) -> RigidPose {
        RigidPose::from_euler_deg(self.rotation_deg, Vector3::from(self.translation_mm))
    }
}

/// A named preset (`tube-fitting`, `din-connector`, `matte`) or explicit
/// parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaterialSpec {
    Preset(String),
    Custom(PhongMaterial),
}

impl MaterialSpec {
    pub const PRESETS: [(&'static str, PhongMaterial); 3] = [
        ("tube-fitting", PhongMaterial::TUBE_FITTING),
        ("din-connector", PhongMaterial::DIN_CONNECTOR),
        ("matte", PhongMaterial::MATTE),
    ];

    pub fn resolve(&self) -> Result<PhongMaterial> {
        match self {
            MaterialSpec::Preset(name) => Self::PRESETS
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, m)| *m)
                .ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "unknown material preset `{name}` (expected tube-fitting, din-connector or matte)"
                    ))
                }),
            MaterialSpec::Custom(m) => {
                m.validate()?;
                Ok(*m)
            }
        }
    }
}

/// Camera pose given by eye, target and up (world).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewSpec {
    pub eye: [f64; 3],
    pub target: [f64; 3],
    #[serde(default = "default_up")]
    pub up: [f64; 3],
}

fn default_up() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

impl ViewSpec {
    pub fn pose(&self) -> Result<RigidPose> {
        RigidPose::look_at(Point3::from(self.eye), Point3::from(self.target), Vector3::from(self.up))
    }
}

/// Sensor geometry and the reference view.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigSpec {
    pub width: usize,
    pub height: usize,
    pub focal_px: f64,
    pub baseline_mm: f64,
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
    pub reference: ViewSpec,
}

fn default_intensity() -> f64 {
    1.0
}

fn default_falloff_reference() -> f64 {
    500.0
}

impl RigSpec {
    pub fn layout(&self) -> RigLayout {
        RigLayout {
            intrinsics: Intrinsics::centered(self.width, self.height, self.focal_px),
            baseline_mm: self.baseline_mm,
            projector_offset_mm: self.projector_offset_mm,
            projector_intensity: self.projector_intensity,
            ambient_intensity: self.ambient_intensity,
            inverse_square_falloff: self.inverse_square_falloff,
            falloff_reference_mm: self.falloff_reference_mm,
        }
    }

    fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        if self.width == 0 || self.height == 0 {
            p.push(format!("rig.width and rig.height must be >= 1 (got {}x{})", self.width, self.height));
        }
        for (name, v) in [
            ("focal_px", self.focal_px),
            ("baseline_mm", self.baseline_mm),
            ("falloff_reference_mm", self.falloff_reference_mm),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                p.push(format!("rig.{name} must be > 0 (got {v})"));
            }
        }
        for (name, v) in [("projector_intensity", self.projector_intensity), ("ambient_intensity", self.ambient_intensity)] {
            if !(v >= 0.0 && v.is_finite()) {
                p.push(format!("rig.{name} must be >= 0 (got {v})"));
            }
        }
        if let Err(e) = self.reference.pose() {
            p.push(format!("rig.reference: {e}"));
        }
        p
    }
}

/// Where the camera response comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ResponseSpec {
    /// A table written by `calibrate-response`, relative to the config file.
    File { path: PathBuf },
    Gamma {
        gamma: f64,
        #[serde(default = "default_saturation")]
        saturation: f64,
    },
    Linear {
        #[serde(default = "default_saturation")]
        saturation: f64,
    },
}

fn default_saturation() -> f64 {
    1.0
}

impl ResponseSpec {
    pub fn build(&self) -> Result<ResponseCurve> {
        match self {
            ResponseSpec::File { path } => ResponseCurve::load(path),
            ResponseSpec::Gamma { gamma, saturation } => ResponseCurve::gamma(*gamma, *saturation),
            ResponseSpec::Linear { saturation } => ResponseCurve::linear(*saturation),
        }
    }
}

/// Candidate viewpoints: a Fibonacci sphere or an explicit list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CandidateSpec {
    Sphere {
        #[serde(default)]
        center: [f64; 3],
        radius_mm: f64,
        count: usize,
        #[serde(default = "default_true")]
        hemisphere: bool,
    },
    Explicit { views: Vec<ViewSpec> },
}

impl CandidateSpec {
    pub fn build(&self) -> Result<Vec<ViewpointCandidate>> {
        match self {
            CandidateSpec::Sphere { center, radius_mm, count, hemisphere } => {
                viewpoint_sphere(Point3::from(*center), *radius_mm, *count, *hemisphere)
            }
            CandidateSpec::Explicit { views } => views
                .iter()
                .enumerate()
                .map(|(id, v)| Ok(ViewpointCandidate { id, pose: v.pose()? }))
                .collect(),
        }
    }

    fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        match self {
            CandidateSpec::Sphere { radius_mm, count, .. } => {
                if *count == 0 {
                    p.push("candidates.count must be >= 1".to_string());
                }
                if !(*radius_mm > 0.0 && radius_mm.is_finite()) {
                    p.push(format!("candidates.radius_mm must be > 0 (got {radius_mm})"));
                }
            }
            CandidateSpec::Explicit { views } => {
                if views.is_empty() {
                    p.push("candidates.views must not be empty".to_string());
                }
                for (i, v) in views.iter().enumerate() {
                    if let Err(e) = v.pose() {
                        p.push(format!("candidates.views[{i}]: {e}"));
                    }
                }
            }
        }
        p
    }
}

impl ExperimentConfig {
    /// Reads, resolves relative paths against the file's directory and
    /// validates.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base).map_err(|e| match e {
            Error::Parse { message, .. } => Error::parse(path, message),
            other => other,
        })
    }

    /// Parses TOML text; relative paths are taken relative to `base`.
    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::parse("<config>", e.to_string()))?;
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::InvalidArgument(format!("cannot serialize config: {e}")))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for o in &mut self.scene.objects {
            if let ShapeSpec::Mesh { path } = &mut o.shape {
                fix(path);
            }
        }
        if let ResponseSpec::File { path } = &mut self.response {
            fix(path);
        }
        fix(&mut self.output_dir);
    }

    /// Every problem with the config, not just the first.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        if self.scene.objects.is_empty() {
            p.push("scene.objects must contain at least one object".to_string());
        }
        for (i, o) in self.scene.objects.iter().enumerate() {
            p.extend(o.shape.problems(&format!("scene.objects[{i}].shape")));
            if let Err(e) = o.material.resolve() {
                p.push(format!("scene.objects[{i}].material: {e}"));
            }
        }
        if let Some(m) = &self.planning_material {
            if let Err(e) = m.resolve() {
                p.push(format!("planning_material: {e}"));
            }
        }
        p.extend(self.rig.problems());
        match &self.response {
            ResponseSpec::File { path } if !path.is_file() => {
                p.push(format!("response.path: unresolved path {}", path.display()));
            }
            ResponseSpec::File { .. } => {}
            other => {
                if let Err(e) = other.build() {
                    p.push(format!("response: {e}"));
                }
            }
        }
        p.extend(self.candidates.problems());
        p.extend(self.sensing.problems());
        p.extend(self.hypotheses.problems());
        if self.policies.is_empty() {
            p.push("policies must name at least one policy".to_string());
        }
        if self.policies.iter().collect::<BTreeSet<_>>().len() != self.policies.len() {
            p.push("policies must not repeat".to_string());
        }
        if self.seeds.is_empty() {
            p.push("seeds must contain at least one seed".to_string());
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            p.push("seeds must not repeat".to_string());
        }
        if self.stop.max_views == 0 {
            p.push("stop.max_views must be >= 1".to_string());
        }
        if !(self.stop.gain_threshold >= 0.0 && self.stop.gain_threshold.is_finite()) {
            p.push(format!("stop.gain_threshold must be a finite value >= 0 (got {})", self.stop.gain_threshold));
        }
        if !(self.fusion.consistency_mm > 0.0) {
            p.push(format!("fusion.consistency_mm must be > 0 (got {})", self.fusion.consistency_mm));
        }
        if self.icp.max_iter == 0 {
            p.push("icp.max_iter must be >= 1".to_string());
        }
        if !(self.icp.corr_dist > 0.0) {
            p.push(format!("icp.corr_dist must be > 0 (got {})", self.icp.corr_dist));
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(p))
        }
    }

    /// Hex SHA-256 of the config as canonical JSON (keys sorted), so key
    /// order in the source file does not matter.
    pub fn hash(&self) -> Result<String> {
        let value = serde_json::to_value(self).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let canonical = serde_json::to_string(&value).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
    }

    /// Ground-truth scene plus the target mesh and pose.
    pub fn build_scene(&self) -> Result<(SceneModel, Arc<TriangleMesh>, RigidPose, PhongMaterial)> {
        let mut meshes = Vec::new();
        let mut materials = Vec::new();
        let mut instances = Vec::new();
        for (i, o) in self.scene.objects.iter().enumerate() {
            meshes.push(Arc::new(o.shape.build()?));
            materials.push(o.material.resolve()?);
            instances.push(Instance { mesh: i, pose: o.pose.pose(), material: i });
        }
        let scene = SceneModel::new(meshes, materials, instances)?;
        let target = Arc::clone(&scene.meshes[0]);
        let pose = scene.instances[0].pose;
        let material = scene.materials[0];
        Ok((scene, target, pose, material))
    }
}
