use std::path::PathBuf;

use super::config::{
    CandidateSpec, ExperimentConfig, MaterialSpec, ObjectSpec, PoseSpec, ResponseSpec, RigSpec, SceneSpec, ShapeSpec,
    ViewSpec,
};
use crate::error::{Error, Result};
use crate::fusion::FusionConfig;
use crate::icp::IcpConfig;
use crate::planner::{HypothesisConfig, Policy, StopConditions};
use crate::sensor::SensingConfig;

pub const BUILTIN_SCENES: [&str; 3] = ["plate", "sphere", "bent-plate"];

/// Desk-scale stand-in objects at the world origin, in the reflective
/// tube-fitting material.
pub fn builtin_scene(name: &str) -> Result<SceneSpec> {
    let shape = match name {
        "plate" => ShapeSpec::Plate { width_mm: 120.0, height_mm: 80.0, divisions: 8 },
        "sphere" => ShapeSpec::Sphere { radius_mm: 40.0, subdivisions: 3 },
        "bent-plate" => ShapeSpec::BentPlate { width_mm: 120.0, height_mm: 80.0, dihedral_deg: 120.0, divisions: 8 },
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown scene `{other}` (expected one of {})",
                BUILTIN_SCENES.join(", ")
            )))
        }
    };
    // Flat parts are tilted so the overhead reference view is off the
    // specular lobe.
    let rotation_deg = if name == "sphere" { [0.0; 3] } else { [30.0, 0.0, 0.0] };
    Ok(SceneSpec {
        objects: vec![ObjectSpec {
            shape,
            pose: PoseSpec { translation_mm: [0.0; 3], rotation_deg },
            material: MaterialSpec::Preset("tube-fitting".into()),
        }],
    })
}

/// Complete experiment around a built-in scene: an 80×60 rig 300 mm above
/// the object, 32 hemisphere candidates, three policies, 20 seeds.
pub fn preset_config(scene: &str) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig {
        name: scene.to_string(),
        scene: builtin_scene(scene)?,
        rig: RigSpec {
            width: 80,
            height: 60,
            focal_px: 100.0,
            baseline_mm: 40.0,
            projector_offset_mm: [0.0; 3],
            projector_intensity: 1.0,
            ambient_intensity: 0.0,
            inverse_square_falloff: false,
            falloff_reference_mm: 500.0,
            reference: ViewSpec { eye: [0.0, 0.0, 300.0], target: [0.0; 3], up: [0.0, 1.0, 0.0] },
        },
        response: ResponseSpec::Gamma { gamma: 2.2, saturation: 1.0 },
        candidates: CandidateSpec::Sphere { center: [0.0; 3], radius_mm: 300.0, count: 32, hemisphere: true },
        sensing: SensingConfig::default(),
        hypotheses: HypothesisConfig::default(),
        refresh_hypotheses: false,
        planning_material: None,
        policies: Policy::ALL.to_vec(),
        stop: StopConditions::default(),
        seeds: (0..20).collect(),
        fusion: FusionConfig::default(),
        icp: IcpConfig::default(),
        evaluate_pose: true,
        output_dir: PathBuf::from("results").join(scene),
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    #[test]
    fn every_builtin_builds() {
        for name in BUILTIN_SCENES {
            let cfg = preset_config(name).unwrap();
            let (scene, mesh, _, _) = cfg.build_scene().unwrap();
            assert_eq!(scene.instances.len(), 1);
            assert!(mesh.diameter() > 0.0);
        }
        assert!(builtin_scene("teapot").is_err());
    }

    #[test]
    fn preset_round_trips_through_toml() {
        let cfg = preset_config("plate").unwrap();
        let text = cfg.to_toml().unwrap();
        let back = ExperimentConfig::from_toml_str(&text, Path::new("/")).unwrap();
        assert_eq!(back.hash().unwrap(), ExperimentConfig { output_dir: "/results/plate".into(), ..cfg }.hash().unwrap());
    }
}
