//! Experiment configuration, scene generators and the batch runner.

pub mod config;
pub mod runner;
pub mod scenes;
pub mod viewpoints;

pub use config::{
    CandidateSpec, ExperimentConfig, MaterialSpec, ObjectSpec, PoseSpec, ResponseSpec, RigSpec, SceneSpec, ShapeSpec,
    ViewSpec,
};
pub use runner::{
    build_problem, read_rows, run_experiment, run_id, summarize, write_outputs, write_rows, write_summary,
    ExperimentResult, Manifest, OutputPaths, PolicySummary, ResultRow, TimingRow,
};
pub use scenes::{builtin_scene, preset_config, BUILTIN_SCENES};
pub use viewpoints::viewpoint_sphere;
