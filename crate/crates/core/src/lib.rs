//! Active stereo sensing simulation for reflective surfaces and
//! next-best-view planning for depth completion.
//!
//! The pipeline: Phong reflectance ([`reflectance`]) feeds a camera response
//! curve ([`response`]) whose intensities drive a per-pixel depth-sensing
//! probability ([`sensor`]). Pose hypotheses turn that model into an expected
//! information gain per candidate viewpoint ([`planner`]); captured views are
//! fused back into the reference depth map and scored ([`fusion`],
//! [`metrics`], [`icp`]).

pub mod calibration;
pub mod error;
pub mod experiment;
pub mod fusion;
pub mod geometry;
pub mod icp;
pub mod metrics;
pub mod planner;
pub mod reflectance;
pub mod response;
pub mod sensor;
pub mod spatial;

pub use error::{Error, Result};
pub use geometry::{
    DepthMap, Intrinsics, IntensityImage, NormalMap, PinholeCamera, ProbabilityMap, RadianceMap,
    RigLayout, RigidPose, SceneModel, StereoRig, TriangleMesh,
};
pub use reflectance::{PhongMaterial, ShadingFrame};
pub use response::{ExposureStack, ResponseCurve};
pub use sensor::{DropoutMode, SensingConfig};
