//! Meshes, poses, cameras and ray casting.

pub mod bvh;
pub mod camera;
pub mod io;
pub mod maps;
pub mod mesh;
pub mod normals;
pub mod pose;
pub mod scene;
pub mod shapes;

pub use camera::{Intrinsics, PinholeCamera, RigLayout, StereoRig};
pub use maps::{
    DepthMap, Grid, HitMap, IntensityImage, NormalMap, ProbabilityMap, RadianceMap, MISSING,
};
pub use mesh::{mesh_diameter, TriangleMesh};
pub use normals::{estimate_normals_pca, estimate_normals_pca_with, PcaNormalConfig};
pub use pose::RigidPose;
pub use scene::{raycast_view, raycast_with, Instance, RaycastResult, SceneModel, SceneTracer, SurfaceHit};
