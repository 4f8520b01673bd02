use std::sync::Arc;

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;

use super::bvh::Bvh;
use super::camera::PinholeCamera;
use super::maps::{DepthMap, HitMap, NormalMap, MISSING};
use super::mesh::{triangle_normal, TriangleMesh};
use super::pose::RigidPose;
use crate::error::{Error, Result};
use crate::reflectance::PhongMaterial;

/// Relative + absolute slack used when deciding whether a surface point is the
/// first thing a ray hits.
const VISIBILITY_REL_EPS: f64 = 1e-6;
const VISIBILITY_ABS_EPS: f64 = 1e-3;

/// One placed object.
#[derive(Clone, Debug)]
pub struct Instance {
    pub mesh: usize,
    pub pose: RigidPose,
    pub material: usize,
}

/// Meshes, materials and their placements.
#[derive(Clone, Debug, Default)]
pub struct SceneModel {
    pub meshes: Vec<Arc<TriangleMesh>>,
    pub materials: Vec<PhongMaterial>,
    pub instances: Vec<Instance>,
}

impl SceneModel {
    pub fn new(
        meshes: Vec<Arc<TriangleMesh>>,
        materials: Vec<PhongMaterial>,
        instances: Vec<Instance>,
    ) -> Result<Self> {
        let scene = Self {
            meshes,
            materials,
            instances,
        };
        scene.validate()?;
        Ok(scene)
    }

    /// Single mesh, single material, one placement.
    pub fn single(mesh: Arc<TriangleMesh>, pose: RigidPose, material: PhongMaterial) -> Self {
        Self {
            meshes: vec![mesh],
            materials: vec![material],
            instances: vec![Instance {
                mesh: 0,
                pose,
                material: 0,
            }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, inst) in self.instances.iter().enumerate() {
            if inst.mesh >= self.meshes.len() {
                return Err(Error::UnresolvedReference(format!("instance {i} mesh {}", inst.mesh)));
            }
            if inst.material >= self.materials.len() {
                return Err(Error::UnresolvedReference(format!(
                    "instance {i} material {}",
                    inst.material
                )));
            }
        }
        Ok(())
    }

    pub fn material_of(&self, instance: usize) -> &PhongMaterial {
        &self.materials[self.instances[instance].material]
    }
}

/// A scene flattened into world space with a BVH for ray queries.
#[derive(Clone, Debug)]
pub struct SceneTracer {
    bvh: Bvh,
    normals: Vec<Vector3<f64>>,
    instance_of: Vec<u32>,
}

/// Surface hit along a pixel ray.
#[derive(Clone, Copy, Debug)]
pub struct SurfaceHit {
    pub point: Point3<f64>,
    /// Geometric normal flipped to face the ray origin.
    pub normal: Vector3<f64>,
    pub instance: u32,
    pub distance: f64,
}

impl SceneTracer {
    pub fn new(scene: &SceneModel) -> Self {
        let mut tris = Vec::new();
        let mut normals = Vec::new();
        let mut instance_of = Vec::new();
        for (idx, inst) in scene.instances.iter().enumerate() {
            let mesh = &scene.meshes[inst.mesh];
            for t in 0..mesh.triangles().len() {
                let world = mesh.triangle(t).map(|p| inst.pose.transform_point(&p));
                normals.push(triangle_normal(&world));
                tris.push(world);
                instance_of.push(idx as u32);
            }
        }
        Self {
            bvh: Bvh::build(tris),
            normals,
            instance_of,
        }
    }

    /// Tracer for one mesh at one pose, reported as instance 0.
    pub fn for_mesh(mesh: &TriangleMesh, pose: &RigidPose) -> Self {
        let mut tris = Vec::with_capacity(mesh.triangles().len());
        let mut normals = Vec::with_capacity(mesh.triangles().len());
        for t in 0..mesh.triangles().len() {
            let world = mesh.triangle(t).map(|p| pose.transform_point(&p));
            normals.push(triangle_normal(&world));
            tris.push(world);
        }
        let n = tris.len();
        Self {
            bvh: Bvh::build(tris),
            normals,
            instance_of: vec![0; n],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.bvh.is_empty()
    }

    /// First surface along a unit-direction ray.
    pub fn trace(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<SurfaceHit> {
        let hit = self.bvh.closest_hit(origin, dir, 1e-9, f64::INFINITY)?;
        let mut n = self.normals[hit.triangle];
        if n.dot(dir) > 0.0 {
            n = -n;
        }
        Some(SurfaceHit {
            point: origin + dir * hit.t,
            normal: n,
            instance: self.instance_of[hit.triangle],
            distance: hit.t,
        })
    }

    /// True when the straight segment from `from` to `to` crosses geometry,
    /// ignoring the immediate neighbourhood of both ends.
    pub fn segment_blocked(&self, from: &Point3<f64>, to: &Point3<f64>) -> bool {
        let d = to - from;
        let len = d.norm();
        if len < 1e-12 {
            return false;
        }
        let eps = VISIBILITY_ABS_EPS + VISIBILITY_REL_EPS * len;
        self.bvh.occluded(from, &(d / len), eps, len - eps)
    }

    /// True when `point` is the first surface seen from `eye`.
    pub fn visible_from(&self, eye: &Point3<f64>, point: &Point3<f64>) -> bool {
        !self.segment_blocked(eye, point)
    }
}

/// Per-pixel ray casting output.
#[derive(Clone, Debug)]
pub struct RaycastResult {
    pub depth: DepthMap,
    pub normals: NormalMap,
    pub hits: HitMap,
}

/// Renders z-depth, camera-facing world normals and instance ids.
pub fn raycast_view(scene: &SceneModel, camera: &PinholeCamera) -> RaycastResult {
    raycast_with(&SceneTracer::new(scene), camera)
}

/// [`raycast_view`] with a prebuilt tracer.
pub fn raycast_with(tracer: &SceneTracer, camera: &PinholeCamera) -> RaycastResult {
    let (w, h) = (camera.width(), camera.height());
    let origin = camera.center();
    let axis = camera.pose.transform_vector(&Vector3::z());
    let rows: Vec<Vec<(f64, Vector3<f64>, Option<u32>)>> = (0..h)
        .into_par_iter()
        .map(|v| {
            (0..w)
                .map(|u| {
                    let dir = camera.pixel_ray_world(u, v);
                    match tracer.trace(&origin, &dir) {
                        Some(hit) => (hit.distance * dir.dot(&axis), hit.normal, Some(hit.instance)),
                        None => (MISSING, Vector3::repeat(MISSING), None),
                    }
                })
                .collect()
        })
        .collect();
    let mut depth = Vec::with_capacity(w * h);
    let mut normals = Vec::with_capacity(w * h);
    let mut hits = Vec::with_capacity(w * h);
    for (d, n, i) in rows.into_iter().flatten() {
        depth.push(d);
        normals.push(n);
        hits.push(i);
    }
    RaycastResult {
        depth: DepthMap::from_vec(w, h, depth).expect("sized"),
        normals: NormalMap::from_vec(w, h, normals).expect("sized"),
        hits: HitMap::from_vec(w, h, hits).expect("sized"),
    }
}
