use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Triangles whose area falls below this (mm²) are dropped on construction.
const DEGENERATE_AREA: f64 = 1e-12;

/// An indexed triangle mesh in millimetres.
#[derive(Clone, Debug)]
pub struct TriangleMesh {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[u32; 3]>,
    diameter: f64,
}

impl TriangleMesh {
    /// Validates indices, drops zero-area triangles and caches the diameter.
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        let n = vertices.len();
        if let Some(bad) = triangles
            .iter()
            .find(|t| t.iter().any(|&i| i as usize >= n))
        {
            return Err(Error::InvalidArgument(format!(
                "triangle {bad:?} references a vertex outside 0..{n}"
            )));
        }
        let triangles = triangles
            .into_iter()
            .filter(|t| {
                let [a, b, c] = t.map(|i| vertices[i as usize]);
                (b - a).cross(&(c - a)).norm() * 0.5 > DEGENERATE_AREA
            })
            .collect();
        let diameter = if n >= 2 { brute_force_diameter(&vertices) } else { 0.0 };
        Ok(Self {
            vertices,
            triangles,
            diameter,
        })
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    /// Cached maximum pairwise vertex distance (0 for fewer than 2 vertices).
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn triangle(&self, index: usize) -> [Point3<f64>; 3] {
        self.triangles[index].map(|i| self.vertices[i as usize])
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|i| triangle_area(&self.triangle(i))).sum()
    }

    /// Area-weighted uniform samples on the surface, deterministic in `seed`.
    pub fn sample_surface(&self, count: usize, seed: u64) -> Vec<Point3<f64>> {
        if self.triangles.is_empty() || count == 0 {
            return Vec::new();
        }
        let mut cumulative = Vec::with_capacity(self.triangles.len());
        let mut total = 0.0;
        for i in 0..self.triangles.len() {
            total += triangle_area(&self.triangle(i));
            cumulative.push(total);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let pick = rng.random::<f64>() * total;
                let idx = cumulative
                    .partition_point(|&c| c < pick)
                    .min(self.triangles.len() - 1);
                let [a, b, c] = self.triangle(idx);
                let (mut r1, mut r2) = (rng.random::<f64>(), rng.random::<f64>());
                if r1 + r2 > 1.0 {
                    r1 = 1.0 - r1;
                    r2 = 1.0 - r2;
                }
                a + (b - a) * r1 + (c - a) * r2
            })
            .collect()
    }

    /// Axis-aligned bounds `(min, max)`; `None` for a mesh without vertices.
    pub fn bounds(&self) -> Option<(Point3<f64>, Point3<f64>)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| {
            (lo.inf(v), hi.sup(v))
        }))
    }
}

/// Maximum pairwise vertex distance.
pub fn mesh_diameter(mesh: &TriangleMesh) -> Result<f64> {
    if mesh.vertices.len() < 2 {
        return Err(Error::TooFewVertices(mesh.vertices.len()));
    }
    Ok(mesh.diameter)
}

fn brute_force_diameter(vertices: &[Point3<f64>]) -> f64 {
    (0..vertices.len())
        .into_par_iter()
        .map(|i| {
            let a = vertices[i];
            vertices[i + 1..]
                .iter()
                .map(|b| (a - b).norm_squared())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
        .sqrt()
}

pub(crate) fn triangle_area(t: &[Point3<f64>; 3]) -> f64 {
    (t[1] - t[0]).cross(&(t[2] - t[0])).norm() * 0.5
}

pub(crate) fn triangle_normal(t: &[Point3<f64>; 3]) -> Vector3<f64> {
    (t[1] - t[0]).cross(&(t[2] - t[0])).normalize()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_indices() {
        let v = vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0)];
        assert!(TriangleMesh::new(v, vec![[0, 1, 2]]).is_err());
    }

    #[test]
    fn drops_degenerate_triangles() {
        let v = vec![
            Point3::origin(),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ];
        let mesh = TriangleMesh::new(v, vec![[0, 1, 2], [0, 1, 3]]).unwrap();
        assert_eq!(mesh.triangles().len(), 1);
    }

    #[test]
    fn diameter_requires_two_vertices() {
        let mesh = TriangleMesh::new(vec![Point3::origin()], vec![]).unwrap();
        assert!(matches!(mesh_diameter(&mesh), Err(Error::TooFewVertices(1))));
        let two = TriangleMesh::new(vec![Point3::origin(), Point3::new(0.0, 6.0, 8.0)], vec![])
            .unwrap();
        assert_eq!(mesh_diameter(&two).unwrap(), 10.0);
    }

    #[test]
    fn samples_lie_on_surface() {
        let v = vec![
            Point3::origin(),
            Point3::new(10.0, 0.0, 0.0),
            Point3::new(0.0, 10.0, 0.0),
        ];
        let mesh = TriangleMesh::new(v, vec![[0, 1, 2]]).unwrap();
        let pts = mesh.sample_surface(500, 3);
        assert_eq!(pts, mesh.sample_surface(500, 3));
        for p in pts {
            assert_eq!(p.z, 0.0);
            assert!(p.x >= -1e-12 && p.y >= -1e-12 && p.x + p.y <= 10.0 + 1e-9);
        }
    }
}
