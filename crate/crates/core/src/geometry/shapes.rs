//! Procedural meshes used as desk-scale stand-ins for scanned parts.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use super::mesh::TriangleMesh;
use crate::error::Result;

/// Flat `width × height` rectangle in the local xy-plane, normal +z, centred
/// on the origin and split into a `divisions × divisions` grid.
pub fn plate(width: f64, height: f64, divisions: usize) -> Result<TriangleMesh> {
    grid_patch(divisions, |s, t| {
        Point3::new((s - 0.5) * width, (t - 0.5) * height, 0.0)
    })
}

/// Two `width/2 × height` panels joined along the local y axis with the given
/// interior dihedral angle (180° is flat). The ridge sits on the origin and the
/// panels open towards +z.
pub fn bent_plate(width: f64, height: f64, dihedral_deg: f64, divisions: usize) -> Result<TriangleMesh> {
    let half = 0.5 * (std::f64::consts::PI - dihedral_deg.to_radians());
    let (c, s) = (half.cos(), half.sin());
    grid_patch(divisions.max(2) & !1, |u, t| {
        let y = (t - 0.5) * height;
        let d = (u - 0.5) * width;
        // Distance along each panel from the ridge.
        let along = d.abs();
        Point3::new(d.signum() * along * c, y, along * s)
    })
}

/// Icosphere of the given radius centred on the origin.
pub fn sphere(radius: f64, subdivisions: u32) -> Result<TriangleMesh> {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector3<f64>> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vector3<f64>>| -> u32 {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                (verts.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    TriangleMesh::new(
        verts.into_iter().map(|v| Point3::from(v * radius)).collect(),
        faces,
    )
}

/// Axis-aligned box with the given edge lengths, centred on the origin.
pub fn cuboid(size: Vector3<f64>) -> Result<TriangleMesh> {
    let h = size * 0.5;
    let verts = (0..8)
        .map(|i| {
            Point3::new(
                if i & 1 == 0 { -h.x } else { h.x },
                if i & 2 == 0 { -h.y } else { h.y },
                if i & 4 == 0 { -h.z } else { h.z },
            )
        })
        .collect();
    let faces = vec![
        [0, 2, 1],
        [1, 2, 3],
        [4, 5, 6],
        [5, 7, 6],
        [0, 1, 4],
        [1, 5, 4],
        [2, 6, 3],
        [3, 6, 7],
        [0, 4, 2],
        [2, 4, 6],
        [1, 3, 5],
        [3, 7, 5],
    ];
    TriangleMesh::new(verts, faces)
}

/// Regular tetrahedron with the given edge length.
pub fn tetrahedron(edge: f64) -> Result<TriangleMesh> {
    let s = edge / (2.0 * 2f64.sqrt());
    let verts = vec![
        Point3::new(s, s, s),
        Point3::new(s, -s, -s),
        Point3::new(-s, s, -s),
        Point3::new(-s, -s, s),
    ];
    TriangleMesh::new(verts, vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
}

fn grid_patch(divisions: usize, place: impl Fn(f64, f64) -> Point3<f64>) -> Result<TriangleMesh> {
    let n = divisions.max(1);
    let mut verts = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            verts.push(place(i as f64 / n as f64, j as f64 / n as f64));
        }
    }
    let idx = |i: usize, j: usize| (j * (n + 1) + i) as u32;
    let mut faces = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            faces.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            faces.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    TriangleMesh::new(verts, faces)
}
