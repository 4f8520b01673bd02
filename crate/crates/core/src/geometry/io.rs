//! Mesh, depth-map and float-sidecar file formats.
//!
//! * Meshes: PLY (ascii / binary) and OBJ, polygons fan-triangulated.
//! * Depth: 16-bit grayscale PNG in millimetres, 0 = missing.
//! * Intensities: 8-bit grayscale PNG.
//! * Float sidecars: 4-byte magic, `u32` width, `u32` height (little-endian),
//!   then row-major little-endian `f32` values. Magic `SPN3` holds normal
//!   triples, `SPF1` holds one scalar per pixel. Missing values are `NaN`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use image::{ImageBuffer, Luma};
use nalgebra::{Point3, Vector3};
use ply_rs::parser::Parser;
use ply_rs::ply::{DefaultElement, Property};

use super::maps::{DepthMap, IntensityImage, NormalMap, MISSING};
use super::mesh::TriangleMesh;
use crate::error::{Error, Result};

pub const NORMAL_MAGIC: &[u8; 4] = b"SPN3";
pub const SCALAR_MAGIC: &[u8; 4] = b"SPF1";

/// Loads a PLY or OBJ mesh, chosen by file extension.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("ply") => load_ply(path),
        Some("obj") => load_obj(path),
        _ => Err(Error::parse(path, "unsupported mesh extension (expected .ply or .obj)")),
    }
}

fn scalar(p: &Property) -> Option<f64> {
    Some(match *p {
        Property::Char(x) => x as f64,
        Property::UChar(x) => x as f64,
        Property::Short(x) => x as f64,
        Property::UShort(x) => x as f64,
        Property::Int(x) => x as f64,
        Property::UInt(x) => x as f64,
        Property::Float(x) => x as f64,
        Property::Double(x) => x,
        _ => return None,
    })
}

fn index_list(p: &Property) -> Option<Vec<i64>> {
    Some(match p {
        Property::ListChar(v) => v.iter().map(|&x| x as i64).collect(),
        Property::ListUChar(v) => v.iter().map(|&x| x as i64).collect(),
        Property::ListShort(v) => v.iter().map(|&x| x as i64).collect(),
        Property::ListUShort(v) => v.iter().map(|&x| x as i64).collect(),
        Property::ListInt(v) => v.iter().map(|&x| x as i64).collect(),
        Property::ListUInt(v) => v.iter().map(|&x| x as i64).collect(),
        _ => return None,
    })
}

fn fan(polygon: &[i64], path: &Path, out: &mut Vec<[u32; 3]>) -> Result<()> {
    if polygon.len() < 3 {
        return Err(Error::parse(path, format!("face with {} vertices", polygon.len())));
    }
    if polygon.iter().any(|&i| i < 0 || i > u32::MAX as i64) {
        return Err(Error::parse(path, "negative or oversized vertex index"));
    }
    for k in 1..polygon.len() - 1 {
        out.push([polygon[0] as u32, polygon[k] as u32, polygon[k + 1] as u32]);
    }
    Ok(())
}

fn load_ply(path: &Path) -> Result<TriangleMesh> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let ply = Parser::<DefaultElement>::new()
        .read_ply(&mut file)
        .map_err(|e| Error::parse(path, e.to_string()))?;
    let verts = ply
        .payload
        .get("vertex")
        .ok_or_else(|| Error::parse(path, "no vertex element"))?;
    let mut vertices = Vec::with_capacity(verts.len());
    for v in verts {
        let coord = |k: &str| {
            v.get(k)
                .and_then(scalar)
                .ok_or_else(|| Error::parse(path, format!("vertex without numeric '{k}'")))
        };
        vertices.push(Point3::new(coord("x")?, coord("y")?, coord("z")?));
    }
    let mut triangles = Vec::new();
    if let Some(faces) = ply.payload.get("face") {
        for f in faces {
            let list = f
                .get("vertex_indices")
                .or_else(|| f.get("vertex_index"))
                .and_then(index_list)
                .ok_or_else(|| Error::parse(path, "face without vertex_indices list"))?;
            fan(&list, path, &mut triangles)?;
        }
    }
    TriangleMesh::new(vertices, triangles).map_err(|e| Error::parse(path, e.to_string()))
}

fn load_obj(path: &Path) -> Result<TriangleMesh> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let opts = tobj::LoadOptions {
        triangulate: true,
        ..Default::default()
    };
    let (models, _) = tobj::load_obj_buf(&mut reader, &opts, |_| Err(tobj::LoadError::OpenFileFailed))
        .map_err(|e| Error::parse(path, e.to_string()))?;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for m in models {
        let base = vertices.len() as u32;
        vertices.extend(
            m.mesh
                .positions
                .chunks_exact(3)
                .map(|c| Point3::new(c[0] as f64, c[1] as f64, c[2] as f64)),
        );
        triangles.extend(
            m.mesh
                .indices
                .chunks_exact(3)
                .map(|c| [base + c[0], base + c[1], base + c[2]]),
        );
    }
    TriangleMesh::new(vertices, triangles).map_err(|e| Error::parse(path, e.to_string()))
}

/// Writes an ascii PLY.
pub fn write_ply(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut body = || -> std::io::Result<()> {
        writeln!(w, "ply\nformat ascii 1.0")?;
        writeln!(w, "element vertex {}", mesh.vertices().len())?;
        writeln!(w, "property double x\nproperty double y\nproperty double z")?;
        writeln!(w, "element face {}", mesh.triangles().len())?;
        writeln!(w, "property list uchar uint vertex_indices\nend_header")?;
        for v in mesh.vertices() {
            writeln!(w, "{} {} {}", v.x, v.y, v.z)?;
        }
        for t in mesh.triangles() {
            writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        w.flush()
    };
    body().map_err(|e| Error::io(path, e))
}

/// Writes a wavefront OBJ.
pub fn write_obj(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut body = || -> std::io::Result<()> {
        for v in mesh.vertices() {
            writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
        }
        for t in mesh.triangles() {
            writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
        }
        w.flush()
    };
    body().map_err(|e| Error::io(path, e))
}

/// Depth rounded to whole millimetres, clamped to `1..=65535`; missing → 0.
pub fn write_depth_png(depth: &DepthMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = depth.dims();
    let data: Vec<u16> = depth
        .data()
        .iter()
        .map(|&d| {
            if d.is_nan() {
                0
            } else {
                d.round().clamp(1.0, 65535.0) as u16
            }
        })
        .collect();
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(w as u32, h as u32, data).expect("sized buffer");
    img.save(path).map_err(|source| Error::Image {
        path: path.into(),
        source,
    })
}

pub fn read_depth_png(path: impl AsRef<Path>) -> Result<DepthMap> {
    let path = path.as_ref();
    let img = image::open(path)
        .map_err(|source| Error::Image {
            path: path.into(),
            source,
        })?
        .into_luma16();
    let (w, h) = img.dimensions();
    let data = img
        .into_raw()
        .into_iter()
        .map(|d| if d == 0 { MISSING } else { d as f64 })
        .collect();
    DepthMap::from_vec(w as usize, h as usize, data)
}

pub fn write_intensity_png(img: &IntensityImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = img.dims();
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(w as u32, h as u32, img.data().to_vec()).expect("sized buffer");
    buf.save(path).map_err(|source| Error::Image {
        path: path.into(),
        source,
    })
}

pub fn read_intensity_png(path: impl AsRef<Path>) -> Result<IntensityImage> {
    let path = path.as_ref();
    let img = image::open(path)
        .map_err(|source| Error::Image {
            path: path.into(),
            source,
        })?
        .into_luma8();
    let (w, h) = img.dimensions();
    IntensityImage::from_vec(w as usize, h as usize, img.into_raw())
}

fn write_sidecar(path: &Path, magic: &[u8; 4], w: usize, h: usize, values: impl Iterator<Item = f32>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let body = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        out.write_all(magic)?;
        out.write_all(&(w as u32).to_le_bytes())?;
        out.write_all(&(h as u32).to_le_bytes())?;
        for v in values {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()
    };
    body(&mut out).map_err(|e| Error::io(path, e))
}

fn read_sidecar(path: &Path, magic: &[u8; 4], channels: usize) -> Result<(usize, usize, Vec<f32>)> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 12 || &bytes[..4] != magic {
        return Err(Error::parse(
            path,
            format!("bad sidecar header (expected magic {:?})", String::from_utf8_lossy(magic)),
        ));
    }
    let w = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let h = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = 12 + w * h * channels * 4;
    if bytes.len() != expected {
        return Err(Error::parse(path, format!("sidecar is {} bytes, expected {expected}", bytes.len())));
    }
    let values = bytes[12..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((w, h, values))
}

pub fn write_normal_sidecar(normals: &NormalMap, path: impl AsRef<Path>) -> Result<()> {
    let (w, h) = normals.dims();
    write_sidecar(
        path.as_ref(),
        NORMAL_MAGIC,
        w,
        h,
        normals.data().iter().flat_map(|n| [n.x as f32, n.y as f32, n.z as f32]),
    )
}

pub fn read_normal_sidecar(path: impl AsRef<Path>) -> Result<NormalMap> {
    let (w, h, v) = read_sidecar(path.as_ref(), NORMAL_MAGIC, 3)?;
    let data = v
        .chunks_exact(3)
        .map(|c| Vector3::new(c[0] as f64, c[1] as f64, c[2] as f64))
        .collect();
    NormalMap::from_vec(w, h, data)
}

/// Scalar maps (radiance, probability, depth) as `f32` sidecars.
pub fn write_scalar_sidecar(map: &super::maps::Grid<f64>, path: impl AsRef<Path>) -> Result<()> {
    let (w, h) = map.dims();
    write_sidecar(path.as_ref(), SCALAR_MAGIC, w, h, map.data().iter().map(|&x| x as f32))
}

pub fn read_scalar_sidecar(path: impl AsRef<Path>) -> Result<super::maps::Grid<f64>> {
    let (w, h, v) = read_sidecar(path.as_ref(), SCALAR_MAGIC, 1)?;
    super::maps::Grid::from_vec(w, h, v.into_iter().map(|x| x as f64).collect())
}

/// 8-bit preview of a scalar map, scaled so the largest finite value is 255.
pub fn scalar_preview(map: &super::maps::Grid<f64>) -> IntensityImage {
    let max = map
        .data()
        .iter()
        .filter(|x| x.is_finite())
        .fold(0.0f64, |a, &b| a.max(b));
    map.map(|&x| {
        if !x.is_finite() || max <= 0.0 {
            0
        } else {
            (x / max * 255.0).round().clamp(0.0, 255.0) as u8
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes;

    #[test]
    fn ply_and_obj_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = shapes::sphere(10.0, 1).unwrap();
        for name in ["m.ply", "m.obj"] {
            let p = dir.path().join(name);
            if name.ends_with("ply") {
                write_ply(&mesh, &p).unwrap();
            } else {
                write_obj(&mesh, &p).unwrap();
            }
            let back = load_mesh(&p).unwrap();
            assert_eq!(back.triangles().len(), mesh.triangles().len());
            // OBJ loading renumbers vertices, so compare triangle corners.
            for (ta, tb) in back.triangles().iter().zip(mesh.triangles()) {
                for k in 0..3 {
                    let a = back.vertices()[ta[k] as usize];
                    let b = mesh.vertices()[tb[k] as usize];
                    assert!((a - b).norm() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn quads_are_triangulated() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("quad.obj");
        std::fs::write(&p, "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap();
        assert_eq!(load_mesh(&p).unwrap().triangles().len(), 2);
        let p = dir.path().join("quad.ply");
        std::fs::write(
            &p,
            "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\n\
             element face 1\nproperty list uchar int vertex_indices\nend_header\n\
             0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n",
        )
        .unwrap();
        assert_eq!(load_mesh(&p).unwrap().triangles().len(), 2);
    }

    #[test]
    fn binary_ply_loads() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("tri.ply");
        let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n".to_vec();
        for v in [[0f32, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]] {
            for c in v {
                bytes.extend(c.to_le_bytes());
            }
        }
        bytes.push(3);
        for i in [0i32, 1, 2] {
            bytes.extend(i.to_le_bytes());
        }
        std::fs::write(&p, bytes).unwrap();
        let m = load_mesh(&p).unwrap();
        assert_eq!(m.triangles(), &[[0, 1, 2]]);
    }

    #[test]
    fn depth_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.png");
        let mut d = DepthMap::filled(5, 4, 412.4);
        *d.at_mut(1, 1) = MISSING;
        write_depth_png(&d, &p).unwrap();
        let back = read_depth_png(&p).unwrap();
        assert_eq!(back.value(0, 0), Some(412.0));
        assert_eq!(back.value(1, 1), None);
    }

    #[test]
    fn sidecar_round_trip_and_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("n.bin");
        let mut n = NormalMap::filled(3, 2, Vector3::new(0.0, 0.6, 0.8));
        *n.at_mut(2, 1) = Vector3::repeat(MISSING);
        write_normal_sidecar(&n, &p).unwrap();
        let back = read_normal_sidecar(&p).unwrap();
        assert!((back.normal(0, 0).unwrap() - Vector3::new(0.0, 0.6, 0.8)).norm() < 1e-6);
        assert!(back.normal(2, 1).is_none());
        assert!(read_scalar_sidecar(&p).is_err());
    }
}
