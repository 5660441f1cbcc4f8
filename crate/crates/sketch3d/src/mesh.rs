//! Indexed triangle meshes: loading, validation, and normalization.
//!
//! All downstream stages operate on a mesh normalized to fit `[-1,1]^3`
//! (longest bounding-box side mapped to length 2), which makes the distance
//! thresholds used by clustering and coverage scale-meaningful. The applied
//! transform is recorded in a [`NormTransform`] so fitted curves can be
//! mapped back to source units.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Faces with area below this are dropped at load: their normals are
/// undefined and dihedral tests on them would produce NaN.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// An indexed triangle mesh with per-face unit normals.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Point3<f64>>,
    pub faces: Vec<[usize; 3]>,
    pub face_normals: Vec<Vector3<f64>>,
}

/// Counters for anomalies encountered while loading.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadWarnings {
    /// Faces dropped because their area was below [`DEGENERATE_AREA`].
    pub degenerate_faces: usize,
}

/// Uniform scale + translation taking source coordinates to normalized ones:
/// `normalized = (source - center) * scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormTransform {
    pub center: [f64; 3],
    pub scale: f64,
}

impl NormTransform {
    pub fn identity() -> Self {
        NormTransform {
            center: [0.0; 3],
            scale: 1.0,
        }
    }

    pub fn to_normalized(&self, p: Point3<f64>) -> Point3<f64> {
        Point3::new(
            (p.x - self.center[0]) * self.scale,
            (p.y - self.center[1]) * self.scale,
            (p.z - self.center[2]) * self.scale,
        )
    }

    pub fn to_source(&self, p: Point3<f64>) -> Point3<f64> {
        Point3::new(
            p.x / self.scale + self.center[0],
            p.y / self.scale + self.center[1],
            p.z / self.scale + self.center[2],
        )
    }

    pub fn approx_eq(&self, other: &NormTransform, tol: f64) -> bool {
        (self.scale - other.scale).abs() <= tol
            && self
                .center
                .iter()
                .zip(other.center.iter())
                .all(|(a, b)| (a - b).abs() <= tol)
    }
}

impl Mesh {
    /// Build a mesh from raw vertices and faces, dropping degenerate faces
    /// and computing unit face normals. Returns the number of dropped faces.
    pub fn from_parts(
        vertices: Vec<Point3<f64>>,
        faces: Vec<[usize; 3]>,
    ) -> Result<(Mesh, LoadWarnings)> {
        let n = vertices.len();
        let mut kept = Vec::with_capacity(faces.len());
        let mut normals = Vec::with_capacity(faces.len());
        let mut dropped = 0usize;
        for (fi, f) in faces.iter().enumerate() {
            for &vi in f {
                if vi >= n {
                    return Err(Error::Parse {
                        path: "<memory>".into(),
                        line: fi,
                        msg: format!("face references vertex {vi} but mesh has {n} vertices"),
                    });
                }
            }
            let [a, b, c] = [vertices[f[0]], vertices[f[1]], vertices[f[2]]];
            let cross = (b - a).cross(&(c - a));
            let area = 0.5 * cross.norm();
            if area < DEGENERATE_AREA {
                dropped += 1;
                continue;
            }
            kept.push(*f);
            normals.push(cross.normalize());
        }
        if kept.is_empty() {
            return Err(Error::EmptyMesh);
        }
        Ok((
            Mesh {
                vertices,
                faces: kept,
                face_normals: normals,
            },
            LoadWarnings {
                degenerate_faces: dropped,
            },
        ))
    }

    pub fn bounds(&self) -> (Point3<f64>, Point3<f64>) {
        let mut min = self.vertices[0];
        let mut max = self.vertices[0];
        for v in &self.vertices[1..] {
            for i in 0..3 {
                min[i] = min[i].min(v[i]);
                max[i] = max[i].max(v[i]);
            }
        }
        (min, max)
    }

    pub fn face_centroid(&self, face: usize) -> Point3<f64> {
        let [a, b, c] = self.faces[face];
        Point3::from(
            (self.vertices[a].coords + self.vertices[b].coords + self.vertices[c].coords) / 3.0,
        )
    }
}

/// Load an OBJ or ASCII PLY mesh from disk.
///
/// Degenerate (near-zero-area) faces are dropped and counted in the returned
/// warnings. Fails on unreadable files, unsupported formats, and meshes with
/// no valid faces.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<(Mesh, LoadWarnings)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    match ext.as_deref() {
        Some("obj") => parse_obj(&text, path),
        Some("ply") => parse_ply(&text, path),
        _ => Err(Error::UnsupportedFormat { path: path.into() }),
    }
}

/// Parse OBJ text (v/f records; polygons are fan-triangulated).
pub fn parse_obj(text: &str, path: &Path) -> Result<(Mesh, LoadWarnings)> {
    let mut vertices: Vec<Point3<f64>> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let mut xyz = [0.0f64; 3];
                for x in xyz.iter_mut() {
                    *x = it
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| Error::Parse {
                            path: path.into(),
                            line: ln + 1,
                            msg: "malformed vertex record".into(),
                        })?;
                }
                vertices.push(Point3::new(xyz[0], xyz[1], xyz[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = it
                    .map(|tok| parse_obj_index(tok, vertices.len()))
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| match e {
                        Error::Parse { msg, .. } => Error::Parse {
                            path: path.into(),
                            line: ln + 1,
                            msg,
                        },
                        other => other,
                    })?;
                if idx.len() < 3 {
                    return Err(Error::Parse {
                        path: path.into(),
                        line: ln + 1,
                        msg: "face with fewer than 3 vertices".into(),
                    });
                }
                for i in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[i], idx[i + 1]]);
                }
            }
            _ => {} // ignore vt/vn/usemtl/...
        }
    }
    Mesh::from_parts(vertices, faces)
}

fn parse_obj_index(tok: &str, n_vertices: usize) -> Result<usize> {
    let first = tok.split('/').next().unwrap_or(tok);
    let i: i64 = first.parse().map_err(|_| Error::Parse {
        path: "<obj>".into(),
        line: 0,
        msg: format!("bad face index `{tok}`"),
    })?;
    let idx = if i > 0 {
        (i - 1) as usize
    } else if i < 0 {
        let back = (-i) as usize;
        if back > n_vertices {
            return Err(Error::Parse {
                path: "<obj>".into(),
                line: 0,
                msg: format!("negative index {i} out of range"),
            });
        }
        n_vertices - back
    } else {
        return Err(Error::Parse {
            path: "<obj>".into(),
            line: 0,
            msg: "face index 0 is invalid".into(),
        });
    };
    Ok(idx)
}

/// Parse ASCII PLY text. Binary PLY is rejected.
pub fn parse_ply(text: &str, path: &Path) -> Result<(Mesh, LoadWarnings)> {
    let mut lines = text.lines().enumerate();
    let perr = |line: usize, msg: &str| Error::Parse {
        path: path.into(),
        line: line + 1,
        msg: msg.into(),
    };

    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(perr(0, "missing `ply` magic")),
    }

    // Header: use x/y/z property positions within the vertex element.
    let mut n_vertices = 0usize;
    let mut n_faces = 0usize;
    let mut vertex_props: Vec<String> = Vec::new();
    let mut current_element = String::new();
    let mut header_end = 0usize;
    for (ln, raw) in lines.by_ref() {
        let line = raw.trim();
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", "ascii", ..] => {}
            ["format", ..] => return Err(perr(ln, "only ASCII PLY is supported")),
            ["comment", ..] => {}
            ["element", name, count] => {
                current_element = name.to_string();
                let c: usize = count.parse().map_err(|_| perr(ln, "bad element count"))?;
                match *name {
                    "vertex" => n_vertices = c,
                    "face" => n_faces = c,
                    _ => {}
                }
            }
            ["property", "list", ..] => {}
            ["property", _ty, prop] => {
                if current_element == "vertex" {
                    vertex_props.push(prop.to_string());
                }
            }
            ["end_header"] => {
                header_end = ln;
                break;
            }
            [] => {}
            _ => {}
        }
    }
    if header_end == 0 {
        return Err(perr(0, "missing end_header"));
    }
    let pos_of = |name: &str| vertex_props.iter().position(|p| p == name);
    let (ix, iy, iz) = match (pos_of("x"), pos_of("y"), pos_of("z")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(perr(header_end, "vertex element lacks x/y/z properties")),
    };

    let mut vertices = Vec::with_capacity(n_vertices);
    for _ in 0..n_vertices {
        let (ln, raw) = lines
            .next()
            .ok_or_else(|| perr(header_end, "unexpected EOF in vertex data"))?;
        let vals: Vec<f64> = raw
            .split_whitespace()
            .map(|s| s.parse().unwrap_or(f64::NAN))
            .collect();
        if vals.len() < vertex_props.len() || vals[ix].is_nan() || vals[iy].is_nan() || vals[iz].is_nan()
        {
            return Err(perr(ln, "malformed vertex row"));
        }
        vertices.push(Point3::new(vals[ix], vals[iy], vals[iz]));
    }
    let mut faces = Vec::with_capacity(n_faces);
    for _ in 0..n_faces {
        let (ln, raw) = lines
            .next()
            .ok_or_else(|| perr(header_end, "unexpected EOF in face data"))?;
        let vals: Vec<usize> = raw
            .split_whitespace()
            .map(|s| s.parse().unwrap_or(usize::MAX))
            .collect();
        let count = *vals.first().ok_or_else(|| perr(ln, "empty face row"))?;
        if count < 3 || vals.len() < count + 1 || vals[1..=count].iter().any(|&v| v == usize::MAX) {
            return Err(perr(ln, "malformed face row"));
        }
        for i in 2..count {
            faces.push([vals[1], vals[i], vals[i + 1]]);
        }
    }
    Mesh::from_parts(vertices, faces)
}

/// Write a mesh as OBJ text (used by fixtures and the mesh-fetch path).
pub fn to_obj_string(mesh: &Mesh) -> String {
    let mut out = String::new();
    for v in &mesh.vertices {
        out.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
    }
    for f in &mesh.faces {
        out.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
    }
    out
}

/// Uniformly rescale and recenter so the bounding box is centered at the
/// origin with its longest side exactly 2. Idempotent. Returns the applied
/// transform (composed with any caller-held previous transform separately).
pub fn normalize_mesh(mesh: &Mesh) -> (Mesh, NormTransform) {
    let (min, max) = mesh.bounds();
    let center = Point3::from((min.coords + max.coords) * 0.5);
    let extent = max - min;
    let longest = extent.x.max(extent.y).max(extent.z);
    let scale = if longest > 0.0 { 2.0 / longest } else { 1.0 };
    let t = NormTransform {
        center: [center.x, center.y, center.z],
        scale,
    };
    let vertices: Vec<Point3<f64>> = mesh.vertices.iter().map(|&v| t.to_normalized(v)).collect();
    let mesh = Mesh {
        vertices,
        faces: mesh.faces.clone(),
        face_normals: mesh.face_normals.clone(),
    };
    (mesh, t)
}
