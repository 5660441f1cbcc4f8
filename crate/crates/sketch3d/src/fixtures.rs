//! Synthetic meshes and point clouds for tests, examples, and benchmarks.
//!
//! Everything here is deterministic: no RNG, no file IO.

use nalgebra::{Point3, Vector3};

use crate::cloud::SalientPointCloud;
use crate::mesh::Mesh;

/// Axis-aligned cuboid centered at `center` with the given half extents,
/// triangulated with outward-facing normals.
pub fn cuboid(center: Point3<f64>, half: Vector3<f64>) -> Mesh {
    let (cx, cy, cz) = (center.x, center.y, center.z);
    let (hx, hy, hz) = (half.x, half.y, half.z);
    let vertices = vec![
        Point3::new(cx - hx, cy - hy, cz - hz), // 0
        Point3::new(cx + hx, cy - hy, cz - hz), // 1
        Point3::new(cx + hx, cy + hy, cz - hz), // 2
        Point3::new(cx - hx, cy + hy, cz - hz), // 3
        Point3::new(cx - hx, cy - hy, cz + hz), // 4
        Point3::new(cx + hx, cy - hy, cz + hz), // 5
        Point3::new(cx + hx, cy + hy, cz + hz), // 6
        Point3::new(cx - hx, cy + hy, cz + hz), // 7
    ];
    let faces = vec![
        [0, 2, 1],
        [0, 3, 2], // -z
        [4, 5, 6],
        [4, 6, 7], // +z
        [0, 1, 5],
        [0, 5, 4], // -y
        [2, 3, 7],
        [2, 7, 6], // +y
        [0, 4, 7],
        [0, 7, 3], // -x
        [1, 2, 6],
        [1, 6, 5], // +x
    ];
    Mesh::from_parts(vertices, faces).expect("cuboid is valid").0
}

/// Unit cube spanning (0,0,0)..(1,1,1); normalizes to corners at +/-1.
pub fn unit_cube() -> Mesh {
    cuboid(Point3::new(0.5, 0.5, 0.5), Vector3::new(0.5, 0.5, 0.5))
}

/// Two coplanar triangles forming a flat unit quad in the xy plane.
pub fn flat_quad() -> Mesh {
    let vertices = vec![
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(1.0, 1.0, 0.0),
        Point3::new(0.0, 1.0, 0.0),
    ];
    let faces = vec![[0, 1, 2], [0, 2, 3]];
    Mesh::from_parts(vertices, faces).unwrap().0
}

pub fn single_triangle() -> Mesh {
    let vertices = vec![
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(0.0, 1.0, 0.0),
    ];
    Mesh::from_parts(vertices, vec![[0, 1, 2]]).unwrap().0
}

pub fn two_triangles_sharing_edge() -> Mesh {
    let vertices = vec![
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(0.5, 1.0, 0.0),
        Point3::new(0.5, -1.0, 0.3),
    ];
    Mesh::from_parts(vertices, vec![[0, 1, 2], [0, 3, 1]]).unwrap().0
}

/// Unit icosphere: an icosahedron subdivided `subdivisions` times with
/// vertices projected onto the unit sphere. Face count is 20 * 4^n.
pub fn icosphere(subdivisions: u32) -> Mesh {
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let mut vertices: Vec<Point3<f64>> = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Point3::from(Vector3::new(x, y, z).normalize()))
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
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
        let mut midpoint = std::collections::HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mids: Vec<usize> = (0..3)
                .map(|i| {
                    let (a, b) = (f[i], f[(i + 1) % 3]);
                    let key = (a.min(b), a.max(b));
                    *midpoint.entry(key).or_insert_with(|| {
                        let m = (vertices[a].coords + vertices[b].coords).normalize();
                        vertices.push(Point3::from(m));
                        vertices.len() - 1
                    })
                })
                .collect();
            next.push([f[0], mids[0], mids[2]]);
            next.push([f[1], mids[1], mids[0]]);
            next.push([f[2], mids[2], mids[1]]);
            next.push([mids[0], mids[1], mids[2]]);
        }
        faces = next;
    }
    Mesh::from_parts(vertices, faces).unwrap().0
}

/// Torus around the y axis with `nu * nv * 2` triangles and outward normals.
pub fn torus(major_radius: f64, minor_radius: f64, nu: usize, nv: usize) -> Mesh {
    let mut vertices = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = std::f64::consts::TAU * i as f64 / nu as f64;
        for j in 0..nv {
            let v = std::f64::consts::TAU * j as f64 / nv as f64;
            let ring = major_radius + minor_radius * v.cos();
            vertices.push(Point3::new(
                ring * u.cos(),
                minor_radius * v.sin(),
                ring * u.sin(),
            ));
        }
    }
    let mut faces = Vec::with_capacity(nu * nv * 2);
    for i in 0..nu {
        for j in 0..nv {
            let a = i * nv + j;
            let b = ((i + 1) % nu) * nv + j;
            let c = ((i + 1) % nu) * nv + (j + 1) % nv;
            let d = i * nv + (j + 1) % nv;
            faces.push([a, c, b]);
            faces.push([a, d, c]);
        }
    }
    Mesh::from_parts(vertices, faces).unwrap().0
}

/// Evenly spaced points along the +x axis starting at the origin.
pub fn line_cloud(n: usize, spacing: f64) -> SalientPointCloud {
    let points = (0..n)
        .map(|i| Point3::new(i as f64 * spacing, 0.0, 0.0))
        .collect();
    SalientPointCloud::from_points(points)
}

/// Points on a circle of the given radius in the xy plane.
pub fn circle_cloud(n: usize, radius: f64) -> SalientPointCloud {
    let points = (0..n)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / n as f64;
            Point3::new(radius * a.cos(), radius * a.sin(), 0.0)
        })
        .collect();
    SalientPointCloud::from_points(points)
}

/// Two perpendicular runs meeting at (but not sharing) the origin, with
/// hand-set exact orientations along each leg.
pub fn l_corner_cloud(n_per_leg: usize, spacing: f64) -> SalientPointCloud {
    let mut points = Vec::with_capacity(2 * n_per_leg);
    for i in 1..=n_per_leg {
        points.push(Point3::new(i as f64 * spacing, 0.0, 0.0));
    }
    for i in 1..=n_per_leg {
        points.push(Point3::new(0.0, i as f64 * spacing, 0.0));
    }
    let mut cloud = SalientPointCloud::from_points(points);
    let mut orientations = vec![Vector3::x(); n_per_leg];
    orientations.extend(vec![Vector3::y(); n_per_leg]);
    cloud.orientations = orientations;
    cloud.degenerate = vec![false; 2 * n_per_leg];
    cloud
}

/// A branched "coral" cloud: a dense vertical trunk plus five sparser
/// sine-wave branches. Trunk-only fitting leaves the branches uncovered,
/// which is exactly the situation the refinement stage exists for.
///
/// Layout: trunk is 401 points from (0,-1,0) to (0,1,0); each branch is 30
/// points one full sine period long, attached at x=0 and extending to
/// |x| = 0.6 with amplitude 0.1.
pub fn coral_cloud() -> SalientPointCloud {
    let mut points = Vec::new();
    for i in 0..=400 {
        points.push(Point3::new(0.0, -1.0 + i as f64 * 0.005, 0.0));
    }
    let branch_y = [-0.8, -0.4, 0.0, 0.4, 0.8];
    for (b, &y0) in branch_y.iter().enumerate() {
        let dir = if b % 2 == 0 { 1.0 } else { -1.0 };
        for i in 1..=30 {
            let t = i as f64 / 30.0;
            points.push(Point3::new(
                dir * 0.6 * t,
                y0 + 0.1 * (std::f64::consts::TAU * t).sin(),
                0.0,
            ));
        }
    }
    SalientPointCloud::from_points(points)
}

/// Number of branches in [`coral_cloud`].
pub const CORAL_BRANCHES: usize = 5;
