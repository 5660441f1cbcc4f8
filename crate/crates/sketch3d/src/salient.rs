//! Salient edge detection: sharp (dihedral), boundary, and silhouette edges,
//! plus arc-length point sampling along them.

use std::collections::HashMap;

use nalgebra::Point3;

use crate::adjacency::EdgeAdjacency;
use crate::camera::Camera;
use crate::cloud::SalientPointCloud;
use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Default orbit radius for silhouette view sampling (normalized units).
pub const SILHOUETTE_VIEW_RADIUS: f64 = 2.5;
/// Coincident sample points are merged within this distance.
pub const DEDUP_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeLabel {
    Sharp,
    Silhouette,
    Boundary,
}

/// A labeled subset of adjacency edges, sorted by edge index with no
/// duplicates.
#[derive(Debug, Clone, Default)]
pub struct EdgeSet {
    pub members: Vec<(usize, EdgeLabel)>,
}

impl EdgeSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().map(|&(e, _)| e)
    }

    pub fn count_label(&self, label: EdgeLabel) -> usize {
        self.members.iter().filter(|&&(_, l)| l == label).count()
    }

    fn from_map(mut map: HashMap<usize, EdgeLabel>) -> EdgeSet {
        let mut members: Vec<(usize, EdgeLabel)> = map.drain().collect();
        members.sort_unstable_by_key(|&(e, _)| e);
        EdgeSet { members }
    }
}

fn label_priority(l: EdgeLabel) -> u8 {
    match l {
        EdgeLabel::Sharp => 0,
        EdgeLabel::Boundary => 1,
        EdgeLabel::Silhouette => 2,
    }
}

fn merge_label(map: &mut HashMap<usize, EdgeLabel>, edge: usize, label: EdgeLabel) {
    map.entry(edge)
        .and_modify(|old| {
            if label_priority(label) < label_priority(*old) {
                *old = label;
            }
        })
        .or_insert(label);
}

/// Classify sharp and boundary edges.
///
/// An interior (2-face) edge is sharp iff the angle between its two face
/// normals exceeds `theta_sharp_deg`. Single-face edges are labeled boundary
/// and included. Edges with more than two faces are treated as sharp: in
/// reconstructed meshes they are almost always genuine structural features.
pub fn detect_sharp_edges(mesh: &Mesh, adj: &EdgeAdjacency, theta_sharp_deg: f64) -> Result<EdgeSet> {
    if !(theta_sharp_deg > 0.0 && theta_sharp_deg < 180.0) {
        return Err(Error::param("theta_sharp", "must lie in (0, 180) degrees"));
    }
    let mut map = HashMap::new();
    for (e, faces) in adj.edge_faces.iter().enumerate() {
        match faces.len() {
            1 => merge_label(&mut map, e, EdgeLabel::Boundary),
            2 => {
                let n0 = &mesh.face_normals[faces[0]];
                let n1 = &mesh.face_normals[faces[1]];
                let angle = n0.dot(n1).clamp(-1.0, 1.0).acos().to_degrees();
                if angle > theta_sharp_deg {
                    merge_label(&mut map, e, EdgeLabel::Sharp);
                }
            }
            n if n > 2 => merge_label(&mut map, e, EdgeLabel::Sharp),
            _ => {}
        }
    }
    Ok(EdgeSet::from_map(map))
}

/// Classify silhouette edges for one camera: 2-face edges with exactly one
/// front-facing and one back-facing incident face.
pub fn detect_silhouette_edges(mesh: &Mesh, adj: &EdgeAdjacency, camera: &Camera) -> Result<EdgeSet> {
    let (min, max) = mesh.bounds();
    let p = camera.position;
    let inside = (0..3).all(|i| p[i] >= min[i] && p[i] <= max[i]);
    if inside {
        return Err(Error::param("camera", "position inside the mesh bounding box"));
    }
    let front: Vec<bool> = (0..mesh.faces.len())
        .map(|f| camera.is_front_facing(mesh.face_centroid(f), &mesh.face_normals[f]))
        .collect();
    let mut map = HashMap::new();
    for (e, faces) in adj.edge_faces.iter().enumerate() {
        if faces.len() == 2 && front[faces[0]] != front[faces[1]] {
            merge_label(&mut map, e, EdgeLabel::Silhouette);
        }
    }
    Ok(EdgeSet::from_map(map))
}

/// Union of sharp, boundary, and silhouette edges over `n_views` cameras
/// placed uniformly on a horizontal circle of radius 2.5 around the
/// normalized mesh, all looking at the origin.
pub fn extract_salient_edges(
    mesh: &Mesh,
    adj: &EdgeAdjacency,
    theta_sharp_deg: f64,
    n_views: usize,
) -> Result<EdgeSet> {
    if n_views == 0 {
        return Err(Error::param("n_views", "must be at least 1"));
    }
    let mut map = HashMap::new();
    for (e, l) in detect_sharp_edges(mesh, adj, theta_sharp_deg)?.members {
        merge_label(&mut map, e, l);
    }
    for v in 0..n_views {
        let az = 360.0 * v as f64 / n_views as f64;
        let cam = Camera::orbit(az, 0.0, SILHOUETTE_VIEW_RADIUS, 256.0, (512, 512));
        for (e, l) in detect_silhouette_edges(mesh, adj, &cam)?.members {
            merge_label(&mut map, e, l);
        }
    }
    Ok(EdgeSet::from_map(map))
}

/// Sample points along each salient edge at fixed arc-length spacing,
/// including both endpoints; an edge of length `L` yields `ceil(L/spacing)+1`
/// points. Coincident points at shared endpoints are merged.
pub fn sample_salient_points(
    mesh: &Mesh,
    adj: &EdgeAdjacency,
    edges: &EdgeSet,
    spacing: f64,
) -> Result<SalientPointCloud> {
    if spacing <= 0.0 {
        return Err(Error::param("spacing", "must be positive"));
    }
    let mut cloud = SalientPointCloud::default();
    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    let cell = |x: f64| (x / DEDUP_EPS).floor() as i64;

    let mut push_dedup = |p: Point3<f64>, edge: usize, cloud: &mut SalientPointCloud| {
        let key = (cell(p.x), cell(p.y), cell(p.z));
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = grid.get(&(key.0 + dx, key.1 + dy, key.2 + dz)) {
                        for &i in ids {
                            if (cloud.points[i] - p).norm() < DEDUP_EPS {
                                return;
                            }
                        }
                    }
                }
            }
        }
        let idx = cloud.points.len();
        cloud.points.push(p);
        cloud.source_edge.push(edge);
        grid.entry(key).or_default().push(idx);
    };

    for &(e, _) in &edges.members {
        let (a, b) = adj.edges[e];
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        let len = (pb - pa).norm();
        let n = if len == 0.0 {
            1
        } else {
            (len / spacing).ceil() as usize + 1
        };
        for i in 0..n {
            let t = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
            // lerp form lands exactly on the endpoints at t=0 and t=1
            let p = Point3::from(pa.coords * (1.0 - t) + pb.coords * t);
            push_dedup(p, e, &mut cloud);
        }
    }
    Ok(cloud)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adjacency::build_edge_adjacency;
    use crate::fixtures;
    use crate::mesh::normalize_mesh;
    use nalgebra::Vector3;

    fn normalized_cube() -> Mesh {
        normalize_mesh(&fixtures::unit_cube()).0
    }

    #[test]
    fn cube_has_exactly_12_sharp_edges() {
        let cube = normalized_cube();
        let adj = build_edge_adjacency(&cube);
        let set = detect_sharp_edges(&cube, &adj, 30.0).unwrap();
        assert_eq!(set.len(), 12);
        assert_eq!(set.count_label(EdgeLabel::Sharp), 12);
        // each sharp edge is axis-aligned with length 2 (the face diagonals
        // from triangulation are excluded)
        for e in set.indices() {
            let (a, b) = adj.edges[e];
            let d = cube.vertices[b] - cube.vertices[a];
            assert!((d.norm() - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_quad_has_no_sharp_and_four_boundary_edges() {
        let quad = fixtures::flat_quad();
        let adj = build_edge_adjacency(&quad);
        let set = detect_sharp_edges(&quad, &adj, 30.0).unwrap();
        assert_eq!(set.count_label(EdgeLabel::Sharp), 0);
        assert_eq!(set.count_label(EdgeLabel::Boundary), 4);
    }

    #[test]
    fn icosphere_has_no_sharp_edges() {
        let sphere = fixtures::icosphere(3);
        let adj = build_edge_adjacency(&sphere);
        // oracle: brute-force maximum normal angle over all 2-face edges
        let mut max_angle: f64 = 0.0;
        for faces in &adj.edge_faces {
            if faces.len() == 2 {
                let a = sphere.face_normals[faces[0]].dot(&sphere.face_normals[faces[1]]);
                max_angle = max_angle.max(a.clamp(-1.0, 1.0).acos().to_degrees());
            }
        }
        assert!(max_angle < 30.0, "fixture max normal angle {max_angle}");
        let set = detect_sharp_edges(&sphere, &adj, 30.0).unwrap();
        assert_eq!(set.len(), 0);
    }

    #[test]
    fn sharpness_is_symmetric_in_face_order() {
        let cube = normalized_cube();
        let mut adj = build_edge_adjacency(&cube);
        let set = detect_sharp_edges(&cube, &adj, 30.0).unwrap();
        for faces in adj.edge_faces.iter_mut() {
            faces.reverse();
        }
        let swapped = detect_sharp_edges(&cube, &adj, 30.0).unwrap();
        assert_eq!(set.members, swapped.members);
    }

    #[test]
    fn cube_silhouette_from_positive_z_matches_brute_force() {
        let cube = normalized_cube();
        let adj = build_edge_adjacency(&cube);
        let cam = Camera::new(
            nalgebra::Point3::new(0.0, 0.0, 5.0),
            nalgebra::Point3::origin(),
            Vector3::y(),
            256.0,
            (512, 512),
        )
        .unwrap();
        let set = detect_silhouette_edges(&cube, &adj, &cam).unwrap();

        // oracle: sign test over all 18 edges
        let mut expected = Vec::new();
        for (e, faces) in adj.edge_faces.iter().enumerate() {
            if faces.len() == 2 {
                let s: Vec<bool> = faces
                    .iter()
                    .map(|&f| {
                        cube.face_normals[f].dot(&(cam.position - cube.face_centroid(f))) > 0.0
                    })
                    .collect();
                if s[0] != s[1] {
                    expected.push(e);
                }
            }
        }
        let got: Vec<usize> = set.indices().collect();
        assert_eq!(got, expected);
        // from straight above, the silhouette is the 4 edges of the +z face
        assert_eq!(set.len(), 4);
        for e in set.indices() {
            let (a, b) = adj.edges[e];
            assert!((cube.vertices[a].z - 1.0).abs() < 1e-12);
            assert!((cube.vertices[b].z - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn silhouette_edges_have_one_front_one_back_face() {
        let sphere = fixtures::icosphere(2);
        let adj = build_edge_adjacency(&sphere);
        let cam = Camera::orbit(37.0, 0.0, 2.5, 256.0, (512, 512));
        let set = detect_silhouette_edges(&sphere, &adj, &cam).unwrap();
        assert!(!set.is_empty());
        for e in set.indices() {
            let faces = &adj.edge_faces[e];
            let fronts = faces
                .iter()
                .filter(|&&f| cam.is_front_facing(sphere.face_centroid(f), &sphere.face_normals[f]))
                .count();
            assert_eq!(fronts, 1);
        }
    }

    #[test]
    fn icosphere_silhouette_forms_closed_loops() {
        let sphere = fixtures::icosphere(2);
        let adj = build_edge_adjacency(&sphere);
        let cam = Camera::orbit(117.0, 0.0, 2.5, 256.0, (512, 512));
        let set = detect_silhouette_edges(&sphere, &adj, &cam).unwrap();
        assert!(!set.is_empty());
        // closed loops: every touched vertex has even silhouette degree
        let mut degree: HashMap<usize, usize> = HashMap::new();
        for e in set.indices() {
            let (a, b) = adj.edges[e];
            *degree.entry(a).or_default() += 1;
            *degree.entry(b).or_default() += 1;
        }
        for (&v, &d) in &degree {
            assert!(d % 2 == 0 && d >= 2, "vertex {v} has odd silhouette degree {d}");
        }
    }

    #[test]
    fn silhouette_invariant_under_camera_roll() {
        let sphere = fixtures::icosphere(2);
        let adj = build_edge_adjacency(&sphere);
        let pos = nalgebra::Point3::new(2.0, 0.7, 1.1);
        let a = Camera::new(pos, nalgebra::Point3::origin(), Vector3::y(), 256.0, (512, 512)).unwrap();
        let rolled_up = (Vector3::<f64>::y() + Vector3::<f64>::x() * 0.8).normalize();
        let b = Camera::new(pos, nalgebra::Point3::origin(), rolled_up, 256.0, (512, 512)).unwrap();
        let sa = detect_silhouette_edges(&sphere, &adj, &a).unwrap();
        let sb = detect_silhouette_edges(&sphere, &adj, &b).unwrap();
        assert_eq!(sa.members, sb.members);
    }

    #[test]
    fn single_triangle_has_no_silhouette() {
        let tri = fixtures::single_triangle();
        let adj = build_edge_adjacency(&tri);
        let cam = Camera::orbit(0.0, 0.0, 2.5, 256.0, (512, 512));
        let set = detect_silhouette_edges(&tri, &adj, &cam).unwrap();
        assert!(set.is_empty());
    }

    #[test]
    fn salient_union_covers_sharp_edges() {
        let cube = normalized_cube();
        let adj = build_edge_adjacency(&cube);
        let sharp = detect_sharp_edges(&cube, &adj, 30.0).unwrap();
        let salient = extract_salient_edges(&cube, &adj, 30.0, 16).unwrap();
        let salient_idx: Vec<usize> = salient.indices().collect();
        for e in sharp.indices() {
            assert!(salient_idx.contains(&e));
        }
    }

    #[test]
    fn icosphere_salient_set_from_silhouettes_only() {
        let sphere = fixtures::icosphere(2);
        let adj = build_edge_adjacency(&sphere);
        let salient = extract_salient_edges(&sphere, &adj, 30.0, 16).unwrap();
        assert!(!salient.is_empty());
        assert_eq!(salient.count_label(EdgeLabel::Sharp), 0);
        assert_eq!(salient.count_label(EdgeLabel::Boundary), 0);
    }

    #[test]
    fn zero_views_rejected() {
        let cube = normalized_cube();
        let adj = build_edge_adjacency(&cube);
        assert!(extract_salient_edges(&cube, &adj, 30.0, 0).is_err());
    }

    #[test]
    fn sampling_counts_and_endpoints() {
        // one edge of length 1.0, spacing 0.25 -> 5 points at t = 0..1
        let verts = vec![
            nalgebra::Point3::new(0.0, 0.0, 0.0),
            nalgebra::Point3::new(1.0, 0.0, 0.0),
            nalgebra::Point3::new(0.0, 1.0, 0.0),
        ];
        let (mesh, _) = Mesh::from_parts(verts, vec![[0, 1, 2]]).unwrap();
        let adj = build_edge_adjacency(&mesh);
        let e = adj.edges.iter().position(|&(a, b)| (a, b) == (0, 1)).unwrap();
        let set = EdgeSet {
            members: vec![(e, EdgeLabel::Boundary)],
        };
        let cloud = sample_salient_points(&mesh, &adj, &set, 0.25).unwrap();
        assert_eq!(cloud.len(), 5);
        for (i, p) in cloud.points.iter().enumerate() {
            assert!((p.x - 0.25 * i as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn shared_endpoint_deduplicated() {
        let mesh = fixtures::two_triangles_sharing_edge();
        let adj = build_edge_adjacency(&mesh);
        let members: Vec<(usize, EdgeLabel)> =
            (0..adj.len()).map(|e| (e, EdgeLabel::Boundary)).collect();
        let set = EdgeSet { members };
        let cloud = sample_salient_points(&mesh, &adj, &set, 10.0).unwrap();
        // 5 edges sampled with 2 points each, but only 4 distinct vertices
        assert_eq!(cloud.len(), 4);
    }

    #[test]
    fn cube_sample_count_matches_dedup_oracle() {
        let cube = normalized_cube();
        let adj = build_edge_adjacency(&cube);
        let set = detect_sharp_edges(&cube, &adj, 30.0).unwrap();
        let spacing = 0.05;
        let cloud = sample_salient_points(&cube, &adj, &set, spacing).unwrap();
        // oracle: independent dedup count over all per-edge samples
        let mut raw: Vec<Point3<f64>> = Vec::new();
        for e in set.indices() {
            let (a, b) = adj.edges[e];
            let (pa, pb) = (cube.vertices[a], cube.vertices[b]);
            let n = ((pb - pa).norm() / spacing).ceil() as usize + 1;
            for i in 0..n {
                let t = i as f64 / (n - 1) as f64;
                raw.push(Point3::from(pa.coords * (1.0 - t) + pb.coords * t));
            }
        }
        assert_eq!(raw.len(), 12 * 41);
        let mut kept: Vec<Point3<f64>> = Vec::new();
        for p in raw {
            if !kept.iter().any(|q| (q - p).norm() < DEDUP_EPS) {
                kept.push(p);
            }
        }
        assert_eq!(cloud.len(), kept.len());
        // 12 edges x 41 points, 8 corners each shared by 3 edges
        assert_eq!(cloud.len(), 12 * 41 - 8 * 2);
    }

    #[test]
    fn samples_lie_on_source_edges_within_spacing() {
        let cube = normalized_cube();
        let adj = build_edge_adjacency(&cube);
        let set = detect_sharp_edges(&cube, &adj, 30.0).unwrap();
        let spacing = 0.07;
        let cloud = sample_salient_points(&cube, &adj, &set, spacing).unwrap();
        for (i, p) in cloud.points.iter().enumerate() {
            let (a, b) = adj.edges[cloud.source_edge[i]];
            let (pa, pb) = (cube.vertices[a], cube.vertices[b]);
            let d = pb - pa;
            let t = ((p - pa).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
            let on_seg = Point3::from(pa.coords + d * t);
            assert!((p - on_seg).norm() < 1e-9);
        }
        // consecutive samples on one edge are at most `spacing` apart
        for e in set.indices() {
            let mut on_edge: Vec<&Point3<f64>> = cloud
                .points
                .iter()
                .zip(&cloud.source_edge)
                .filter(|&(_, &se)| se == e)
                .map(|(p, _)| p)
                .collect();
            let (a, b) = adj.edges[e];
            let d = cube.vertices[b] - cube.vertices[a];
            on_edge.sort_by(|p, q| {
                (p.coords - cube.vertices[a].coords)
                    .dot(&d)
                    .partial_cmp(&(q.coords - cube.vertices[a].coords).dot(&d))
                    .unwrap()
            });
            for w in on_edge.windows(2) {
                assert!((w[1] - w[0]).norm() <= spacing + 1e-12);
            }
        }
    }

    #[test]
    fn empty_edge_set_yields_empty_cloud() {
        let cube = normalized_cube();
        let adj = build_edge_adjacency(&cube);
        let cloud = sample_salient_points(&cube, &adj, &EdgeSet::default(), 0.05).unwrap();
        assert!(cloud.is_empty());
    }
}
