//! Point clouds sampled on salient mesh edges.

use nalgebra::{Point3, Vector3};

/// Points sampled along salient edges, each carrying (once estimated) a unit
/// orientation vector approximating the local feature direction. Orientation
/// sign is arbitrary; every consumer treats `v` and `-v` as equivalent.
#[derive(Debug, Clone, Default)]
pub struct SalientPointCloud {
    pub points: Vec<Point3<f64>>,
    /// Unit orientation per point; empty until `estimate_orientations` runs.
    pub orientations: Vec<Vector3<f64>>,
    /// Marks points whose neighborhood had rank-0 covariance; their
    /// orientation is the placeholder (1,0,0).
    pub degenerate: Vec<bool>,
    /// Adjacency edge index each point was sampled from (first wins for
    /// deduplicated shared endpoints).
    pub source_edge: Vec<usize>,
}

impl SalientPointCloud {
    pub fn from_points(points: Vec<Point3<f64>>) -> SalientPointCloud {
        let n = points.len();
        SalientPointCloud {
            points,
            orientations: Vec::new(),
            degenerate: Vec::new(),
            source_edge: vec![usize::MAX; n],
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn has_orientations(&self) -> bool {
        self.orientations.len() == self.points.len()
    }

    /// Cloud restricted to `indices`, keeping orientations and flags.
    pub fn subset(&self, indices: &[usize]) -> SalientPointCloud {
        SalientPointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            orientations: if self.has_orientations() {
                indices.iter().map(|&i| self.orientations[i]).collect()
            } else {
                Vec::new()
            },
            degenerate: if self.degenerate.len() == self.points.len() {
                indices.iter().map(|&i| self.degenerate[i]).collect()
            } else {
                Vec::new()
            },
            source_edge: indices.iter().map(|&i| self.source_edge[i]).collect(),
        }
    }
}
