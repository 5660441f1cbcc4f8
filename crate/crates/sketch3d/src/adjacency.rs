//! Undirected edge -> incident face adjacency for a triangle mesh.

use std::collections::HashMap;

use crate::mesh::Mesh;

/// Per-edge incident faces. Edges are stored once as `(i, j)` with `i < j`,
/// sorted lexicographically so edge indices are deterministic.
#[derive(Debug, Clone)]
pub struct EdgeAdjacency {
    pub edges: Vec<(usize, usize)>,
    pub edge_faces: Vec<Vec<usize>>,
}

impl EdgeAdjacency {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Edges with more than two incident faces.
    pub fn non_manifold_edges(&self) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&e| self.edge_faces[e].len() > 2)
            .collect()
    }
}

/// Collect every undirected edge of every face exactly once, with its
/// incident face list.
pub fn build_edge_adjacency(mesh: &Mesh) -> EdgeAdjacency {
    let mut map: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (fi, f) in mesh.faces.iter().enumerate() {
        for k in 0..3 {
            let a = f[k];
            let b = f[(k + 1) % 3];
            let key = (a.min(b), a.max(b));
            map.entry(key).or_default().push(fi);
        }
    }
    let mut edges: Vec<(usize, usize)> = map.keys().copied().collect();
    edges.sort_unstable();
    let edge_faces = edges.iter().map(|e| map.remove(e).unwrap()).collect();
    EdgeAdjacency { edges, edge_faces }
}
