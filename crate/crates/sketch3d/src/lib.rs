//! Fit compact 3D vector graphics (sets of cubic Bézier curves) to triangle
//! meshes and render them as view-consistent multi-view SVG line drawings.
//!
//! The pipeline has two stages. Stage I extracts a salient point cloud from
//! the mesh (sharp dihedral edges, boundaries, and multi-view silhouettes),
//! groups it into directional clusters, and fits one cubic per cluster by
//! minimizing a Chamfer distance loss with SGD. Stage II finds the salient
//! points the Stage-I curves fail to cover, initializes new curves there,
//! freezes the Stage-I parameters, and optimizes only the new curves under a
//! pluggable objective: the shipped residual-Chamfer default, or an external
//! gradient service speaking a small JSON protocol.
//!
//! Because a perspective projection of a cubic Bézier is exactly a 2D
//! rational cubic, rendering projects control points (weighted by depth) and
//! flattens the rational curve adaptively, so the emitted SVG paths follow
//! the true projected curve.
//!
//! See the `examples/` directory for one runnable walkthrough per stage and
//! the `sketch3d` binary for the end-to-end CLI.

pub mod adjacency;
pub mod bezier;
pub mod camera;
pub mod chamfer;
pub mod cloud;
pub mod cluster;
pub mod error;
pub mod fixtures;
pub mod fit;
pub mod knn;
pub mod mesh;
pub mod pipeline;
pub mod refine;
pub mod render;
pub mod salient;
pub mod sds;

pub use adjacency::{build_edge_adjacency, EdgeAdjacency};
pub use bezier::{bernstein, sample_curves, CubicBezier3, CurveSamples, Provenance, VectorGraphic3D};
pub use camera::Camera;
pub use chamfer::{add_noise, chamfer_loss, chamfer_value_and_point_grads};
pub use cloud::SalientPointCloud;
pub use cluster::{cluster_all, estimate_orientations, grow_cluster, Cluster, ClusterConfig};
pub use error::{Error, Result};
pub use fit::{chamfer_gradient, evaluate_loss, fit_stage1, init_curves_from_cluster, FitConfig, LossTrace};
pub use knn::KdTree3;
pub use mesh::{load_mesh, normalize_mesh, LoadWarnings, Mesh, NormTransform};
pub use pipeline::{
    curves_from_json, curves_to_json, fetch_mesh, load_curves, metrics, run_pipeline,
    MetricsReport, ObjectiveKind, PipelineConfig, RunManifest, Stage,
};
pub use refine::{
    coverage, init_refinement_curves, refine, residual_chamfer_objective, CoverageReport,
    ObjectiveEval, RefinementObjective, ResidualChamferObjective,
};
pub use render::{
    emit_svg, flatten_rational, project_curve, render_views, RationalBezier2, RenderStyle,
    ViewProtocol,
};
pub use salient::{
    detect_sharp_edges, detect_silhouette_edges, extract_salient_edges, sample_salient_points,
    EdgeLabel, EdgeSet,
};
pub use sds::SdsObjective;
