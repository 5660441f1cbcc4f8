//! End-to-end orchestration: mesh -> salient cloud -> clusters -> Stage-I
//! curves -> coverage -> Stage-II refinement -> multi-view SVG, plus the
//! curves-JSON format, the metrics report, and the mesh-fetch client.
//!
//! Artifacts are accumulated in memory and written in one final stage, so a
//! failure anywhere leaves no partial output directory behind.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::adjacency::build_edge_adjacency;
use crate::bezier::{sample_curves, CubicBezier3, Provenance, VectorGraphic3D};
use crate::chamfer::chamfer_loss;
use crate::cluster::{cluster_all, estimate_orientations, ClusterConfig};
use crate::error::{Error, Result};
use crate::fit::{fit_stage1, FitConfig, LossTrace};
use crate::mesh::{load_mesh, normalize_mesh, NormTransform};
use crate::refine::{coverage, init_refinement_curves, refine, residual_chamfer_objective, RefinementObjective};
use crate::render::{render_views, RenderStyle, ViewProtocol};
use crate::salient::{extract_salient_edges, sample_salient_points};
use crate::sds::SdsObjective;

pub const CURVES_FILE_VERSION: u32 = 1;
/// Environment variable naming the image-to-mesh reconstruction endpoint.
pub const RECON_ENDPOINT_ENV: &str = "SKETCH3D_RECON_ENDPOINT";
/// Environment variable naming the refinement gradient service endpoint.
pub const SDS_ENDPOINT_ENV: &str = "SKETCH3D_SDS_ENDPOINT";

/// Pipeline stages, used to tag errors and exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Load,
    Extract,
    Cluster,
    Fit,
    Coverage,
    Refine,
    Render,
    Write,
    Metrics,
    Fetch,
}

impl Stage {
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Config => 2,
            Stage::Load => 3,
            Stage::Extract => 4,
            Stage::Cluster => 5,
            Stage::Fit => 6,
            Stage::Coverage => 7,
            Stage::Refine => 8,
            Stage::Render => 9,
            Stage::Write => 10,
            Stage::Metrics => 11,
            Stage::Fetch => 12,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Config => "config",
            Stage::Load => "load",
            Stage::Extract => "extract",
            Stage::Cluster => "cluster",
            Stage::Fit => "fit",
            Stage::Coverage => "coverage",
            Stage::Refine => "refine",
            Stage::Render => "render",
            Stage::Write => "write",
            Stage::Metrics => "metrics",
            Stage::Fetch => "fetch",
        };
        f.write_str(name)
    }
}

fn stage_err(stage: Stage) -> impl Fn(Error) -> Error {
    move |e| Error::Stage {
        stage,
        source: Box::new(e),
    }
}

/// Which objective drives Stage II.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    ResidualChamfer,
    Sds,
}

impl std::str::FromStr for ObjectiveKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "residual-chamfer" => Ok(ObjectiveKind::ResidualChamfer),
            "sds" => Ok(ObjectiveKind::Sds),
            other => Err(Error::param(
                "objective",
                format!("unknown objective `{other}` (expected residual-chamfer or sds)"),
            )),
        }
    }
}

/// Every knob of the pipeline. Defaults follow the standard protocol:
/// d_thresh 0.05, theta_thresh 50 degrees, 64 samples per curve, lr 5e-3,
/// 100 Stage-I and 200 Stage-II steps, 12 rendered views.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub out_dir: PathBuf,

    // salient extraction
    pub theta_sharp: f64,
    pub silhouette_views: usize,
    pub spacing: f64,

    // clustering
    pub d_thresh: f64,
    pub theta_thresh: f64,
    pub knn: usize,
    pub tau: usize,

    // fitting
    pub samples_per_curve: usize,
    pub lambda: f64,
    pub noise_sigma: f64,
    pub lr: f64,
    pub stage1_steps: usize,
    pub stage2_steps: usize,

    // refinement
    pub r_cover: f64,
    pub objective: ObjectiveKind,
    pub sds_endpoint: Option<String>,
    pub image_ref: Option<String>,
    pub sds_timeout_secs: u64,

    // rendering
    pub views: usize,
    pub elevation: f64,
    pub radius: f64,
    pub focal: f64,
    pub canvas: u32,
    pub stroke_width: f64,
    pub stroke_color: String,
    pub opacity: f64,
    pub flatten_tol: f64,

    pub curve_cap: usize,
    pub vertex_coverage: bool,
    pub rng_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: PathBuf::new(),
            out_dir: PathBuf::from("out"),
            theta_sharp: 30.0,
            silhouette_views: 16,
            spacing: 0.015,
            d_thresh: 0.05,
            theta_thresh: 50.0,
            knn: 10,
            tau: 10,
            samples_per_curve: 64,
            lambda: 1.0,
            noise_sigma: 0.005,
            lr: 5e-3,
            stage1_steps: 100,
            stage2_steps: 200,
            r_cover: 0.05,
            objective: ObjectiveKind::ResidualChamfer,
            sds_endpoint: None,
            image_ref: None,
            sds_timeout_secs: 120,
            views: 12,
            elevation: 20.0,
            radius: 2.5,
            focal: 256.0,
            canvas: 512,
            stroke_width: 1.5,
            stroke_color: "#000000".to_string(),
            opacity: 1.0,
            flatten_tol: 0.25,
            curve_cap: 100,
            vertex_coverage: false,
            rng_seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn cluster_config(&self) -> ClusterConfig {
        ClusterConfig {
            d_thresh: self.d_thresh,
            theta_thresh_deg: self.theta_thresh,
            k: self.knn,
            tau: self.tau,
            rng_seed: self.rng_seed,
        }
    }

    pub fn fit_config(&self, steps: usize, seed_offset: u64) -> FitConfig {
        FitConfig {
            samples_per_curve: self.samples_per_curve,
            lambda: self.lambda,
            noise_sigma: self.noise_sigma,
            lr: self.lr,
            steps,
            rng_seed: self.rng_seed.wrapping_add(seed_offset),
        }
    }

    pub fn render_style(&self) -> RenderStyle {
        RenderStyle {
            stroke_width: self.stroke_width,
            stroke_color: self.stroke_color.clone(),
            opacity: self.opacity,
            canvas: self.canvas,
        }
    }

    pub fn view_protocol(&self) -> ViewProtocol {
        ViewProtocol {
            n_views: self.views,
            elevation_deg: self.elevation,
            radius: self.radius,
            focal: self.focal,
        }
    }

    /// Apply one `key = value` assignment (config-file or flag form).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &'static str, v: &str) -> Result<T> {
            v.trim().parse().map_err(|_| Error::InvalidParameter {
                name: key,
                msg: format!("cannot parse `{v}`"),
            })
        }
        match key {
            "input" => self.input = PathBuf::from(value.trim()),
            "out_dir" => self.out_dir = PathBuf::from(value.trim()),
            "theta_sharp" => self.theta_sharp = parse("theta_sharp", value)?,
            "silhouette_views" => self.silhouette_views = parse("silhouette_views", value)?,
            "spacing" => self.spacing = parse("spacing", value)?,
            "d_thresh" => self.d_thresh = parse("d_thresh", value)?,
            "theta_thresh" => self.theta_thresh = parse("theta_thresh", value)?,
            "knn" => self.knn = parse("knn", value)?,
            "tau" => self.tau = parse("tau", value)?,
            "samples_per_curve" => self.samples_per_curve = parse("samples_per_curve", value)?,
            "lambda" => self.lambda = parse("lambda", value)?,
            "noise_sigma" => self.noise_sigma = parse("noise_sigma", value)?,
            "lr" => self.lr = parse("lr", value)?,
            "stage1_steps" => self.stage1_steps = parse("stage1_steps", value)?,
            "stage2_steps" => self.stage2_steps = parse("stage2_steps", value)?,
            "r_cover" => self.r_cover = parse("r_cover", value)?,
            "objective" => self.objective = value.trim().parse()?,
            "sds_endpoint" => self.sds_endpoint = Some(value.trim().to_string()),
            "image_ref" => self.image_ref = Some(value.trim().to_string()),
            "sds_timeout_secs" => self.sds_timeout_secs = parse("sds_timeout_secs", value)?,
            "views" => self.views = parse("views", value)?,
            "elevation" => self.elevation = parse("elevation", value)?,
            "radius" => self.radius = parse("radius", value)?,
            "focal" => self.focal = parse("focal", value)?,
            "canvas" => self.canvas = parse("canvas", value)?,
            "stroke_width" => self.stroke_width = parse("stroke_width", value)?,
            "stroke_color" => self.stroke_color = value.trim().to_string(),
            "opacity" => self.opacity = parse("opacity", value)?,
            "flatten_tol" => self.flatten_tol = parse("flatten_tol", value)?,
            "curve_cap" => self.curve_cap = parse("curve_cap", value)?,
            "vertex_coverage" => self.vertex_coverage = parse("vertex_coverage", value)?,
            "rng_seed" => self.rng_seed = parse("rng_seed", value)?,
            other => {
                return Err(Error::InvalidParameter {
                    name: "config",
                    msg: format!("unknown key `{other}`"),
                })
            }
        }
        Ok(())
    }

    /// Load `key = value` lines (# comments allowed) over the defaults.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.into(),
                line: ln + 1,
                msg: "expected key = value".into(),
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }
}

/// Summary of one pipeline run; everything needed to audit the artifacts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: PipelineConfig,
    pub transform: NormTransform,
    pub degenerate_faces_dropped: usize,
    pub salient_edges: usize,
    pub salient_points: usize,
    pub stage1: StageReport,
    pub coverage_before: f64,
    pub coverage_after: f64,
    pub uncovered_points: usize,
    pub stage2: Stage2Report,
    pub render_wall_ms: u64,
    pub total_curves: usize,
    pub curve_cap_exceeded: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageReport {
    pub curves: usize,
    pub loss_init: f64,
    pub loss_final: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stage2Report {
    pub no_op: bool,
    pub new_curves: usize,
    pub objective: ObjectiveKind,
    /// Coverage of the previously uncovered subset by the combined samples,
    /// before and after optimizing the new curves.
    pub uncovered_coverage_init: f64,
    pub uncovered_coverage_final: f64,
    pub wall_ms: u64,
}

/// All in-memory artifacts of a run; [`write_artifacts`] puts them on disk.
pub struct RunArtifacts {
    pub manifest: RunManifest,
    pub graphic: VectorGraphic3D,
    pub coverage_report: crate::refine::CoverageReport,
    pub stage1_trace: LossTrace,
    pub stage2_trace: LossTrace,
    pub svgs: Vec<String>,
}

/// Run the full two-stage pipeline and write artifacts under
/// `config.out_dir`: curves.json, coverage.json, loss_stage1.csv,
/// loss_stage2.csv, view_NN.svg, manifest.json.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunManifest> {
    let artifacts = run_pipeline_in_memory(config)?;
    write_artifacts(config, &artifacts).map_err(stage_err(Stage::Write))?;
    Ok(artifacts.manifest)
}

/// The full pipeline without the final write stage.
pub fn run_pipeline_in_memory(config: &PipelineConfig) -> Result<RunArtifacts> {
    // load + normalize
    let (raw_mesh, warnings) = load_mesh(&config.input).map_err(stage_err(Stage::Load))?;
    let (mesh, transform) = normalize_mesh(&raw_mesh);

    // salient cloud
    let adj = build_edge_adjacency(&mesh);
    let edges = extract_salient_edges(&mesh, &adj, config.theta_sharp, config.silhouette_views)
        .map_err(stage_err(Stage::Extract))?;
    let cloud = sample_salient_points(&mesh, &adj, &edges, config.spacing)
        .map_err(stage_err(Stage::Extract))?;
    if cloud.is_empty() {
        return Err(stage_err(Stage::Extract)(Error::EmptyCloud));
    }

    // orientations + clusters
    let cluster_cfg = config.cluster_config();
    let cloud = estimate_orientations(cloud, cluster_cfg.k).map_err(stage_err(Stage::Cluster))?;
    let clusters = cluster_all(&cloud, &cluster_cfg).map_err(stage_err(Stage::Cluster))?;
    if clusters.is_empty() {
        return Err(stage_err(Stage::Cluster)(Error::param(
            "tau",
            "no clusters survived filtering; lower tau",
        )));
    }

    // stage I
    let t1 = Instant::now();
    let fit_cfg = config.fit_config(config.stage1_steps, 1);
    let (mut graphic, stage1_trace) =
        fit_stage1(&clusters, &cloud, &fit_cfg, transform).map_err(stage_err(Stage::Fit))?;
    let stage1 = StageReport {
        curves: graphic.curve_count(),
        loss_init: stage1_trace.initial().unwrap_or(f64::NAN),
        loss_final: stage1_trace.last().unwrap_or(f64::NAN),
        wall_ms: t1.elapsed().as_millis() as u64,
    };

    // coverage before stage II
    let stage1_samples = sample_curves(&graphic.curves, config.samples_per_curve);
    let coverage_before = coverage(&cloud.points, &stage1_samples.points, config.r_cover)
        .map_err(stage_err(Stage::Coverage))?;

    // stage II
    let t2 = Instant::now();
    graphic.freeze_all();
    let uncovered_points: Vec<Point3<f64>> = coverage_before
        .uncovered
        .iter()
        .map(|&i| cloud.points[i])
        .collect();
    let new_curves = init_refinement_curves(&coverage_before.uncovered, &cloud, &cluster_cfg)
        .map_err(stage_err(Stage::Refine))?;
    let refine_cfg = config.fit_config(config.stage2_steps, 2);
    let no_op = new_curves.is_empty();

    let uncovered_coverage_init = subset_coverage(
        &uncovered_points,
        &graphic.curves,
        &new_curves,
        config,
    )?;
    let (graphic, stage2_trace) = if no_op {
        (graphic, LossTrace::default())
    } else {
        let mut objective = build_objective(config, uncovered_points.clone())?;
        refine(&graphic, new_curves.clone(), objective.as_mut(), &refine_cfg)
            .map_err(stage_err(Stage::Refine))?
    };
    let stage2_curves: Vec<CubicBezier3> = graphic
        .curves
        .iter()
        .filter(|c| c.provenance == Provenance::Stage2)
        .copied()
        .collect();
    let uncovered_coverage_final = subset_coverage(
        &uncovered_points,
        &graphic.curves[..graphic.curve_count() - stage2_curves.len()],
        &stage2_curves,
        config,
    )?;
    let stage2 = Stage2Report {
        no_op,
        new_curves: stage2_curves.len(),
        objective: config.objective,
        uncovered_coverage_init,
        uncovered_coverage_final,
        wall_ms: t2.elapsed().as_millis() as u64,
    };

    // coverage after stage II
    let final_samples = sample_curves(&graphic.curves, config.samples_per_curve);
    let coverage_after = coverage(&cloud.points, &final_samples.points, config.r_cover)
        .map_err(stage_err(Stage::Coverage))?;

    // render
    let t3 = Instant::now();
    let svgs = render_views(
        &graphic,
        &config.view_protocol(),
        &config.render_style(),
        config.flatten_tol,
    )
    .map_err(stage_err(Stage::Render))?;
    let render_wall_ms = t3.elapsed().as_millis() as u64;

    let total_curves = graphic.curve_count();
    let curve_cap_exceeded = total_curves > config.curve_cap;
    if curve_cap_exceeded {
        eprintln!(
            "warning: {total_curves} curves exceed the soft cap of {}",
            config.curve_cap
        );
    }

    let manifest = RunManifest {
        config: config.clone(),
        transform,
        degenerate_faces_dropped: warnings.degenerate_faces,
        salient_edges: edges.len(),
        salient_points: cloud.len(),
        stage1,
        coverage_before: coverage_before.ratio,
        coverage_after: coverage_after.ratio,
        uncovered_points: coverage_before.uncovered.len(),
        stage2,
        render_wall_ms,
        total_curves,
        curve_cap_exceeded,
    };
    Ok(RunArtifacts {
        manifest,
        graphic,
        coverage_report: coverage_after,
        stage1_trace,
        stage2_trace,
        svgs,
    })
}

fn subset_coverage(
    uncovered_points: &[Point3<f64>],
    frozen: &[CubicBezier3],
    new_curves: &[CubicBezier3],
    config: &PipelineConfig,
) -> Result<f64> {
    if uncovered_points.is_empty() {
        return Ok(1.0);
    }
    let mut all: Vec<CubicBezier3> = frozen.to_vec();
    all.extend_from_slice(new_curves);
    if all.is_empty() {
        return Ok(0.0);
    }
    let samples = sample_curves(&all, config.samples_per_curve);
    Ok(coverage(uncovered_points, &samples.points, config.r_cover)
        .map_err(stage_err(Stage::Coverage))?
        .ratio)
}

fn build_objective(
    config: &PipelineConfig,
    uncovered_points: Vec<Point3<f64>>,
) -> Result<Box<dyn RefinementObjective>> {
    match config.objective {
        ObjectiveKind::ResidualChamfer => Ok(Box::new(
            residual_chamfer_objective(uncovered_points, config.lambda)
                .map_err(stage_err(Stage::Refine))?,
        )),
        ObjectiveKind::Sds => {
            let endpoint = config
                .sds_endpoint
                .clone()
                .or_else(|| std::env::var(SDS_ENDPOINT_ENV).ok())
                .ok_or_else(|| {
                    stage_err(Stage::Config)(Error::param(
                        "sds_endpoint",
                        format!("required for the sds objective (flag or ${SDS_ENDPOINT_ENV})"),
                    ))
                })?;
            let image_ref = config.image_ref.clone().unwrap_or_default();
            Ok(Box::new(SdsObjective::new(
                endpoint,
                image_ref,
                std::time::Duration::from_secs(config.sds_timeout_secs),
            )))
        }
    }
}

/// Write every artifact of a completed run under `config.out_dir`.
pub fn write_artifacts(config: &PipelineConfig, artifacts: &RunArtifacts) -> Result<()> {
    let dir = &config.out_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, contents: &str| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(path, e))
    };
    write("curves.json", &curves_to_json(&artifacts.graphic)?)?;
    write(
        "coverage.json",
        &serde_json::to_string_pretty(&artifacts.coverage_report)?,
    )?;
    write("loss_stage1.csv", &artifacts.stage1_trace.to_csv())?;
    write("loss_stage2.csv", &artifacts.stage2_trace.to_csv())?;
    for (i, svg) in artifacts.svgs.iter().enumerate() {
        write(&format!("view_{i:02}.svg"), svg)?;
    }
    write(
        "manifest.json",
        &serde_json::to_string_pretty(&artifacts.manifest)?,
    )?;
    Ok(())
}

// --- curves.json -----------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct CurveFile {
    version: u32,
    transform: NormTransform,
    curves: Vec<CurveRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CurveRecord {
    p: [[f64; 3]; 4],
    frozen: bool,
    provenance: Provenance,
}

/// Round to 9 significant decimal digits; keeps the file diff-able while
/// staying far inside every geometric tolerance used downstream.
fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

/// Serialize a graphic to the portable curves-JSON format.
pub fn curves_to_json(graphic: &VectorGraphic3D) -> Result<String> {
    let file = CurveFile {
        version: CURVES_FILE_VERSION,
        transform: NormTransform {
            center: graphic.transform.center.map(round_sig),
            scale: round_sig(graphic.transform.scale),
        },
        curves: graphic
            .curves
            .iter()
            .map(|c| CurveRecord {
                p: c.p.map(|p| [round_sig(p.x), round_sig(p.y), round_sig(p.z)]),
                frozen: c.frozen,
                provenance: c.provenance,
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

/// Parse the curves-JSON format back into a graphic.
pub fn curves_from_json(text: &str) -> Result<VectorGraphic3D> {
    let file: CurveFile = serde_json::from_str(text)?;
    if file.version != CURVES_FILE_VERSION {
        return Err(Error::param(
            "curves.json",
            format!("unsupported version {}", file.version),
        ));
    }
    let curves = file
        .curves
        .iter()
        .map(|r| CubicBezier3 {
            p: r.p.map(|p| Point3::new(p[0], p[1], p[2])),
            frozen: r.frozen,
            provenance: r.provenance,
        })
        .collect();
    Ok(VectorGraphic3D::new(curves, file.transform))
}

pub fn load_curves(path: &Path) -> Result<VectorGraphic3D> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    curves_from_json(&text)
}

// --- metrics ----------------------------------------------------------------

/// Geometric quality report for a fitted curve set against its source mesh.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub curve_count: usize,
    pub symmetric_chamfer: f64,
    pub coverage_ratio: f64,
    pub total_arc_length: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vertex_coverage: Option<f64>,
}

/// Recompute the salient cloud for `mesh_path` and score `curves` against
/// it. Fails if the stored normalization transform does not match the mesh.
pub fn metrics(config: &PipelineConfig, curves_path: &Path) -> Result<MetricsReport> {
    let graphic = load_curves(curves_path).map_err(stage_err(Stage::Metrics))?;
    let (raw_mesh, _) = load_mesh(&config.input).map_err(stage_err(Stage::Load))?;
    let (mesh, transform) = normalize_mesh(&raw_mesh);
    if !transform.approx_eq(&graphic.transform, 1e-9) {
        return Err(stage_err(Stage::Metrics)(Error::TransformMismatch));
    }
    if graphic.curves.is_empty() {
        return Err(stage_err(Stage::Metrics)(Error::EmptyCloud));
    }

    let adj = build_edge_adjacency(&mesh);
    let edges = extract_salient_edges(&mesh, &adj, config.theta_sharp, config.silhouette_views)
        .map_err(stage_err(Stage::Extract))?;
    let cloud = sample_salient_points(&mesh, &adj, &edges, config.spacing)
        .map_err(stage_err(Stage::Extract))?;

    let samples = sample_curves(&graphic.curves, config.samples_per_curve);
    let symmetric_chamfer = chamfer_loss(&samples.points, &cloud.points, 1.0)
        .map_err(stage_err(Stage::Metrics))?;
    let cover = coverage(&cloud.points, &samples.points, config.r_cover)
        .map_err(stage_err(Stage::Metrics))?;
    let total_arc_length: f64 = graphic.curves.iter().map(|c| c.arc_length(256)).sum();
    let vertex_coverage = if config.vertex_coverage {
        Some(
            coverage(&mesh.vertices, &samples.points, config.r_cover)
                .map_err(stage_err(Stage::Metrics))?
                .ratio,
        )
    } else {
        None
    };
    Ok(MetricsReport {
        curve_count: graphic.curve_count(),
        symmetric_chamfer,
        coverage_ratio: cover.ratio,
        total_arc_length,
        vertex_coverage,
    })
}

// --- mesh fetch --------------------------------------------------------------

/// POST an image to an external image-to-3D reconstruction service and write
/// the returned OBJ/PLY mesh to `out_path`. The payload is validated as a
/// parseable mesh before anything is written.
pub fn fetch_mesh(image_path: &Path, endpoint: &str, out_path: &Path) -> Result<PathBuf> {
    let bytes = fs::read(image_path).map_err(|e| Error::io(image_path, e))?;
    let response = ureq::post(endpoint)
        .set("content-type", "application/octet-stream")
        .send_bytes(&bytes)
        .map_err(|e| Error::Service {
            msg: format!("reconstruction service request failed: {e}"),
        })?;
    let body = response.into_string().map_err(|e| Error::Service {
        msg: format!("reconstruction service response unreadable: {e}"),
    })?;

    // validate before writing anything
    let parsed = if body.trim_start().starts_with("ply") {
        crate::mesh::parse_ply(&body, out_path)
    } else {
        crate::mesh::parse_obj(&body, out_path)
    };
    parsed.map_err(|e| Error::InvalidMeshPayload {
        source: Box::new(e),
    })?;

    fs::write(out_path, &body).map_err(|e| Error::io(out_path, e))?;
    Ok(out_path.to_path_buf())
}

/// Flatten a config into sorted `key = value` lines (the config-file format).
pub fn config_to_kv(config: &PipelineConfig) -> String {
    let value = serde_json::to_value(config).expect("config serializes");
    let map: BTreeMap<String, serde_json::Value> =
        serde_json::from_value(value).expect("config is a flat object");
    let mut out = String::new();
    for (k, v) in map {
        let rendered = match v {
            serde_json::Value::String(s) => s,
            serde_json::Value::Null => continue,
            other => other.to_string(),
        };
        out.push_str(&format!("{k} = {rendered}\n"));
    }
    out
}
