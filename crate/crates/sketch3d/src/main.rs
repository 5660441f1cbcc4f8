//! Thin CLI over the sketch3d library: `run`, `fit`, `refine`, `render`,
//! `metrics`, `fetch-mesh`. Flags mirror the config-file keys; flags win.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sketch3d::bezier::sample_curves;
use sketch3d::pipeline::{
    self, config_to_kv, curves_to_json, PipelineConfig, Stage, RECON_ENDPOINT_ENV,
};
use sketch3d::{Error, Result};

#[derive(Parser)]
#[command(name = "sketch3d", version, about = "Fit 3D Bézier curve sketches to meshes and render multi-view SVG")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline: mesh -> curves -> refinement -> SVGs.
    Run(RunArgs),
    /// Stage I only: fit curves to the salient cloud and write curves.json.
    Fit(RunArgs),
    /// Stage II only: refine an existing curves.json against its mesh.
    Refine(RefineArgs),
    /// Render an existing curves.json to the multi-view SVG set.
    Render(RenderArgs),
    /// Geometric quality metrics for a curves.json against its mesh.
    Metrics(MetricsArgs),
    /// Fetch a mesh from an image-to-3D reconstruction service.
    FetchMesh(FetchArgs),
    /// Print the effective configuration in config-file form.
    ShowConfig(ConfigArgs),
}

/// Flags shared by every pipeline-driving subcommand; each one overrides the
/// matching config-file key.
#[derive(Args)]
struct ConfigArgs {
    /// Flat key = value config file applied before any flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    theta_sharp: Option<f64>,
    #[arg(long)]
    silhouette_views: Option<usize>,
    #[arg(long)]
    spacing: Option<f64>,
    #[arg(long)]
    d_thresh: Option<f64>,
    #[arg(long)]
    theta_thresh: Option<f64>,
    #[arg(long)]
    knn: Option<usize>,
    #[arg(long)]
    tau: Option<usize>,
    #[arg(long)]
    samples_per_curve: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    stage1_steps: Option<usize>,
    #[arg(long)]
    stage2_steps: Option<usize>,
    #[arg(long)]
    r_cover: Option<f64>,
    /// residual-chamfer | sds
    #[arg(long)]
    objective: Option<String>,
    /// Gradient service URL (or $SKETCH3D_SDS_ENDPOINT).
    #[arg(long)]
    sds_endpoint: Option<String>,
    #[arg(long)]
    image_ref: Option<String>,
    #[arg(long)]
    sds_timeout_secs: Option<u64>,
    #[arg(long)]
    views: Option<usize>,
    #[arg(long)]
    elevation: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    focal: Option<f64>,
    #[arg(long)]
    canvas: Option<u32>,
    #[arg(long)]
    stroke_width: Option<f64>,
    #[arg(long)]
    stroke_color: Option<String>,
    #[arg(long)]
    opacity: Option<f64>,
    #[arg(long)]
    flatten_tol: Option<f64>,
    #[arg(long)]
    curve_cap: Option<usize>,
    #[arg(long)]
    vertex_coverage: Option<bool>,
    #[arg(long)]
    rng_seed: Option<u64>,
}

impl ConfigArgs {
    fn build(&self) -> Result<PipelineConfig> {
        let mut config = PipelineConfig::default();
        if let Some(path) = &self.config {
            config.apply_file(path)?;
        }
        macro_rules! apply {
            ($($field:ident),* $(,)?) => {
                $(if let Some(v) = &self.$field {
                    config.set(stringify!($field), &v.to_string())?;
                })*
            };
        }
        apply!(
            theta_sharp, silhouette_views, spacing, d_thresh, theta_thresh, knn, tau,
            samples_per_curve, lambda, noise_sigma, lr, stage1_steps, stage2_steps, r_cover,
            objective, sds_endpoint, image_ref, sds_timeout_secs, views, elevation, radius,
            focal, canvas, stroke_width, stroke_color, opacity, flatten_tol, curve_cap,
            vertex_coverage, rng_seed,
        );
        if let Some(input) = &self.input {
            config.input = input.clone();
        }
        if let Some(out_dir) = &self.out_dir {
            config.out_dir = out_dir.clone();
        }
        Ok(config)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct RefineArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Stage-I curves to refine.
    #[arg(long)]
    curves: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Curves to render.
    #[arg(long)]
    curves: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    curves: PathBuf,
}

#[derive(Args)]
struct FetchArgs {
    /// Input image file.
    #[arg(long)]
    image: PathBuf,
    /// Reconstruction service URL (or $SKETCH3D_RECON_ENDPOINT).
    #[arg(long)]
    endpoint: Option<String>,
    /// Where to write the fetched mesh (.obj or .ply).
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            let code = match &e {
                Error::Stage { stage, .. } => stage.exit_code(),
                _ => 1,
            };
            ExitCode::from(code as u8)
        }
    }
}

fn stage_err(stage: Stage) -> impl Fn(Error) -> Error {
    move |e| match e {
        already @ Error::Stage { .. } => already,
        other => Error::Stage {
            stage,
            source: Box::new(other),
        },
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let config = args.config.build().map_err(stage_err(Stage::Config))?;
            require_input(&config)?;
            let manifest = pipeline::run_pipeline(&config)?;
            println!(
                "wrote {} curves, {} views to {} (coverage {:.3} -> {:.3})",
                manifest.total_curves,
                manifest.config.views,
                config.out_dir.display(),
                manifest.coverage_before,
                manifest.coverage_after,
            );
            Ok(())
        }
        Command::Fit(args) => {
            let mut config = args.config.build().map_err(stage_err(Stage::Config))?;
            require_input(&config)?;
            // stage I only
            config.stage2_steps = 0;
            let artifacts = pipeline::run_pipeline_in_memory(&config)?;
            std::fs::create_dir_all(&config.out_dir)
                .map_err(|e| stage_err(Stage::Write)(Error::io(&config.out_dir, e)))?;
            let curves_path = config.out_dir.join("curves.json");
            let mut stage1_only = artifacts.graphic.clone();
            stage1_only
                .curves
                .retain(|c| c.provenance == sketch3d::Provenance::Stage1);
            std::fs::write(&curves_path, curves_to_json(&stage1_only)?)
                .map_err(|e| stage_err(Stage::Write)(Error::io(&curves_path, e)))?;
            let trace_path = config.out_dir.join("loss_stage1.csv");
            std::fs::write(&trace_path, artifacts.stage1_trace.to_csv())
                .map_err(|e| stage_err(Stage::Write)(Error::io(&trace_path, e)))?;
            println!(
                "fitted {} stage-1 curves to {}",
                stage1_only.curves.len(),
                curves_path.display()
            );
            Ok(())
        }
        Command::Refine(args) => {
            let config = args.config.build().map_err(stage_err(Stage::Config))?;
            require_input(&config)?;
            let refined = refine_existing(&config, &args.curves)?;
            std::fs::create_dir_all(&config.out_dir)
                .map_err(|e| stage_err(Stage::Write)(Error::io(&config.out_dir, e)))?;
            let out = config.out_dir.join("curves.json");
            std::fs::write(&out, curves_to_json(&refined)?)
                .map_err(|e| stage_err(Stage::Write)(Error::io(&out, e)))?;
            println!("refined to {} curves at {}", refined.curves.len(), out.display());
            Ok(())
        }
        Command::Render(args) => {
            let config = args.config.build().map_err(stage_err(Stage::Config))?;
            let graphic =
                pipeline::load_curves(&args.curves).map_err(stage_err(Stage::Render))?;
            let svgs = sketch3d::render_views(
                &graphic,
                &config.view_protocol(),
                &config.render_style(),
                config.flatten_tol,
            )
            .map_err(stage_err(Stage::Render))?;
            std::fs::create_dir_all(&config.out_dir)
                .map_err(|e| stage_err(Stage::Write)(Error::io(&config.out_dir, e)))?;
            for (i, svg) in svgs.iter().enumerate() {
                let path = config.out_dir.join(format!("view_{i:02}.svg"));
                std::fs::write(&path, svg)
                    .map_err(|e| stage_err(Stage::Write)(Error::io(&path, e)))?;
            }
            println!("rendered {} views to {}", svgs.len(), config.out_dir.display());
            Ok(())
        }
        Command::Metrics(args) => {
            let config = args.config.build().map_err(stage_err(Stage::Config))?;
            require_input(&config)?;
            let report = pipeline::metrics(&config, &args.curves)?;
            println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?);
            Ok(())
        }
        Command::FetchMesh(args) => {
            let endpoint = args
                .endpoint
                .or_else(|| std::env::var(RECON_ENDPOINT_ENV).ok())
                .ok_or_else(|| {
                    stage_err(Stage::Fetch)(Error::param(
                        "endpoint",
                        format!("required (flag or ${RECON_ENDPOINT_ENV})"),
                    ))
                })?;
            let path = pipeline::fetch_mesh(&args.image, &endpoint, &args.out)
                .map_err(stage_err(Stage::Fetch))?;
            println!("fetched mesh to {}", path.display());
            Ok(())
        }
        Command::ShowConfig(args) => {
            let config = args.build().map_err(stage_err(Stage::Config))?;
            print!("{}", config_to_kv(&config));
            Ok(())
        }
    }
}

fn require_input(config: &PipelineConfig) -> Result<()> {
    if config.input.as_os_str().is_empty() {
        return Err(stage_err(Stage::Config)(Error::param(
            "input",
            "an input mesh is required (--input)",
        )));
    }
    Ok(())
}

/// Stage II over a previously fitted curve set: recompute the salient cloud,
/// freeze the loaded curves, and refine new curves over the uncovered
/// points.
fn refine_existing(
    config: &PipelineConfig,
    curves_path: &std::path::Path,
) -> Result<sketch3d::VectorGraphic3D> {
    use sketch3d::{cluster, mesh, refine as refine_mod, salient};

    let mut graphic = pipeline::load_curves(curves_path).map_err(stage_err(Stage::Refine))?;
    let (raw_mesh, _) = mesh::load_mesh(&config.input).map_err(stage_err(Stage::Load))?;
    let (normalized, transform) = mesh::normalize_mesh(&raw_mesh);
    if !transform.approx_eq(&graphic.transform, 1e-9) {
        return Err(stage_err(Stage::Refine)(Error::TransformMismatch));
    }

    let adj = sketch3d::build_edge_adjacency(&normalized);
    let edges =
        salient::extract_salient_edges(&normalized, &adj, config.theta_sharp, config.silhouette_views)
            .map_err(stage_err(Stage::Extract))?;
    let cloud = salient::sample_salient_points(&normalized, &adj, &edges, config.spacing)
        .map_err(stage_err(Stage::Extract))?;
    let cluster_cfg = config.cluster_config();
    let cloud = cluster::estimate_orientations(cloud, cluster_cfg.k)
        .map_err(stage_err(Stage::Cluster))?;

    graphic.freeze_all();
    let samples = sample_curves(&graphic.curves, config.samples_per_curve);
    let cover = refine_mod::coverage(&cloud.points, &samples.points, config.r_cover)
        .map_err(stage_err(Stage::Coverage))?;
    let new_curves = refine_mod::init_refinement_curves(&cover.uncovered, &cloud, &cluster_cfg)
        .map_err(stage_err(Stage::Refine))?;
    if new_curves.is_empty() {
        println!("no uncovered regions; refinement is a no-op");
        return Ok(graphic);
    }
    let uncovered_points: Vec<_> = cover.uncovered.iter().map(|&i| cloud.points[i]).collect();
    let mut objective: Box<dyn sketch3d::RefinementObjective> = match config.objective {
        pipeline::ObjectiveKind::ResidualChamfer => Box::new(
            sketch3d::residual_chamfer_objective(uncovered_points, config.lambda)
                .map_err(stage_err(Stage::Refine))?,
        ),
        pipeline::ObjectiveKind::Sds => {
            let endpoint = config
                .sds_endpoint
                .clone()
                .or_else(|| std::env::var(pipeline::SDS_ENDPOINT_ENV).ok())
                .ok_or_else(|| {
                    stage_err(Stage::Config)(Error::param("sds_endpoint", "required for sds"))
                })?;
            Box::new(sketch3d::SdsObjective::new(
                endpoint,
                config.image_ref.clone().unwrap_or_default(),
                std::time::Duration::from_secs(config.sds_timeout_secs),
            ))
        }
    };
    let refine_cfg = config.fit_config(config.stage2_steps, 2);
    let (refined, _) = refine_mod::refine(&graphic, new_curves, objective.as_mut(), &refine_cfg)
        .map_err(stage_err(Stage::Refine))?;
    Ok(refined)
}
