//! Stage II: find salient points the Stage-I curves fail to cover,
//! initialize new curves there, and optimize only the new parameters while
//! the Stage-I curves stay frozen.
//!
//! The objective is pluggable: the shipped default measures the residual
//! Chamfer distance between the new curves' samples and the uncovered
//! points; an external scoring service can be used instead through
//! [`crate::sds::SdsObjective`]. Either way, gradients arrive per sample
//! point and are chained to control points here, so frozen parameters can
//! never move.

use std::ops::Range;

use nalgebra::{Point3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bezier::{sample_curves, CubicBezier3, Provenance, VectorGraphic3D};
use crate::chamfer::{add_noise, chamfer_value_and_point_grads, route_point_grads_to_controls};
use crate::cloud::SalientPointCloud;
use crate::cluster::{cluster_all, ClusterConfig};
use crate::error::{Error, Result};
use crate::fit::{apply_sgd_step, init_curve, FitConfig, LossTrace};
use crate::knn::KdTree3;

/// Control-point jitter applied to freshly initialized Stage-II curves.
pub const STAGE2_JITTER_SIGMA: f64 = 0.01;
/// Stream offsets so the stages draw independent noise from one seed.
const JITTER_STREAM: u64 = 0x9e3779b97f4a7c15;
const STAGE2_NOISE_STREAM: u64 = 0x517cc1b727220a95;

/// Which salient points are within `r_cover` of the sampled curve cloud.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageReport {
    pub covered: Vec<bool>,
    pub uncovered: Vec<usize>,
    pub ratio: f64,
    pub r_cover: f64,
}

/// Exact nearest-neighbor cover test of `pc_s` against `pc_c`. An empty
/// `pc_c` leaves every point uncovered.
pub fn coverage(pc_s: &[Point3<f64>], pc_c: &[Point3<f64>], r_cover: f64) -> Result<CoverageReport> {
    if r_cover <= 0.0 {
        return Err(Error::param("r_cover", "must be positive"));
    }
    if pc_s.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let (covered, uncovered) = if pc_c.is_empty() {
        (vec![false; pc_s.len()], (0..pc_s.len()).collect())
    } else {
        let tree = KdTree3::build(pc_c);
        let covered: Vec<bool> = pc_s
            .iter()
            .map(|q| tree.nearest(q).expect("pc_c non-empty").1 <= r_cover * r_cover)
            .collect();
        let uncovered = covered
            .iter()
            .enumerate()
            .filter(|&(_, &c)| !c)
            .map(|(i, _)| i)
            .collect();
        (covered, uncovered)
    };
    let ratio = covered.iter().filter(|&&c| c).count() as f64 / pc_s.len() as f64;
    Ok(CoverageReport {
        covered,
        uncovered,
        ratio,
        r_cover,
    })
}

/// Re-cluster the uncovered points (with tau relaxed to tau/2, since
/// uncovered regions are sparse by construction) and initialize one jittered,
/// unfrozen Stage-II curve per surviving cluster.
pub fn init_refinement_curves(
    uncovered: &[usize],
    cloud: &SalientPointCloud,
    cfg: &ClusterConfig,
) -> Result<Vec<CubicBezier3>> {
    if uncovered.is_empty() {
        return Ok(Vec::new());
    }
    if !cloud.has_orientations() {
        return Err(Error::OrientationsMissing);
    }
    let sub = cloud.subset(uncovered);
    let relaxed = ClusterConfig {
        tau: (cfg.tau / 2).max(1),
        ..*cfg
    };
    let clusters = cluster_all(&sub, &relaxed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed ^ JITTER_STREAM);
    let mut curves = Vec::with_capacity(clusters.len());
    for cluster in &clusters {
        let mut curve = init_curve(cluster, &sub, Provenance::Stage2)?;
        let jitter = add_noise(&curve.p, STAGE2_JITTER_SIGMA, &mut rng);
        curve.p = [jitter[0], jitter[1], jitter[2], jitter[3]];
        curves.push(curve);
    }
    Ok(curves)
}

/// Value and per-point gradients of a refinement objective over the combined
/// sample cloud. `point_grads` covers only the unfrozen range.
#[derive(Debug, Clone)]
pub struct ObjectiveEval {
    pub value: f64,
    pub point_grads: Vec<Vector3<f64>>,
}

/// A scalar objective over the combined sampled cloud `P_c ∪ P_c'`, exposing
/// gradients for the unfrozen (Stage-II) samples only.
pub trait RefinementObjective {
    fn value_and_grad(
        &mut self,
        points: &[Point3<f64>],
        unfrozen: Range<usize>,
        step: usize,
    ) -> Result<ObjectiveEval>;
}

/// The shipped default objective: Chamfer distance between the new curves'
/// samples and the uncovered subset of the salient cloud.
pub struct ResidualChamferObjective {
    target: Vec<Point3<f64>>,
    lambda: f64,
}

/// Build the residual-Chamfer objective over the uncovered points.
pub fn residual_chamfer_objective(
    uncovered_points: Vec<Point3<f64>>,
    lambda: f64,
) -> Result<ResidualChamferObjective> {
    if uncovered_points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(ResidualChamferObjective {
        target: uncovered_points,
        lambda,
    })
}

impl RefinementObjective for ResidualChamferObjective {
    fn value_and_grad(
        &mut self,
        points: &[Point3<f64>],
        unfrozen: Range<usize>,
        _step: usize,
    ) -> Result<ObjectiveEval> {
        let pc_new = &points[unfrozen];
        let (value, point_grads) = chamfer_value_and_point_grads(pc_new, &self.target, self.lambda)?;
        Ok(ObjectiveEval { value, point_grads })
    }
}

/// Optimize only the new curves under `objective` for `cfg.steps` SGD steps
/// and return the combined graphic. Stage-I control points pass through
/// bit-identical; with no new curves the graphic is returned unchanged.
pub fn refine(
    graphic: &VectorGraphic3D,
    new_curves: Vec<CubicBezier3>,
    objective: &mut dyn RefinementObjective,
    cfg: &FitConfig,
) -> Result<(VectorGraphic3D, LossTrace)> {
    cfg.validate()?;
    if new_curves.is_empty() {
        return Ok((graphic.clone(), LossTrace::default()));
    }
    if graphic.curves.iter().any(|c| !c.frozen) {
        return Err(Error::param(
            "graphic",
            "stage-1 curves must be frozen before refinement",
        ));
    }
    if new_curves.iter().any(|c| c.frozen) {
        return Err(Error::param("new_curves", "must be unfrozen"));
    }

    let n_frozen = graphic.curves.len();
    let mut curves: Vec<CubicBezier3> = graphic.curves.clone();
    curves.extend(new_curves);

    let s = cfg.samples_per_curve;
    let unfrozen_start = n_frozen * s;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed ^ STAGE2_NOISE_STREAM);
    let mut trace = LossTrace::default();

    for step in 0..cfg.steps {
        let samples = sample_curves(&curves, s);
        let mut points = samples.points;
        let noisy_tail = add_noise(&points[unfrozen_start..], cfg.noise_sigma, &mut rng);
        points[unfrozen_start..].copy_from_slice(&noisy_tail);

        let eval = objective
            .value_and_grad(&points, unfrozen_start..points.len(), step)
            .map_err(|e| Error::Refinement {
                step,
                source: Box::new(e),
            })?;
        if eval.point_grads.len() != points.len() - unfrozen_start {
            return Err(Error::Refinement {
                step,
                source: Box::new(Error::GradientCount {
                    expected: points.len() - unfrozen_start,
                    got: eval.point_grads.len(),
                }),
            });
        }
        trace.entries.push((step, eval.value));

        let control_grads = route_point_grads_to_controls(
            &samples.back[unfrozen_start..],
            &eval.point_grads,
            &curves,
        );
        apply_sgd_step(&mut curves, &control_grads, cfg.lr);
    }

    Ok((VectorGraphic3D::new(curves, graphic.transform), trace))
}
