//! Stage I: initialize one cubic per cluster and optimize all control points
//! jointly against the full salient cloud with SGD on the Chamfer loss.

use nalgebra::{Point3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bezier::{sample_curves, CubicBezier3, Provenance, VectorGraphic3D};
use crate::chamfer::{add_noise, chamfer_value_and_point_grads, route_point_grads_to_controls};
use crate::cloud::SalientPointCloud;
use crate::cluster::Cluster;
use crate::error::{Error, Result};
use crate::mesh::NormTransform;

/// Gradient-norm clip over all control points; survives rare bad noise draws.
pub const GRAD_CLIP_NORM: f64 = 10.0;
/// Dense sample count for line-vs-curve candidate selection.
const CANDIDATE_SAMPLES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Samples per curve (s).
    pub samples_per_curve: usize,
    /// Balance weight on the curve-to-cloud Chamfer term.
    pub lambda: f64,
    /// Std-dev of the Gaussian augmentation, redrawn every step.
    pub noise_sigma: f64,
    pub lr: f64,
    pub steps: usize,
    pub rng_seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            samples_per_curve: 64,
            lambda: 1.0,
            noise_sigma: 0.005,
            lr: 5e-3,
            steps: 100,
            rng_seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_curve < 2 {
            return Err(Error::param("samples_per_curve", "must be at least 2"));
        }
        if self.lambda < 0.0 {
            return Err(Error::param("lambda", "must be non-negative"));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::param("noise_sigma", "must be non-negative"));
        }
        if self.lr <= 0.0 {
            return Err(Error::param("lr", "must be positive"));
        }
        Ok(())
    }
}

/// One optimization step's worth of gradients.
#[derive(Debug, Clone)]
pub struct ChamferEval {
    /// Loss on the noise-augmented samples.
    pub value: f64,
    pub control_grads: Vec<[Vector3<f64>; 4]>,
}

/// Gradient of `chamfer_loss(add_noise(sample_curves(curves)), pc_s)` with
/// respect to every unfrozen control point; correspondences and the noise
/// draw are constants.
pub fn chamfer_gradient(
    curves: &[CubicBezier3],
    pc_s: &[Point3<f64>],
    cfg: &FitConfig,
    rng: &mut ChaCha8Rng,
) -> Result<ChamferEval> {
    if curves.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let samples = sample_curves(curves, cfg.samples_per_curve);
    let noisy = add_noise(&samples.points, cfg.noise_sigma, rng);
    let (value, point_grads) = chamfer_value_and_point_grads(&noisy, pc_s, cfg.lambda)?;
    let control_grads = route_point_grads_to_controls(&samples.back, &point_grads, curves);
    Ok(ChamferEval {
        value,
        control_grads,
    })
}

/// Noise-free Chamfer loss of the sampled curves against `pc_s`; the value
/// reported in telemetry and compared across steps.
pub fn evaluate_loss(
    curves: &[CubicBezier3],
    pc_s: &[Point3<f64>],
    s: usize,
    lambda: f64,
) -> Result<f64> {
    let samples = sample_curves(curves, s);
    crate::chamfer::chamfer_loss(&samples.points, pc_s, lambda)
}

/// (step, loss) telemetry; step 0 is the pre-optimization loss.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    pub entries: Vec<(usize, f64)>,
}

impl LossTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,loss\n");
        for (step, loss) in &self.entries {
            out.push_str(&format!("{step},{loss:.12e}\n"));
        }
        out
    }

    pub fn initial(&self) -> Option<f64> {
        self.entries.first().map(|&(_, l)| l)
    }

    pub fn last(&self) -> Option<f64> {
        self.entries.last().map(|&(_, l)| l)
    }
}

/// Build the initial curve for a cluster: a least-squares line candidate and
/// a polyline-based cubic candidate, keeping whichever has the smaller
/// one-sided Chamfer error from the cluster points.
pub fn init_curves_from_cluster(
    cluster: &Cluster,
    cloud: &SalientPointCloud,
) -> Result<CubicBezier3> {
    init_curve(cluster, cloud, Provenance::Stage1)
}

pub(crate) fn init_curve(
    cluster: &Cluster,
    cloud: &SalientPointCloud,
    provenance: Provenance,
) -> Result<CubicBezier3> {
    if cluster.len() < 2 {
        return Err(Error::param("cluster", "needs at least 2 points"));
    }
    let pts: Vec<Point3<f64>> = cluster.members.iter().map(|&i| cloud.points[i]).collect();
    let spread = pts
        .iter()
        .map(|p| (p - pts[0]).norm())
        .fold(0.0f64, f64::max);
    if spread < 1e-12 {
        return Err(Error::DegenerateCluster);
    }

    let line = line_candidate(&pts, provenance);
    let curve = polyline_candidate(&pts, provenance);
    let line_err = one_sided_error(&pts, &line);
    let curve_err = one_sided_error(&pts, &curve);
    Ok(if line_err <= curve_err { line } else { curve })
}

/// Least-squares segment through the points, degree-elevated to cubic.
fn line_candidate(pts: &[Point3<f64>], provenance: Provenance) -> CubicBezier3 {
    let n = pts.len() as f64;
    let mean = pts.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / n;
    let mut cov = nalgebra::Matrix3::zeros();
    for p in pts {
        let d = p.coords - mean;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let max_i = (0..3)
        .max_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap())
        .unwrap();
    let dir = eig.eigenvectors.column(max_i).into_owned().normalize();
    let (mut tmin, mut tmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in pts {
        let t = (p.coords - mean).dot(&dir);
        tmin = tmin.min(t);
        tmax = tmax.max(t);
    }
    let a = Point3::from(mean + dir * tmin);
    let b = Point3::from(mean + dir * tmax);
    let mut c = CubicBezier3::line(a, b, provenance);
    c.provenance = provenance;
    c
}

/// Cubic with endpoints at the first/last cluster points and interior
/// control points at the polyline points nearest 1/3 and 2/3 of the
/// cumulative arc length.
fn polyline_candidate(pts: &[Point3<f64>], provenance: Provenance) -> CubicBezier3 {
    let mut cum = vec![0.0];
    for w in pts.windows(2) {
        cum.push(cum.last().unwrap() + (w[1] - w[0]).norm());
    }
    let total = *cum.last().unwrap();
    let nearest = |target: f64| -> Point3<f64> {
        let i = cum
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - target)
                    .abs()
                    .partial_cmp(&(b.1 - target).abs())
                    .unwrap()
            })
            .unwrap()
            .0;
        pts[i]
    };
    CubicBezier3::new(
        [
            pts[0],
            nearest(total / 3.0),
            nearest(2.0 * total / 3.0),
            *pts.last().unwrap(),
        ],
        provenance,
    )
}

/// Mean squared distance from the points to the polyline through a dense
/// sampling of a candidate, so points exactly on the candidate score zero.
fn one_sided_error(pts: &[Point3<f64>], candidate: &CubicBezier3) -> f64 {
    let dense = sample_curves(std::slice::from_ref(candidate), CANDIDATE_SAMPLES).points;
    let dist2 = |p: &Point3<f64>| -> f64 {
        dense
            .windows(2)
            .map(|w| {
                let ab = w[1] - w[0];
                let len2 = ab.norm_squared();
                let t = if len2 == 0.0 {
                    0.0
                } else {
                    ((p - w[0]).dot(&ab) / len2).clamp(0.0, 1.0)
                };
                (p - (w[0] + ab * t)).norm_squared()
            })
            .fold(f64::INFINITY, f64::min)
    };
    pts.iter().map(dist2).sum::<f64>() / pts.len() as f64
}

/// Run plain SGD on every unfrozen control point for `cfg.steps` iterations.
///
/// Noise is redrawn per step; telemetry records the noise-free loss. If the
/// last iterate happens to be worse than the starting loss, the best
/// recorded iterate is returned instead, so the final noise-free loss never
/// exceeds the initial one.
pub fn fit_stage1(
    clusters: &[Cluster],
    cloud: &SalientPointCloud,
    cfg: &FitConfig,
    transform: NormTransform,
) -> Result<(VectorGraphic3D, LossTrace)> {
    cfg.validate()?;
    if clusters.is_empty() {
        return Err(Error::param("clusters", "stage 1 needs at least one cluster"));
    }
    let curves: Vec<CubicBezier3> = clusters
        .iter()
        .map(|c| init_curves_from_cluster(c, cloud))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let (curves, trace) = sgd_loop(curves, &cloud.points, cfg, &mut rng)?;
    Ok((VectorGraphic3D::new(curves, transform), trace))
}

/// Shared SGD loop over unfrozen control points.
pub(crate) fn sgd_loop(
    mut curves: Vec<CubicBezier3>,
    pc_s: &[Point3<f64>],
    cfg: &FitConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<CubicBezier3>, LossTrace)> {
    let mut trace = LossTrace::default();
    let init_loss = evaluate_loss(&curves, pc_s, cfg.samples_per_curve, cfg.lambda)?;
    trace.entries.push((0, init_loss));
    let mut best = (init_loss, curves.clone());

    for step in 1..=cfg.steps {
        let eval = chamfer_gradient(&curves, pc_s, cfg, rng)?;
        apply_sgd_step(&mut curves, &eval.control_grads, cfg.lr);
        let loss = evaluate_loss(&curves, pc_s, cfg.samples_per_curve, cfg.lambda)?;
        trace.entries.push((step, loss));
        if loss < best.0 {
            best = (loss, curves.clone());
        }
    }

    if trace.last().unwrap_or(f64::INFINITY) > init_loss {
        curves = best.1;
    }
    Ok((curves, trace))
}

/// One clipped SGD update; frozen curves are untouched.
pub(crate) fn apply_sgd_step(
    curves: &mut [CubicBezier3],
    grads: &[[Vector3<f64>; 4]],
    lr: f64,
) {
    let total: f64 = grads
        .iter()
        .flat_map(|g| g.iter())
        .map(|v| v.norm_squared())
        .sum::<f64>()
        .sqrt();
    let scale = if total > GRAD_CLIP_NORM {
        GRAD_CLIP_NORM / total
    } else {
        1.0
    };
    for (curve, g) in curves.iter_mut().zip(grads) {
        if curve.frozen {
            continue;
        }
        for k in 0..4 {
            curve.p[k] -= g[k] * (lr * scale);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bezier::bernstein;
    use crate::fixtures;
    use rand::Rng;

    fn line_cluster(n: usize, spacing: f64) -> (Cluster, SalientPointCloud) {
        let cloud = fixtures::line_cloud(n, spacing);
        let cluster = Cluster {
            members: (0..n).collect(),
            seed: 0,
        };
        (cluster, cloud)
    }

    #[test]
    fn collinear_cluster_selects_line() {
        let (cluster, cloud) = line_cluster(30, 0.02);
        let c = init_curves_from_cluster(&cluster, &cloud).unwrap();
        assert!(c.is_line_degenerate());
        assert!((c.p[0] - Point3::origin()).norm() < 1e-6);
        assert!((c.p[3] - Point3::new(29.0 * 0.02, 0.0, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn quarter_circle_selects_curve() {
        let n = 40;
        let pts: Vec<Point3<f64>> = (0..n)
            .map(|i| {
                let a = std::f64::consts::FRAC_PI_2 * i as f64 / (n - 1) as f64;
                Point3::new(a.cos(), a.sin(), 0.0)
            })
            .collect();
        let cloud = SalientPointCloud::from_points(pts);
        let cluster = Cluster {
            members: (0..n).collect(),
            seed: 0,
        };
        let c = init_curves_from_cluster(&cluster, &cloud).unwrap();
        assert!(!c.is_line_degenerate(), "arc should pick the cubic candidate");
        // endpoints interpolate the arc ends
        assert!((c.p[0] - Point3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
        assert!((c.p[3] - Point3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn two_point_cluster_is_the_connecting_segment() {
        let cloud = SalientPointCloud::from_points(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(0.5, 0.5, 0.0),
        ]);
        let cluster = Cluster {
            members: vec![0, 1],
            seed: 0,
        };
        let c = init_curves_from_cluster(&cluster, &cloud).unwrap();
        assert!(c.is_line_degenerate());
        let ends = [c.p[0], c.p[3]];
        assert!(ends.iter().any(|e| (e - cloud.points[0]).norm() < 1e-9));
        assert!(ends.iter().any(|e| (e - cloud.points[1]).norm() < 1e-9));
    }

    #[test]
    fn identical_points_cluster_is_degenerate() {
        let cloud = SalientPointCloud::from_points(vec![Point3::new(1.0, 1.0, 1.0); 5]);
        let cluster = Cluster {
            members: (0..5).collect(),
            seed: 0,
        };
        assert!(matches!(
            init_curves_from_cluster(&cluster, &cloud),
            Err(Error::DegenerateCluster)
        ));
    }

    #[test]
    fn perfect_fit_has_zero_gradient() {
        let curve = CubicBezier3::line(
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Provenance::Stage1,
        );
        let s = 16;
        let pc_s = sample_curves(&[curve], s).points;
        let cfg = FitConfig {
            samples_per_curve: s,
            noise_sigma: 0.0,
            ..FitConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let eval = chamfer_gradient(&[curve], &pc_s, &cfg, &mut rng).unwrap();
        assert!(eval.value < 1e-30);
        for g in &eval.control_grads[0] {
            assert!(g.norm() < 1e-15);
        }
    }

    /// Central-difference oracle with frozen correspondences and a fixed
    /// noise draw, fully independent of the analytic gradient path.
    fn finite_difference_check(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut random_pt = |scale: f64| {
            Point3::new(
                rng.gen_range(-scale..scale),
                rng.gen_range(-scale..scale),
                rng.gen_range(-scale..scale),
            )
        };
        let curve = CubicBezier3::new(
            [random_pt(1.0), random_pt(1.0), random_pt(1.0), random_pt(1.0)],
            Provenance::Stage1,
        );
        let pc_s: Vec<Point3<f64>> = (0..25).map(|_| random_pt(1.2)).collect();
        let s = 12;
        let lambda = 1.3;

        let samples = sample_curves(&[curve], s);
        let mut noise_rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
        let noisy = add_noise(&samples.points, 0.01, &mut noise_rng);
        let offsets: Vec<Vector3<f64>> = noisy
            .iter()
            .zip(&samples.points)
            .map(|(n, p)| n - p)
            .collect();

        // analytic gradient at the fixed noise draw
        let (_, pg) = chamfer_value_and_point_grads(&noisy, &pc_s, lambda).unwrap();
        let analytic = route_point_grads_to_controls(&samples.back, &pg, &[curve]);

        // freeze correspondences at the current configuration
        let s_tree = crate::knn::KdTree3::build(&pc_s);
        let match_cs: Vec<usize> = noisy.iter().map(|p| s_tree.nearest(p).unwrap().0).collect();
        let c_tree = crate::knn::KdTree3::build(&noisy);
        let match_sc: Vec<usize> = pc_s.iter().map(|q| c_tree.nearest(q).unwrap().0).collect();

        let frozen_loss = |c: &CubicBezier3| -> f64 {
            let pts: Vec<Point3<f64>> = samples
                .back
                .iter()
                .zip(&offsets)
                .map(|(&(_, t), off)| c.eval(t) + off)
                .collect();
            let n = pts.len() as f64;
            let m = pc_s.len() as f64;
            let term1: f64 = pts
                .iter()
                .zip(&match_cs)
                .map(|(p, &j)| (p - pc_s[j]).norm_squared())
                .sum::<f64>()
                * lambda
                / n;
            let term2: f64 = pc_s
                .iter()
                .zip(&match_sc)
                .map(|(q, &i)| (pts[i] - q).norm_squared())
                .sum::<f64>()
                / m;
            term1 + term2
        };

        let h = 1e-5;
        for k in 0..4 {
            for axis in 0..3 {
                let mut plus = curve;
                plus.p[k][axis] += h;
                let mut minus = curve;
                minus.p[k][axis] -= h;
                let fd = (frozen_loss(&plus) - frozen_loss(&minus)) / (2.0 * h);
                let an = analytic[0][k][axis];
                let rel = (fd - an).abs() / an.abs().max(1e-8);
                assert!(rel < 1e-5, "seed {seed} P{k}[{axis}]: fd {fd} vs analytic {an}");
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..5 {
            finite_difference_check(seed);
        }
    }

    #[test]
    fn zero_steps_returns_initial_curves() {
        let (cluster, cloud) = line_cluster(40, 0.01);
        let cfg = FitConfig {
            steps: 0,
            ..FitConfig::default()
        };
        let init = init_curves_from_cluster(&cluster, &cloud).unwrap();
        let (graphic, trace) =
            fit_stage1(&[cluster], &cloud, &cfg, NormTransform::identity()).unwrap();
        assert_eq!(graphic.curves, vec![init]);
        assert_eq!(trace.entries.len(), 1);
    }

    #[test]
    fn fitting_never_worsens_noise_free_loss() {
        // a deliberately poor starting point: quarter-circle cloud
        let n = 60;
        let pts: Vec<Point3<f64>> = (0..n)
            .map(|i| {
                let a = std::f64::consts::FRAC_PI_2 * i as f64 / (n - 1) as f64;
                Point3::new(a.cos(), a.sin(), 0.0)
            })
            .collect();
        let cloud = SalientPointCloud::from_points(pts);
        let cluster = Cluster {
            members: (0..n).collect(),
            seed: 0,
        };
        let cfg = FitConfig::default();
        let (_, trace) = fit_stage1(&[cluster], &cloud, &cfg, NormTransform::identity()).unwrap();
        let init = trace.initial().unwrap();
        let last = trace.last().unwrap();
        assert!(last <= init, "loss rose from {init} to {last}");
        assert!(last < init, "expected strict improvement on this fixture");
    }

    #[test]
    fn frozen_curves_are_bit_identical_through_sgd() {
        let mut frozen = CubicBezier3::line(
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
            Provenance::Stage1,
        );
        frozen.frozen = true;
        let free = CubicBezier3::line(
            Point3::new(0.0, 0.1, 0.0),
            Point3::new(1.0, 0.1, 0.0),
            Provenance::Stage2,
        );
        let target: Vec<Point3<f64>> = (0..50)
            .map(|i| Point3::new(i as f64 / 49.0, 0.0, 0.0))
            .collect();
        let cfg = FitConfig {
            steps: 20,
            ..FitConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let before = frozen.p;
        let (after, _) = sgd_loop(vec![frozen, free], &target, &cfg, &mut rng).unwrap();
        for k in 0..4 {
            for axis in 0..3 {
                assert_eq!(
                    before[k][axis].to_bits(),
                    after[0].p[k][axis].to_bits(),
                    "frozen control point moved"
                );
            }
        }
        // and the free curve actually moved toward the target
        assert!((after[1].p[0].y).abs() < 0.1);
    }

    #[test]
    fn bernstein_weights_route_gradients() {
        // single sample at t=0.5 with unit gradient: control grads must be
        // exactly the Bernstein weights
        let curve = CubicBezier3::line(
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Provenance::Stage1,
        );
        let g = vec![Vector3::new(0.0, 1.0, 0.0)];
        let back = vec![(0usize, 0.5f64)];
        let cg = route_point_grads_to_controls(&back, &g, &[curve]);
        let w = bernstein(0.5);
        for k in 0..4 {
            assert!((cg[0][k].y - w[k]).abs() < 1e-15);
        }
    }
}
