//! Orientation estimation and directional clustering of the salient cloud.
//!
//! Each point gets a unit orientation vector from a local PCA over its k
//! nearest neighbors. Clusters then grow by iterative expansion: starting
//! from a random seed, the most recently added point `p` admits its nearest
//! unassigned neighbor `q` within `d_thresh` whose local orientations agree
//! with the step. Admission requires all of
//!
//!   angle(unit(pq), v_q) < theta,
//!   angle(unit(pq), v_p) < theta,
//!   angle(v_p, v_q)      < theta,
//!
//! every test on the absolute dot product, so orientation sign never
//! matters. The two extra tests beyond the edge-direction-vs-`v_q` rule keep
//! growth from turning a sharp corner: where two perpendicular runs meet,
//! the diagonal hop between them sits near 45 degrees to both run
//! directions, which a 50-degree threshold would admit, while the
//! orientation-similarity angle at the turn is near 90 degrees and blocks
//! it. After forward growth stalls, growth restarts once from the seed in
//! the opposite direction; the stored order is the resulting polyline order.

use nalgebra::{Matrix3, Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::SalientPointCloud;
use crate::error::{Error, Result};
use crate::knn::KdTree3;

/// Covariance spectra below this are treated as rank-0 (degenerate).
const DEGENERATE_EIGENVALUE: f64 = 1e-18;
/// Relative tolerance for eigenvalue ties.
const TIE_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    /// Spatial admission threshold (normalized units).
    pub d_thresh: f64,
    /// Angular admission threshold in degrees, in (0, 90].
    pub theta_thresh_deg: f64,
    /// Neighbor count for orientation PCA.
    pub k: usize,
    /// Minimum surviving cluster size.
    pub tau: usize,
    pub rng_seed: u64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            d_thresh: 0.05,
            theta_thresh_deg: 50.0,
            k: 10,
            tau: 10,
            rng_seed: 0,
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_thresh <= 0.0 {
            return Err(Error::param("d_thresh", "must be positive"));
        }
        if !(self.theta_thresh_deg > 0.0 && self.theta_thresh_deg <= 90.0) {
            return Err(Error::param("theta_thresh", "must lie in (0, 90] degrees"));
        }
        if self.k < 3 {
            return Err(Error::param("k", "must be at least 3"));
        }
        if self.tau < 1 {
            return Err(Error::param("tau", "must be at least 1"));
        }
        Ok(())
    }
}

/// An ordered run of salient points grown from one seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    /// Member indices into the cloud, in polyline (growth) order.
    pub members: Vec<usize>,
    pub seed: usize,
}

impl Cluster {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Estimate a unit orientation per point as the principal eigenvector of the
/// covariance of the point plus its k nearest neighbors.
///
/// Eigenvalue ties resolve to the lexicographically largest unit vector of
/// the tied eigenspace; signs are canonicalized so the first component above
/// 1e-12 in magnitude is positive. Rank-0 neighborhoods get the placeholder
/// orientation (1,0,0) and a degenerate flag. If the cloud has fewer than
/// k+1 points, the neighborhood shrinks to what is available.
pub fn estimate_orientations(mut cloud: SalientPointCloud, k: usize) -> Result<SalientPointCloud> {
    if k < 3 {
        return Err(Error::param("k", "must be at least 3"));
    }
    let n = cloud.len();
    if n < 2 {
        return Err(Error::CloudTooSmall { needed: 2, got: n });
    }
    let k_eff = k.min(n - 1);
    let tree = KdTree3::build(&cloud.points);
    let mut orientations = Vec::with_capacity(n);
    let mut degenerate = Vec::with_capacity(n);
    for (i, p) in cloud.points.iter().enumerate() {
        let neighbors = tree.k_nearest(p, k_eff, Some(i));
        let mut pts: Vec<&Point3<f64>> = neighbors.iter().map(|&(j, _)| &cloud.points[j]).collect();
        pts.push(p);
        let cov = covariance(&pts);
        match principal_direction(&cov) {
            Some(v) => {
                orientations.push(v);
                degenerate.push(false);
            }
            None => {
                orientations.push(Vector3::x());
                degenerate.push(true);
            }
        }
    }
    cloud.orientations = orientations;
    cloud.degenerate = degenerate;
    Ok(cloud)
}

fn covariance(pts: &[&Point3<f64>]) -> Matrix3<f64> {
    let n = pts.len() as f64;
    let mean = pts.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / n;
    let mut cov = Matrix3::zeros();
    for p in pts {
        let d = p.coords - mean;
        cov += d * d.transpose();
    }
    cov / n
}

/// Principal eigenvector with deterministic tie-breaking, or None for a
/// rank-0 covariance.
fn principal_direction(cov: &Matrix3<f64>) -> Option<Vector3<f64>> {
    let eig = cov.symmetric_eigen();
    let max_val = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    if max_val < DEGENERATE_EIGENVALUE {
        return None;
    }
    let tol = TIE_REL_TOL * max_val;
    let tied: Vec<usize> = (0..3)
        .filter(|&i| (eig.eigenvalues[i] - max_val).abs() <= tol)
        .collect();
    let v = if tied.len() == 1 {
        eig.eigenvectors.column(tied[0]).into_owned()
    } else {
        // Lexicographically largest unit vector in the tied eigenspace: the
        // normalized projection of the first axis with nonzero projection.
        let mut proj = Matrix3::zeros();
        for &i in &tied {
            let u = eig.eigenvectors.column(i);
            proj += u * u.transpose();
        }
        let mut best = None;
        for axis in [Vector3::x(), Vector3::y(), Vector3::z()] {
            let cand = proj * axis;
            if cand.norm() > 1e-9 {
                best = Some(cand.normalize());
                break;
            }
        }
        best?
    };
    Some(canonical_sign(v.normalize()))
}

fn canonical_sign(v: Vector3<f64>) -> Vector3<f64> {
    for i in 0..3 {
        if v[i].abs() > 1e-12 {
            return if v[i] < 0.0 { -v } else { v };
        }
    }
    v
}

struct Admission {
    d_thresh: f64,
    cos_theta: f64,
}

impl Admission {
    fn new(cfg: &ClusterConfig) -> Admission {
        Admission {
            d_thresh: cfg.d_thresh,
            cos_theta: cfg.theta_thresh_deg.to_radians().cos(),
        }
    }

    fn admits(&self, cloud: &SalientPointCloud, p: usize, q: usize) -> bool {
        let d = cloud.points[q] - cloud.points[p];
        let dist = d.norm();
        if dist > self.d_thresh || dist == 0.0 {
            return false;
        }
        let dir = d / dist;
        let vp = &cloud.orientations[p];
        let vq = &cloud.orientations[q];
        dir.dot(vq).abs() > self.cos_theta
            && dir.dot(vp).abs() > self.cos_theta
            && vp.dot(vq).abs() > self.cos_theta
    }
}

/// Grow one cluster from `seed` over the points marked true in `unassigned`.
///
/// Growth is greedy: each step admits the nearest qualifying candidate of
/// the most recently added point, first forward from the seed and then once
/// more backward; members are returned in polyline order.
pub fn grow_cluster(
    cloud: &SalientPointCloud,
    seed: usize,
    unassigned: &[bool],
    cfg: &ClusterConfig,
) -> Result<Cluster> {
    cfg.validate()?;
    if !cloud.has_orientations() {
        return Err(Error::OrientationsMissing);
    }
    let tree = KdTree3::build(&cloud.points);
    Ok(grow_cluster_with_tree(cloud, &tree, seed, unassigned, cfg))
}

pub(crate) fn grow_cluster_with_tree(
    cloud: &SalientPointCloud,
    tree: &KdTree3,
    seed: usize,
    unassigned: &[bool],
    cfg: &ClusterConfig,
) -> Cluster {
    debug_assert!(unassigned[seed]);
    let adm = Admission::new(cfg);
    let mut in_cluster = vec![false; cloud.len()];
    in_cluster[seed] = true;

    let grow = |start: usize, in_cluster: &mut Vec<bool>| -> Vec<usize> {
        let mut chain = Vec::new();
        let mut p = start;
        loop {
            let candidates = tree.within(&cloud.points[p], adm.d_thresh);
            let next = candidates.iter().find(|&&(q, _)| {
                unassigned[q] && !in_cluster[q] && adm.admits(cloud, p, q)
            });
            match next {
                Some(&(q, _)) => {
                    in_cluster[q] = true;
                    chain.push(q);
                    p = q;
                }
                None => break,
            }
        }
        chain
    };

    let forward = grow(seed, &mut in_cluster);
    let backward = grow(seed, &mut in_cluster);

    let mut members: Vec<usize> = backward.into_iter().rev().collect();
    members.push(seed);
    members.extend(forward);
    Cluster { members, seed }
}

/// Partition the whole cloud: repeatedly grow a cluster from a uniformly
/// drawn unassigned seed until every point is consumed, then drop clusters
/// smaller than tau. Deterministic for a given `cfg.rng_seed`.
pub fn cluster_all(cloud: &SalientPointCloud, cfg: &ClusterConfig) -> Result<Vec<Cluster>> {
    cfg.validate()?;
    if !cloud.has_orientations() {
        return Err(Error::OrientationsMissing);
    }
    let n = cloud.len();
    let tree = KdTree3::build(&cloud.points);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut unassigned = vec![true; n];
    let mut pool: Vec<usize> = (0..n).collect();
    let mut clusters = Vec::new();
    while !pool.is_empty() {
        let seed = pool[rng.gen_range(0..pool.len())];
        let cluster = grow_cluster_with_tree(cloud, &tree, seed, &unassigned, cfg);
        for &m in &cluster.members {
            unassigned[m] = false;
        }
        pool.retain(|&i| unassigned[i]);
        clusters.push(cluster);
    }
    clusters.retain(|c| c.len() >= cfg.tau);
    Ok(clusters)
}

/// Check the published admission criteria over consecutive members of a
/// cluster: distance and the edge-direction-vs-`v_q` angle. Used by the
/// soundness replay tests.
pub fn replay_cluster(cloud: &SalientPointCloud, cluster: &Cluster, cfg: &ClusterConfig) -> bool {
    let cos_theta = cfg.theta_thresh_deg.to_radians().cos();
    cluster.members.windows(2).all(|w| {
        let (p, q) = (w[0], w[1]);
        let d = cloud.points[q] - cloud.points[p];
        let dist = d.norm();
        if dist > cfg.d_thresh || dist == 0.0 {
            return false;
        }
        (d / dist).dot(&cloud.orientations[q]).abs() > cos_theta
    })
}
