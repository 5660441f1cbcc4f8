//! Chamfer distance between point clouds, Gaussian augmentation, and the
//! gradients that drive curve fitting.
//!
//! The loss over a curve-sample cloud `C` and the salient cloud `S` is
//!
//!   L = lambda/|C| * sum_{p in C} min_{q in S} |p-q|^2
//!     +      1/|S| * sum_{q in S} min_{p in C} |p-q|^2
//!
//! Nearest neighbors are exact. Gradients treat the correspondences as
//! constant at their current values (the standard subgradient of a min) and
//! the noise draw as a constant offset.

use nalgebra::{Point3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::bezier::{bernstein, CubicBezier3};
use crate::error::{Error, Result};
use crate::knn::KdTree3;

/// Exact symmetric Chamfer loss with balance weight `lambda` on the
/// curve-to-cloud term.
pub fn chamfer_loss(pc_c: &[Point3<f64>], pc_s: &[Point3<f64>], lambda: f64) -> Result<f64> {
    Ok(chamfer_value_and_point_grads(pc_c, pc_s, lambda)?.0)
}

/// Chamfer loss plus its gradient with respect to every point of `pc_c`,
/// holding nearest-neighbor correspondences fixed.
pub fn chamfer_value_and_point_grads(
    pc_c: &[Point3<f64>],
    pc_s: &[Point3<f64>],
    lambda: f64,
) -> Result<(f64, Vec<Vector3<f64>>)> {
    if pc_c.is_empty() || pc_s.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let n = pc_c.len() as f64;
    let m = pc_s.len() as f64;
    let tree_s = KdTree3::build(pc_s);
    let tree_c = KdTree3::build(pc_c);

    let mut value = 0.0;
    let mut grads = vec![Vector3::zeros(); pc_c.len()];

    for (i, p) in pc_c.iter().enumerate() {
        let (j, d2) = tree_s.nearest(p).expect("pc_s non-empty");
        value += lambda / n * d2;
        grads[i] += (p - pc_s[j]) * (2.0 * lambda / n);
    }
    for q in pc_s.iter() {
        let (i, d2) = tree_c.nearest(q).expect("pc_c non-empty");
        value += d2 / m;
        grads[i] += (pc_c[i] - q) * (2.0 / m);
    }
    Ok((value, grads))
}

/// Independent zero-mean Gaussian offset per coordinate. `sigma == 0`
/// returns the input unchanged (and consumes no randomness).
pub fn add_noise(points: &[Point3<f64>], sigma: f64, rng: &mut impl Rng) -> Vec<Point3<f64>> {
    assert!(sigma >= 0.0, "noise sigma must be non-negative");
    if sigma == 0.0 {
        return points.to_vec();
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    points
        .iter()
        .map(|p| {
            Point3::new(
                p.x + normal.sample(rng),
                p.y + normal.sample(rng),
                p.z + normal.sample(rng),
            )
        })
        .collect()
}

/// Chain per-sample-point gradients back to control points through the
/// Bernstein weights: d(sample at t)/d(P_k) = b_k(t) * I. Frozen curves get
/// exactly zero.
pub fn route_point_grads_to_controls(
    back: &[(usize, f64)],
    point_grads: &[Vector3<f64>],
    curves: &[CubicBezier3],
) -> Vec<[Vector3<f64>; 4]> {
    assert_eq!(back.len(), point_grads.len());
    let mut out = vec![[Vector3::zeros(); 4]; curves.len()];
    for (&(ci, t), g) in back.iter().zip(point_grads) {
        if curves[ci].frozen {
            continue;
        }
        let w = bernstein(t);
        for k in 0..4 {
            out[ci][k] += g * w[k];
        }
    }
    out
}
