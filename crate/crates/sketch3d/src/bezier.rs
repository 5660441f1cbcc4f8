//! Cubic Bézier curves in 3D and the point clouds sampled from them.

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::mesh::NormTransform;

/// Which fitting stage produced a curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Stage1,
    Stage2,
}

/// A cubic Bézier curve with four 3D control points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicBezier3 {
    /// Control points P0..P3.
    pub p: [Point3<f64>; 4],
    /// Frozen curves are never moved by optimization.
    pub frozen: bool,
    pub provenance: Provenance,
}

/// Bernstein basis weights of degree 3 at `t`.
pub fn bernstein(t: f64) -> [f64; 4] {
    let s = 1.0 - t;
    [s * s * s, 3.0 * s * s * t, 3.0 * s * t * t, t * t * t]
}

impl CubicBezier3 {
    pub fn new(p: [Point3<f64>; 4], provenance: Provenance) -> CubicBezier3 {
        CubicBezier3 {
            p,
            frozen: false,
            provenance,
        }
    }

    /// A straight segment in degree-elevated cubic form: interior control
    /// points at 1/3 and 2/3 along the chord.
    pub fn line(a: Point3<f64>, b: Point3<f64>, provenance: Provenance) -> CubicBezier3 {
        let d = b - a;
        CubicBezier3::new([a, a + d / 3.0, a + d * (2.0 / 3.0), b], provenance)
    }

    /// Evaluate at `t` via the Bernstein form
    /// `(1-t)^3 P0 + 3(1-t)^2 t P1 + 3(1-t) t^2 P2 + t^3 P3`.
    ///
    /// Panics if `t` is outside [0, 1].
    pub fn eval(&self, t: f64) -> Point3<f64> {
        assert!((0.0..=1.0).contains(&t), "curve parameter {t} outside [0,1]");
        let w = bernstein(t);
        Point3::from(
            self.p[0].coords * w[0]
                + self.p[1].coords * w[1]
                + self.p[2].coords * w[2]
                + self.p[3].coords * w[3],
        )
    }

    /// Evaluate at `t` by de Casteljau subdivision; the independent route
    /// used to cross-check [`CubicBezier3::eval`].
    pub fn eval_de_casteljau(&self, t: f64) -> Point3<f64> {
        assert!((0.0..=1.0).contains(&t), "curve parameter {t} outside [0,1]");
        let mut q = [self.p[0].coords, self.p[1].coords, self.p[2].coords, self.p[3].coords];
        for level in (1..4).rev() {
            for i in 0..level {
                q[i] = q[i] * (1.0 - t) + q[i + 1] * t;
            }
        }
        Point3::from(q[0])
    }

    /// True if P1 and P2 lie on the chord P0-P3 at parameters 1/3 and 2/3.
    pub fn is_line_degenerate(&self) -> bool {
        let d = self.p[3] - self.p[0];
        let e1 = (self.p[1] - (self.p[0] + d / 3.0)).norm();
        let e2 = (self.p[2] - (self.p[0] + d * (2.0 / 3.0))).norm();
        e1 < 1e-9 && e2 < 1e-9
    }

    /// Polyline arc length over `segments` uniform parameter steps.
    pub fn arc_length(&self, segments: usize) -> f64 {
        let mut len = 0.0;
        let mut prev = self.eval(0.0);
        for i in 1..=segments {
            let p = self.eval(i as f64 / segments as f64);
            len += (p - prev).norm();
            prev = p;
        }
        len
    }
}

/// Point cloud sampled uniformly in parameter from a curve set, with
/// back-pointers for routing gradients to control points.
#[derive(Debug, Clone)]
pub struct CurveSamples {
    pub points: Vec<Point3<f64>>,
    /// Per sample: (curve index, parameter t).
    pub back: Vec<(usize, f64)>,
}

impl CurveSamples {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Sample `s` points per curve at `t_j = j/(s-1)`, j = 0..s-1.
pub fn sample_curves(curves: &[CubicBezier3], s: usize) -> CurveSamples {
    assert!(s >= 2, "need at least 2 samples per curve");
    let mut points = Vec::with_capacity(curves.len() * s);
    let mut back = Vec::with_capacity(curves.len() * s);
    for (ci, curve) in curves.iter().enumerate() {
        for j in 0..s {
            let t = j as f64 / (s - 1) as f64;
            points.push(curve.eval(t));
            back.push((ci, t));
        }
    }
    CurveSamples { points, back }
}

/// The full 3D vector graphic: every fitted curve plus the normalization
/// transform mapping back to source-mesh units.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorGraphic3D {
    pub curves: Vec<CubicBezier3>,
    pub transform: NormTransform,
}

impl VectorGraphic3D {
    pub fn new(curves: Vec<CubicBezier3>, transform: NormTransform) -> VectorGraphic3D {
        VectorGraphic3D { curves, transform }
    }

    pub fn curve_count(&self) -> usize {
        self.curves.len()
    }

    /// Mark every current curve frozen (done between stages).
    pub fn freeze_all(&mut self) {
        for c in &mut self.curves {
            c.frozen = true;
        }
    }
}
