//! Perspective projection of 3D Bézier curves to 2D rational Béziers and
//! SVG emission.
//!
//! Projecting the control points and weighting by camera-frame depth gives a
//! rational curve that traces exactly the same image as projecting the 3D
//! curve pointwise, so the SVG path is a faithful flattening of the true
//! projection rather than of a polyline in 3D.

use nalgebra::{Point2, Point3};
use serde::{Deserialize, Serialize};

use crate::bezier::{bernstein, CubicBezier3, VectorGraphic3D};
use crate::camera::Camera;
use crate::error::{Error, Result};

/// Control points with camera-frame depth below this are rejected.
pub const DEFAULT_Z_NEAR: f64 = 1e-3;
/// Flattening recursion guard.
const MAX_FLATTEN_DEPTH: u32 = 24;

/// A 2D rational cubic Bézier: the exact perspective image of a 3D cubic.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalBezier2 {
    pub q: [Point2<f64>; 4],
    /// Per-control-point weights (camera-frame depths), all positive.
    pub w: [f64; 4],
}

impl RationalBezier2 {
    /// Evaluate `sum b_k w_k q_k / sum b_k w_k` at `t`.
    pub fn eval(&self, t: f64) -> Point2<f64> {
        let b = bernstein(t);
        let mut num = nalgebra::Vector2::zeros();
        let mut den = 0.0;
        for k in 0..4 {
            num += self.q[k].coords * (b[k] * self.w[k]);
            den += b[k] * self.w[k];
        }
        Point2::from(num / den)
    }
}

/// Stroke and canvas parameters shared by every emitted view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderStyle {
    pub stroke_width: f64,
    pub stroke_color: String,
    /// In (0, 1]; uniform for all curves.
    pub opacity: f64,
    /// Square canvas side in pixels.
    pub canvas: u32,
}

impl Default for RenderStyle {
    fn default() -> Self {
        RenderStyle {
            stroke_width: 1.5,
            stroke_color: "#000000".to_string(),
            opacity: 1.0,
            canvas: 512,
        }
    }
}

impl RenderStyle {
    pub fn validate(&self) -> Result<()> {
        if self.stroke_width <= 0.0 {
            return Err(Error::param("stroke_width", "must be positive"));
        }
        if !(self.opacity > 0.0 && self.opacity <= 1.0) {
            return Err(Error::param("opacity", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// The standardized multi-view protocol: cameras at uniform azimuths on a
/// fixed-elevation orbit, all looking at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewProtocol {
    pub n_views: usize,
    pub elevation_deg: f64,
    pub radius: f64,
    /// Focal length in pixels.
    pub focal: f64,
}

impl Default for ViewProtocol {
    fn default() -> Self {
        ViewProtocol {
            n_views: 12,
            elevation_deg: 20.0,
            radius: 2.5,
            focal: 256.0,
        }
    }
}

impl ViewProtocol {
    pub fn camera(&self, view: usize, canvas: u32) -> Camera {
        let az = 360.0 * view as f64 / self.n_views as f64;
        Camera::orbit(az, self.elevation_deg, self.radius, self.focal, (canvas, canvas))
    }
}

/// Project a 3D cubic through `camera` into a rational 2D cubic in pixel
/// coordinates: `q_k = principal + f * (x_k, y_k)/z_k`, `w_k = z_k`.
/// Fails if any control point depth is at or below `z_near`.
pub fn project_curve(curve: &CubicBezier3, camera: &Camera, z_near: f64) -> Result<RationalBezier2> {
    let cam_pts: Vec<Point3<f64>> = curve.p.iter().map(|&p| camera.world_to_camera(p)).collect();
    let mut q = [Point2::origin(); 4];
    let mut w = [0.0; 4];
    let (cx, cy) = camera.principal;
    for k in 0..4 {
        let z = cam_pts[k].z;
        if z <= z_near {
            return Err(Error::NearPlane { curve: 0, z_near });
        }
        q[k] = Point2::new(
            cx + camera.focal * cam_pts[k].x / z,
            cy + camera.focal * cam_pts[k].y / z,
        );
        w[k] = z;
    }
    Ok(RationalBezier2 { q, w })
}

/// Pointwise projection of a 3D point (the oracle route used by tests).
pub fn project_point(p: Point3<f64>, camera: &Camera) -> Point2<f64> {
    let c = camera.world_to_camera(p);
    Point2::new(
        camera.principal.0 + camera.focal * c.x / c.z,
        camera.principal.1 + camera.focal * c.y / c.z,
    )
}

/// Adaptive parameter-midpoint flattening: an interval is emitted as a chord
/// once the curve's deviation from it, tested at the interval midpoint and
/// quarter points, is below `tol`. Every vertex lies exactly on the curve.
pub fn flatten_rational(curve: &RationalBezier2, tol: f64) -> Vec<Point2<f64>> {
    assert!(tol > 0.0, "flattening tolerance must be positive");
    let p0 = curve.eval(0.0);
    let p1 = curve.eval(1.0);
    let mut out = vec![p0];
    flatten_rec(curve, 0.0, 1.0, p0, p1, tol, 0, &mut out);
    out
}

fn flatten_rec(
    curve: &RationalBezier2,
    t0: f64,
    t1: f64,
    p0: Point2<f64>,
    p1: Point2<f64>,
    tol: f64,
    depth: u32,
    out: &mut Vec<Point2<f64>>,
) {
    let tm = 0.5 * (t0 + t1);
    let pm = curve.eval(tm);
    if depth >= MAX_FLATTEN_DEPTH || chord_ok(curve, t0, t1, p0, p1, tol) {
        out.push(p1);
        return;
    }
    flatten_rec(curve, t0, tm, p0, pm, tol, depth + 1, out);
    flatten_rec(curve, tm, t1, pm, p1, tol, depth + 1, out);
}

fn chord_ok(
    curve: &RationalBezier2,
    t0: f64,
    t1: f64,
    p0: Point2<f64>,
    p1: Point2<f64>,
    tol: f64,
) -> bool {
    for frac in [0.25, 0.5, 0.75] {
        let t = t0 + frac * (t1 - t0);
        if dist_to_segment(curve.eval(t), p0, p1) >= tol {
            return false;
        }
    }
    true
}

fn dist_to_segment(p: Point2<f64>, a: Point2<f64>, b: Point2<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

fn fmt(v: f64) -> String {
    format!("{v:.3}")
}

/// Emit one SVG document for the graphic as seen from `camera`. Curves
/// crossing the near plane are skipped and noted in a comment. Output bytes
/// are deterministic for identical inputs.
pub fn emit_svg(
    graphic: &VectorGraphic3D,
    camera: &Camera,
    style: &RenderStyle,
    tol: f64,
) -> Result<String> {
    style.validate()?;
    let mut paths = Vec::new();
    let mut skipped = Vec::new();
    for (i, curve) in graphic.curves.iter().enumerate() {
        match project_curve(curve, camera, DEFAULT_Z_NEAR) {
            Ok(projected) => {
                let polyline = flatten_rational(&projected, tol);
                let mut d = String::new();
                for (j, p) in polyline.iter().enumerate() {
                    let cmd = if j == 0 { "M" } else { "L" };
                    d.push_str(&format!(
                        "{}{} {},{}",
                        if j == 0 { "" } else { " " },
                        cmd,
                        fmt(p.x),
                        fmt(p.y)
                    ));
                }
                paths.push(d);
            }
            Err(Error::NearPlane { .. }) => skipped.push(i),
            Err(e) => return Err(e),
        }
    }

    let size = style.canvas;
    let mut svg = String::new();
    svg.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">\n"
    ));
    if !skipped.is_empty() {
        let list = skipped
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(",");
        svg.push_str(&format!("<!-- skipped curves crossing near plane: {list} -->\n"));
    }
    for d in &paths {
        svg.push_str(&format!(
            "<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\" stroke-opacity=\"{}\"/>\n",
            d,
            style.stroke_color,
            fmt(style.stroke_width),
            fmt(style.opacity)
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Render the standardized multi-view set (default: 12 views at 20 degrees
/// elevation, radius 2.5).
pub fn render_views(
    graphic: &VectorGraphic3D,
    protocol: &ViewProtocol,
    style: &RenderStyle,
    tol: f64,
) -> Result<Vec<String>> {
    if protocol.n_views == 0 {
        return Err(Error::param("n_views", "must be at least 1"));
    }
    (0..protocol.n_views)
        .map(|v| emit_svg(graphic, &protocol.camera(v, style.canvas), style, tol))
        .collect()
}
