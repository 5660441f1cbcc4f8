//! Pinhole camera model used for silhouette detection and rendering.

use nalgebra::{Matrix3, Point3, Vector3};

use crate::error::{Error, Result};

/// A perspective camera. The camera frame has +z along the view direction
/// and +y pointing down in the image, so projected pixel coordinates are
/// `u = cx + f*x/z`, `v = cy + f*y/z`.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub position: Point3<f64>,
    pub look_at: Point3<f64>,
    pub up: Vector3<f64>,
    /// Focal length in pixels.
    pub focal: f64,
    /// Principal point in pixels.
    pub principal: (f64, f64),
    /// Canvas size in pixels (width, height).
    pub image_size: (u32, u32),
}

impl Camera {
    pub fn new(
        position: Point3<f64>,
        look_at: Point3<f64>,
        up: Vector3<f64>,
        focal: f64,
        image_size: (u32, u32),
    ) -> Result<Camera> {
        if position == look_at {
            return Err(Error::param("camera", "position equals look_at"));
        }
        if focal <= 0.0 {
            return Err(Error::param("focal", "must be positive"));
        }
        let view = (look_at - position).normalize();
        if view.cross(&up.normalize()).norm() < 1e-9 {
            return Err(Error::param("up", "parallel to view direction"));
        }
        Ok(Camera {
            position,
            look_at,
            up,
            focal,
            principal: (image_size.0 as f64 / 2.0, image_size.1 as f64 / 2.0),
            image_size,
        })
    }

    /// Camera on a y-up orbit around the origin: `azimuth` degrees around
    /// the vertical axis, `elevation` degrees above the horizontal plane.
    pub fn orbit(azimuth_deg: f64, elevation_deg: f64, radius: f64, focal: f64, image_size: (u32, u32)) -> Camera {
        let az = azimuth_deg.to_radians();
        let el = elevation_deg.to_radians();
        let position = Point3::new(
            radius * el.cos() * az.cos(),
            radius * el.sin(),
            radius * el.cos() * az.sin(),
        );
        Camera::new(position, Point3::origin(), Vector3::y(), focal, image_size)
            .expect("orbit camera is always valid for |elevation| < 90")
    }

    /// Orthonormal camera basis (right, down, forward) as rows of a rotation.
    fn basis(&self) -> Matrix3<f64> {
        let z = (self.look_at - self.position).normalize();
        let x = z.cross(&self.up).normalize();
        let y = z.cross(&x); // completes the right-handed, y-down frame
        Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()])
    }

    /// Rigid transform into the camera frame: the camera position maps to
    /// the origin and the look direction to +z.
    pub fn world_to_camera(&self, p: Point3<f64>) -> Point3<f64> {
        Point3::from(self.basis() * (p - self.position))
    }

    /// Inverse of [`Camera::world_to_camera`].
    pub fn camera_to_world(&self, p: Point3<f64>) -> Point3<f64> {
        self.position + self.basis().transpose() * p.coords
    }

    /// True if the face is front-facing from this camera: its normal points
    /// toward the camera position.
    pub fn is_front_facing(&self, centroid: Point3<f64>, normal: &Vector3<f64>) -> bool {
        normal.dot(&(self.position - centroid)) > 0.0
    }
}
