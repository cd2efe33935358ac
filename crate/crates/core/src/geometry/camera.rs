use serde::{Deserialize, Serialize};

use super::{Point3, Ray};
use crate::error::{Error, Result};

/// Continuous image coordinates of a projected point plus its depth along
/// the view axis (always > 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenPoint {
    pub col: f64,
    pub row: f64,
    pub depth: f64,
}

/// Pinhole camera with square pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    position: Point3,
    look_at: Point3,
    up: Point3,
    vertical_fov: f64,
    width: u32,
    height: u32,
    #[serde(skip)]
    basis: ViewBasis,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct ViewBasis {
    right: Point3,
    up: Point3,
    forward: Point3,
    /// Focal length in pixels.
    focal: f64,
}

impl Camera {
    /// `vertical_fov` is in degrees and must lie in (0, 180).
    pub fn new(
        position: Point3,
        look_at: Point3,
        up: Point3,
        vertical_fov: f64,
        width: u32,
        height: u32,
    ) -> Result<Self> {
        if !(position.is_finite() && look_at.is_finite() && up.is_finite()) {
            return Err(Error::InvalidCamera("non-finite vector".into()));
        }
        if !(vertical_fov > 0.0 && vertical_fov < 180.0) {
            return Err(Error::InvalidCamera(format!(
                "vertical field of view {vertical_fov} outside (0, 180) degrees"
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidCamera("image size must be at least 1x1".into()));
        }
        let forward = (look_at - position)
            .normalized()
            .ok_or_else(|| Error::InvalidCamera("look_at coincides with position".into()))?;
        let up_dir = up
            .normalized()
            .ok_or_else(|| Error::InvalidCamera("zero up vector".into()))?;
        let right = forward.cross(up_dir);
        if right.norm() < 1e-9 {
            return Err(Error::InvalidCamera("up is parallel to the view direction".into()));
        }
        let right = right / right.norm();
        let true_up = right.cross(forward);
        let focal = 0.5 * height as f64 / (0.5 * vertical_fov.to_radians()).tan();
        Ok(Self {
            position,
            look_at,
            up,
            vertical_fov,
            width,
            height,
            basis: ViewBasis {
                right,
                up: true_up,
                forward,
                focal,
            },
        })
    }

    /// Rebuilds the cached view basis; use after deserializing.
    pub fn validated(self) -> Result<Self> {
        Self::new(
            self.position,
            self.look_at,
            self.up,
            self.vertical_fov,
            self.width,
            self.height,
        )
    }

    pub fn position(&self) -> Point3 {
        self.position
    }

    pub fn look_at(&self) -> Point3 {
        self.look_at
    }

    pub fn up(&self) -> Point3 {
        self.up
    }

    pub fn vertical_fov(&self) -> f64 {
        self.vertical_fov
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Focal length in pixels.
    pub fn focal_length(&self) -> f64 {
        self.basis.focal
    }

    pub fn forward(&self) -> Point3 {
        self.basis.forward
    }

    /// Same camera with a different image size (field of view kept).
    pub fn with_resolution(&self, width: u32, height: u32) -> Result<Self> {
        Self::new(
            self.position,
            self.look_at,
            self.up,
            self.vertical_fov,
            width,
            height,
        )
    }

    /// World point to camera space `(right, up, depth)` where depth is the
    /// distance along the viewing direction.
    pub fn to_view(&self, p: Point3) -> Point3 {
        let d = p - self.position;
        Point3::new(
            d.dot(self.basis.right),
            d.dot(self.basis.up),
            d.dot(self.basis.forward),
        )
    }

    /// Projects a camera-space point with positive depth to image coordinates.
    pub fn view_to_screen(&self, v: Point3) -> (f64, f64) {
        let f = self.basis.focal;
        (
            0.5 * self.width as f64 + f * v.x / v.z,
            0.5 * self.height as f64 - f * v.y / v.z,
        )
    }

    /// Perspective projection. Returns `None` for points at or behind the
    /// camera plane.
    pub fn project(&self, p: Point3) -> Option<ScreenPoint> {
        let v = self.to_view(p);
        if !(v.z > 0.0) {
            return None;
        }
        let (col, row) = self.view_to_screen(v);
        Some(ScreenPoint {
            col,
            row,
            depth: v.z,
        })
    }

    /// Ray from the pinhole through continuous image position `(col, row)`;
    /// the direction is not normalized (unit depth along the view axis).
    pub fn ray_through(&self, col: f64, row: f64) -> Ray {
        let b = &self.basis;
        let x = (col - 0.5 * self.width as f64) / b.focal;
        let y = (0.5 * self.height as f64 - row) / b.focal;
        Ray {
            origin: self.position,
            direction: b.forward + b.right * x + b.up * y,
        }
    }
}

/// Free-function form of [`Camera::project`].
pub fn project_to_screen(p: Point3, camera: &Camera) -> Option<ScreenPoint> {
    camera.project(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam(fov: f64, w: u32, h: u32) -> Camera {
        Camera::new(
            Point3::new(0.0, 0.0, 5.0),
            Point3::ORIGIN,
            Point3::new(0.0, 1.0, 0.0),
            fov,
            w,
            h,
        )
        .unwrap()
    }

    #[test]
    fn optical_axis_maps_to_image_center() {
        let c = cam(60.0, 640, 480);
        let s = c.project(Point3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!((s.col, s.row), (320.0, 240.0));
        assert!((s.depth - 4.0).abs() < 1e-15);
    }

    #[test]
    fn behind_camera_is_marker() {
        let c = cam(60.0, 64, 64);
        assert!(c.project(Point3::new(0.0, 0.0, 6.0)).is_none());
        assert!(c.project(Point3::new(1.0, 0.0, 5.0)).is_none());
    }

    #[test]
    fn forty_five_degrees_hits_border_at_ninety_fov() {
        // tan(45) = 1 = tan(fov / 2): the point lands on the right image border.
        let c = cam(90.0, 100, 100);
        let s = c.project(Point3::new(2.0, 0.0, 3.0)).unwrap();
        assert!((s.col - 100.0).abs() < 1e-12, "{s:?}");
        assert!((s.row - 50.0).abs() < 1e-12);
        let s = c.project(Point3::new(0.0, 2.0, 3.0)).unwrap();
        assert!(s.row.abs() < 1e-12, "up maps to row 0: {s:?}");
    }

    #[test]
    fn rejects_parallel_up_and_bad_fov() {
        let r = Camera::new(
            Point3::new(0.0, 0.0, 5.0),
            Point3::ORIGIN,
            Point3::new(0.0, 0.0, 1.0),
            60.0,
            8,
            8,
        );
        assert!(matches!(r, Err(Error::InvalidCamera(_))));
        let r = Camera::new(
            Point3::new(0.0, 0.0, 5.0),
            Point3::ORIGIN,
            Point3::new(0.0, 1.0, 0.0),
            180.0,
            8,
            8,
        );
        assert!(r.is_err());
    }

    #[test]
    fn ray_through_projection_passes_through_point() {
        let c = cam(50.0, 200, 100);
        let p = Point3::new(0.7, -0.3, 0.4);
        let s = c.project(p).unwrap();
        let ray = c.ray_through(s.col, s.row);
        let q = ray.origin + ray.direction * s.depth;
        assert!(q.distance(p) < 1e-12);
    }
}
