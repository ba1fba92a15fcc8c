//! Pinhole camera with a look-at parameterisation. Pixel coordinates have
//! their origin at the top-left corner, +u to the right and +v down.

use serde::{Deserialize, Serialize};

use super::math::Vec3;

/// Distance of the near clipping plane in metres.
pub const NEAR_PLANE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: Vec3,
    pub look_at: Vec3,
    #[serde(default = "default_up")]
    pub up: Vec3,
    /// Vertical field of view in degrees.
    pub vfov: f64,
    pub width: u32,
    pub height: u32,
}

fn default_up() -> Vec3 {
    Vec3::new(0.0, 1.0, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedPoint {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

/// Orthonormal camera frame.
#[derive(Debug, Clone, Copy)]
pub struct View {
    pub origin: Vec3,
    pub right: Vec3,
    pub up: Vec3,
    pub forward: Vec3,
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
}

impl View {
    pub fn to_camera(&self, p: Vec3) -> Vec3 {
        let d = p - self.origin;
        Vec3::new(d.dot(self.right), d.dot(self.up), d.dot(self.forward))
    }

    /// Screen position of a camera-space point with positive depth.
    pub fn to_screen(&self, c: Vec3) -> (f64, f64) {
        (self.cx + self.focal * c.x / c.z, self.cy - self.focal * c.y / c.z)
    }

    /// World-space ray direction through screen point `(u, v)`, scaled so
    /// that its forward component is 1 (ray parameter equals depth).
    pub fn ray_direction(&self, u: f64, v: f64) -> Vec3 {
        let dx = (u - self.cx) / self.focal;
        let dy = -(v - self.cy) / self.focal;
        self.right * dx + self.up * dy + self.forward
    }
}

impl Camera {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.position.is_finite() && self.look_at.is_finite() && self.up.is_finite()) {
            return Err("camera vectors must be finite".into());
        }
        if (self.look_at - self.position).length() == 0.0 {
            return Err("camera position equals look_at".into());
        }
        if !(10.0..=170.0).contains(&self.vfov) {
            return Err(format!("vfov {} outside [10, 170]", self.vfov));
        }
        if self.width == 0 || self.height == 0 {
            return Err("image dimensions must be positive".into());
        }
        if (self.look_at - self.position).normalized().cross(self.up).length() < 1e-9 {
            return Err("up vector is parallel to the viewing direction".into());
        }
        Ok(())
    }

    pub fn view(&self) -> View {
        let forward = (self.look_at - self.position).normalized();
        let right = self.up.cross(forward).normalized();
        let up = forward.cross(right);
        let focal = (self.height as f64 / 2.0) / (self.vfov.to_radians() / 2.0).tan();
        View {
            origin: self.position,
            right,
            up,
            forward,
            focal,
            cx: self.width as f64 / 2.0,
            cy: self.height as f64 / 2.0,
        }
    }
}

/// Project a world point; `None` when it lies behind the near plane.
pub fn project_point(cam: &Camera, p: Vec3) -> Option<ProjectedPoint> {
    let view = cam.view();
    let c = view.to_camera(p);
    if c.z < NEAR_PLANE {
        return None;
    }
    let (u, v) = view.to_screen(c);
    Some(ProjectedPoint { u, v, depth: c.z })
}
