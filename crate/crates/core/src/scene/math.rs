use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(self.y * o.z - self.z * o.y, self.z * o.x - self.x * o.z, self.x * o.y - self.y * o.x)
    }

    pub fn length(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        self * (1.0 / self.length())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Rotate about +Y by `yaw` radians (x towards -z for positive yaw).
    pub fn rotate_y(self, yaw: f64) -> Vec3 {
        let (s, c) = yaw.sin_cos();
        Vec3::new(c * self.x + s * self.z, self.y, -s * self.x + c * self.z)
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(v: [f64; 3]) -> Self {
        Vec3::new(v[0], v[1], v[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Box with a vertical yaw axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cuboid {
    pub centre: Vec3,
    /// Full extents along the local x, y, z axes.
    pub extents: Vec3,
    pub yaw: f64,
}

/// Local outward normals of the six faces, in face-index order:
/// +x, -x, +y (top), -y (bottom), +z, -z.
pub const FACE_NORMALS: [Vec3; 6] = [
    Vec3::new(1.0, 0.0, 0.0),
    Vec3::new(-1.0, 0.0, 0.0),
    Vec3::new(0.0, 1.0, 0.0),
    Vec3::new(0.0, -1.0, 0.0),
    Vec3::new(0.0, 0.0, 1.0),
    Vec3::new(0.0, 0.0, -1.0),
];

/// Indices of the four vertical side faces.
pub const SIDE_FACES: [usize; 4] = [0, 1, 4, 5];

impl Cuboid {
    pub fn half(&self) -> Vec3 {
        self.extents * 0.5
    }

    pub fn to_world(&self, local: Vec3) -> Vec3 {
        local.rotate_y(self.yaw) + self.centre
    }

    pub fn to_local(&self, world: Vec3) -> Vec3 {
        (world - self.centre).rotate_y(-self.yaw)
    }

    pub fn contains(&self, p: Vec3, margin: f64) -> bool {
        let l = self.to_local(p);
        let h = self.half();
        l.x.abs() <= h.x + margin && l.y.abs() <= h.y + margin && l.z.abs() <= h.z + margin
    }

    pub fn face_normal(&self, face: usize) -> Vec3 {
        FACE_NORMALS[face].rotate_y(self.yaw)
    }

    pub fn face_centre(&self, face: usize) -> Vec3 {
        let h = self.half();
        let n = FACE_NORMALS[face];
        self.to_world(Vec3::new(n.x * h.x, n.y * h.y, n.z * h.z))
    }

    /// Corners of face `face` in world space, in winding order.
    pub fn face_corners(&self, face: usize) -> [Vec3; 4] {
        let h = self.half();
        let n = FACE_NORMALS[face];
        // Two tangent axes spanning the face.
        let (a, b) = if n.x != 0.0 {
            (Vec3::new(0.0, h.y, 0.0), Vec3::new(0.0, 0.0, h.z))
        } else if n.y != 0.0 {
            (Vec3::new(h.x, 0.0, 0.0), Vec3::new(0.0, 0.0, h.z))
        } else {
            (Vec3::new(h.x, 0.0, 0.0), Vec3::new(0.0, h.y, 0.0))
        };
        let c = Vec3::new(n.x * h.x, n.y * h.y, n.z * h.z);
        [c - a - b, c + a - b, c + a + b, c - a + b].map(|p| self.to_world(p))
    }

    /// Horizontal radius of the footprint around the centre.
    pub fn footprint_radius(&self) -> f64 {
        let h = self.half();
        (h.x * h.x + h.z * h.z).sqrt()
    }
}
