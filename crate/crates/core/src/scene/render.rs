//! Z-buffered, flat-shaded rasterisation of cuboid scenes.
//!
//! Every cuboid becomes 12 triangles. Coverage and depth are sampled at
//! pixel centres; a pixel belongs to the surface with the smallest camera
//! depth, and exact ties keep the object drawn first.

use serde::{Deserialize, Serialize};

use super::camera::{View, NEAR_PLANE};
use super::math::{Cuboid, Vec3, SIDE_FACES};
use super::spec::{ObjectKind, SceneObject, SceneSpec};
use crate::geom::BitMask;
use crate::photometric::Image;

const NO_OWNER: u32 = u32::MAX;

/// Base RGB tones indexed by material id (modulo the table length).
const PALETTE: [[f64; 3]; 12] = [
    [214.0, 178.0, 128.0],
    [190.0, 150.0, 100.0],
    [226.0, 200.0, 160.0],
    [170.0, 175.0, 180.0],
    [205.0, 205.0, 200.0],
    [120.0, 140.0, 200.0],
    [220.0, 120.0, 80.0],
    [150.0, 200.0, 140.0],
    [235.0, 225.0, 150.0],
    [180.0, 160.0, 210.0],
    [140.0, 150.0, 130.0],
    [230.0, 230.0, 235.0],
];

/// Direction towards the light, used for flat shading.
fn light_dir() -> Vec3 {
    Vec3::new(0.3, 1.0, 0.5).normalized()
}

fn shade_factor(normal: Vec3) -> f64 {
    0.45 + 0.55 * normal.dot(light_dir()).max(0.0)
}

const WALL_FACTOR: f64 = 0.8;

pub fn material_tone(id: u32) -> [f64; 3] {
    PALETTE[id as usize % PALETTE.len()]
}

fn shade(tone: [f64; 3], factor: f64, light_intensity: f64) -> [u8; 3] {
    let k = factor * light_intensity / 10.0;
    tone.map(|c| (c * k).round().clamp(0.0, 255.0) as u8)
}

/// Depth and surface ownership per pixel. Owner tags encode
/// `object_index * 8 + face`.
#[derive(Debug, Clone)]
pub struct ZBuffer {
    pub width: u32,
    pub height: u32,
    pub depth: Vec<f64>,
    pub owner: Vec<u32>,
}

impl ZBuffer {
    pub fn new(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        Self { width, height, depth: vec![f64::INFINITY; n], owner: vec![NO_OWNER; n] }
    }

    /// `(object index, face)` visible at the pixel.
    pub fn owner_at(&self, row: u32, col: u32) -> Option<(usize, usize)> {
        let tag = self.owner[row as usize * self.width as usize + col as usize];
        (tag != NO_OWNER).then_some(((tag / 8) as usize, (tag % 8) as usize))
    }

    pub fn mask_where(&self, pred: impl Fn(usize, usize) -> bool) -> BitMask {
        let bits = self
            .owner
            .iter()
            .map(|&t| t != NO_OWNER && pred((t / 8) as usize, (t % 8) as usize))
            .collect();
        BitMask::from_bits(self.width, self.height, bits).expect("buffer dimensions")
    }

    fn draw_triangle(&mut self, view: &View, tri: [Vec3; 3], tag: u32) {
        let cam = tri.map(|p| view.to_camera(p));
        let clipped = clip_near(&cam);
        for i in 1..clipped.len().saturating_sub(1) {
            self.fill([clipped[0], clipped[i], clipped[i + 1]], view, tag);
        }
    }

    fn fill(&mut self, cam: [Vec3; 3], view: &View, tag: u32) {
        let scr = cam.map(|c| view.to_screen(c));
        let inv_z = cam.map(|c| 1.0 / c.z);
        let edge = |a: (f64, f64), b: (f64, f64), p: (f64, f64)| (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
        let area = edge(scr[0], scr[1], scr[2]);
        if area == 0.0 || !area.is_finite() {
            return;
        }
        let sign = area.signum();
        let min_u = scr.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
        let max_u = scr.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
        let min_v = scr.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
        let max_v = scr.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
        let c0 = (min_u - 0.5).ceil().max(0.0) as i64;
        let c1 = ((max_u - 0.5).floor() as i64).min(self.width as i64 - 1);
        let r0 = (min_v - 0.5).ceil().max(0.0) as i64;
        let r1 = ((max_v - 0.5).floor() as i64).min(self.height as i64 - 1);
        for row in r0..=r1 {
            let y = row as f64 + 0.5;
            for col in c0..=c1 {
                let p = (col as f64 + 0.5, y);
                let w0 = edge(scr[1], scr[2], p) * sign;
                let w1 = edge(scr[2], scr[0], p) * sign;
                let w2 = edge(scr[0], scr[1], p) * sign;
                if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                    continue;
                }
                let a = area.abs();
                let iz = (w0 * inv_z[0] + w1 * inv_z[1] + w2 * inv_z[2]) / a;
                let z = 1.0 / iz;
                let idx = row as usize * self.width as usize + col as usize;
                if z < self.depth[idx] {
                    self.depth[idx] = z;
                    self.owner[idx] = tag;
                }
            }
        }
    }

    pub fn draw_cuboid(&mut self, view: &View, cuboid: &Cuboid, object: usize) {
        for face in 0..6 {
            let [a, b, c, d] = cuboid.face_corners(face);
            let tag = (object * 8 + face) as u32;
            self.draw_triangle(view, [a, b, c], tag);
            self.draw_triangle(view, [a, c, d], tag);
        }
    }
}

/// Clip a camera-space triangle to `z >= NEAR_PLANE`.
fn clip_near(tri: &[Vec3; 3]) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(4);
    for i in 0..3 {
        let cur = tri[i];
        let next = tri[(i + 1) % 3];
        let cur_in = cur.z >= NEAR_PLANE;
        let next_in = next.z >= NEAR_PLANE;
        if cur_in {
            out.push(cur);
        }
        if cur_in != next_in {
            let t = (NEAR_PLANE - cur.z) / (next.z - cur.z);
            let mut p = cur + (next - cur) * t;
            p.z = NEAR_PLANE;
            out.push(p);
        }
    }
    out
}

/// Z-buffer of the given objects; object indices are positions in `objects`.
pub fn rasterize_objects(spec: &SceneSpec, objects: &[SceneObject]) -> ZBuffer {
    let view = spec.camera.view();
    let mut buf = ZBuffer::new(spec.camera.width, spec.camera.height);
    for (i, obj) in objects.iter().enumerate() {
        buf.draw_cuboid(&view, &obj.cuboid, i);
    }
    buf
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceKind {
    Body,
    /// Side face index (see `math::FACE_NORMALS`).
    Face(usize),
}

#[derive(Debug, Clone)]
pub struct RenderedInstance {
    pub id: u32,
    pub kind: InstanceKind,
    /// Index into the flattened pallet list (`SceneSpec::objects` order).
    pub pallet: usize,
    pub unit: usize,
    pub mask: BitMask,
}

#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub image: Image,
    /// Camera depth in metres; infinite where no cuboid is visible.
    pub depth: Vec<f32>,
    pub instances: Vec<RenderedInstance>,
}

/// Side faces whose outward normal points towards the camera.
pub fn camera_facing_sides(cuboid: &Cuboid, camera_position: Vec3) -> Vec<usize> {
    SIDE_FACES
        .iter()
        .copied()
        .filter(|&f| cuboid.face_normal(f).dot(camera_position - cuboid.face_centre(f)) > 0.0)
        .collect()
}

/// Instance list (without masks) in the order `rasterize_scene` emits it:
/// per pallet, the body followed by its camera-facing sides.
pub fn instance_layout(spec: &SceneSpec, objects: &[SceneObject]) -> Vec<(usize, InstanceKind, usize, usize)> {
    let mut out = Vec::new();
    for (index, obj) in objects.iter().enumerate() {
        if let ObjectKind::Pallet { pallet, unit, .. } = obj.kind {
            out.push((index, InstanceKind::Body, pallet, unit));
            for face in camera_facing_sides(&obj.cuboid, spec.camera.position) {
                out.push((index, InstanceKind::Face(face), pallet, unit));
            }
        }
    }
    out
}

pub fn rasterize_scene(spec: &SceneSpec) -> RenderOutput {
    let objects = spec.objects();
    let buf = rasterize_objects(spec, &objects);
    let view = spec.camera.view();
    let (w, h) = (spec.camera.width, spec.camera.height);

    let mut image = Image::new(w, h);
    let floor_tone = material_tone(spec.material_ids.floor);
    let wall_tone = material_tone(spec.material_ids.wall);
    let floor_factor = shade_factor(Vec3::new(0.0, 1.0, 0.0));
    let face_factors: Vec<[f64; 6]> = objects
        .iter()
        .map(|o| std::array::from_fn(|f| shade_factor(o.cuboid.face_normal(f))))
        .collect();
    for row in 0..h {
        for col in 0..w {
            let rgb = match buf.owner_at(row, col) {
                Some((obj, face)) => {
                    shade(material_tone(objects[obj].material), face_factors[obj][face], spec.light_intensity)
                }
                None => {
                    let dir = view.ray_direction(col as f64 + 0.5, row as f64 + 0.5);
                    if dir.y < 0.0 {
                        shade(floor_tone, floor_factor, spec.light_intensity)
                    } else {
                        shade(wall_tone, WALL_FACTOR, spec.light_intensity)
                    }
                }
            };
            image.set_pixel(row, col, rgb);
        }
    }

    let instances = instance_layout(spec, &objects)
        .into_iter()
        .enumerate()
        .map(|(i, (object, kind, pallet, unit))| {
            let mask = match kind {
                InstanceKind::Body => buf.mask_where(|o, _| o == object),
                InstanceKind::Face(face) => buf.mask_where(|o, f| o == object && f == face),
            };
            RenderedInstance { id: i as u32 + 1, kind, pallet, unit, mask }
        })
        .collect();

    RenderOutput { image, depth: buf.depth.iter().map(|&d| d as f32).collect(), instances }
}

/// Pixel counts of a pallet rendered with nothing else in the scene:
/// `(body, per-face counts)`.
pub fn unoccluded_counts(spec: &SceneSpec, cuboid: &Cuboid) -> (u64, [u64; 6]) {
    let view = spec.camera.view();
    let mut buf = ZBuffer::new(spec.camera.width, spec.camera.height);
    buf.draw_cuboid(&view, cuboid, 0);
    let mut faces = [0u64; 6];
    let mut body = 0;
    for &t in &buf.owner {
        if t != NO_OWNER {
            body += 1;
            faces[(t % 8) as usize] += 1;
        }
    }
    (body, faces)
}
