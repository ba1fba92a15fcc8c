//! Shared test oracles and fixtures. Nothing here calls the code paths it
//! is used to check.
#![allow(dead_code)]

use std::path::Path;

use palletbench::scene::camera::NEAR_PLANE;
use palletbench::scene::spec::{SceneObject, SceneSpec};
use palletbench::scene::{Cuboid, Vec3};

/// Ray/box slab test in the box frame. Returns the first surface hit at
/// depth >= NEAR_PLANE as `(t, face)`; faces use the +x,-x,+y,-y,+z,-z order.
fn ray_box(origin: Vec3, dir: Vec3, b: &Cuboid) -> Option<(f64, usize)> {
    let o = b.to_local(origin);
    let d = dir.rotate_y(-b.yaw);
    let h = b.half();
    let (mut t_in, mut t_out) = (f64::NEG_INFINITY, f64::INFINITY);
    let (mut face_in, mut face_out) = (0usize, 0usize);
    for (axis, (oc, dc, hc)) in [(o.x, d.x, h.x), (o.y, d.y, h.y), (o.z, d.z, h.z)].into_iter().enumerate() {
        if dc == 0.0 {
            if oc.abs() > hc {
                return None;
            }
            continue;
        }
        let t1 = (-hc - oc) / dc;
        let t2 = (hc - oc) / dc;
        // Entering through the -side when moving in +direction.
        let (near, far, near_face, far_face) = if dc > 0.0 {
            (t1, t2, axis * 2 + 1, axis * 2)
        } else {
            (t2, t1, axis * 2, axis * 2 + 1)
        };
        if near > t_in {
            t_in = near;
            face_in = near_face;
        }
        if far < t_out {
            t_out = far;
            face_out = far_face;
        }
    }
    if t_in > t_out {
        return None;
    }
    if t_in >= NEAR_PLANE {
        Some((t_in, face_in))
    } else if t_out >= NEAR_PLANE {
        Some((t_out, face_out))
    } else {
        None
    }
}

/// Per-pixel `(object, face)` of the nearest surface, ties to lower index.
pub fn raycast_owners(spec: &SceneSpec, objects: &[SceneObject]) -> Vec<Option<(usize, usize)>> {
    let view = spec.camera.view();
    let (w, h) = (spec.camera.width, spec.camera.height);
    let mut out = Vec::with_capacity((w * h) as usize);
    for row in 0..h {
        for col in 0..w {
            let dir = view.ray_direction(col as f64 + 0.5, row as f64 + 0.5);
            let mut best: Option<(f64, usize, usize)> = None;
            for (i, obj) in objects.iter().enumerate() {
                if let Some((t, face)) = ray_box(spec.camera.position, dir, &obj.cuboid) {
                    if best.is_none_or(|(bt, _, _)| t < bt) {
                        best = Some((t, i, face));
                    }
                }
            }
            out.push(best.map(|(_, i, f)| (i, f)));
        }
    }
    out
}

/// Sorted `(relative path, contents)` of every file under `root`.
pub fn tree_digest(root: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(dir: &Path, root: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(&path, root, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}

/// Shoelace area (signed, counter-clockwise positive in x-right/y-up terms).
pub fn signed_area(p: &[[f64; 2]]) -> f64 {
    let n = p.len();
    (0..n).map(|i| p[i][0] * p[(i + 1) % n][1] - p[(i + 1) % n][0] * p[i][1]).sum::<f64>() / 2.0
}

/// Intersection polygon of two convex polygons by half-plane clipping.
pub fn clip_convex(subject: &[[f64; 2]], clip: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut clip = clip.to_vec();
    if signed_area(&clip) < 0.0 {
        clip.reverse();
    }
    let mut out = subject.to_vec();
    for i in 0..clip.len() {
        let (a, b) = (clip[i], clip[(i + 1) % clip.len()]);
        let side = |p: [f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        let input = std::mem::take(&mut out);
        for j in 0..input.len() {
            let (p, q) = (input[j], input[(j + 1) % input.len()]);
            let (sp, sq) = (side(p), side(q));
            if sp >= 0.0 {
                out.push(p);
            }
            if (sp >= 0.0) != (sq >= 0.0) {
                let t = sp / (sp - sq);
                out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
            }
        }
        if out.is_empty() {
            break;
        }
    }
    out
}

/// Even-odd test of the point against flat `x, y` rings.
pub fn inside_rings(x: f64, y: f64, rings: &[Vec<f64>]) -> bool {
    let mut inside = false;
    for ring in rings {
        let n = ring.len() / 2;
        for i in 0..n {
            let (x1, y1) = (ring[2 * i], ring[2 * i + 1]);
            let (x2, y2) = (ring[2 * ((i + 1) % n)], ring[2 * ((i + 1) % n) + 1]);
            if (y1 > y) != (y2 > y) && x < x1 + (y - y1) * (x2 - x1) / (y2 - y1) {
                inside = !inside;
            }
        }
    }
    inside
}

/// Row-major pixel-centre rasterisation of rings.
pub fn raster_rings(rings: &[Vec<f64>], width: u32, height: u32) -> Vec<bool> {
    let mut out = Vec::with_capacity((width * height) as usize);
    for r in 0..height {
        for c in 0..width {
            out.push(inside_rings(c as f64 + 0.5, r as f64 + 0.5, rings));
        }
    }
    out
}

pub fn rect_ring(x: f64, y: f64, w: f64, h: f64) -> Vec<f64> {
    vec![x, y, x + w, y, x + w, y + h, x, y + h]
}

/// IoU of two axis-aligned `[x, y, w, h]` rectangles.
pub fn rect_iou(a: [f64; 4], b: [f64; 4]) -> f64 {
    let iw = ((a[0] + a[2]).min(b[0] + b[2]) - a[0].max(b[0])).max(0.0);
    let ih = ((a[1] + a[3]).min(b[1] + b[3]) - a[1].max(b[1])).max(0.0);
    let inter = iw * ih;
    let union = a[2] * a[3] + b[2] * b[3] - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// 101-point interpolated AP straight from the definition: for each recall
/// level r, the best precision among ranks whose recall reaches r.
pub fn brute_force_ap(pairs: &[(f64, bool)], gt: usize) -> Option<f64> {
    if gt == 0 {
        return None;
    }
    let mut idx: Vec<usize> = (0..pairs.len()).collect();
    idx.sort_by(|&a, &b| pairs[b].0.partial_cmp(&pairs[a].0).unwrap());
    let mut points = Vec::new();
    let mut tp = 0;
    for (rank, &i) in idx.iter().enumerate() {
        tp += pairs[i].1 as usize;
        points.push((tp as f64 / gt as f64, tp as f64 / (rank + 1) as f64));
    }
    let mut total = 0.0;
    for k in 0..=100 {
        let r = k as f64 / 100.0;
        total += points.iter().filter(|p| p.0 >= r).map(|p| p.1).fold(0.0, f64::max);
    }
    Some(total / 101.0)
}
