//! Geometry kernel: polygon metrics, scanline rasterisation, the COCO RLE
//! codec, IoU measures, and boundary tracing from masks back to polygons.
//!
//! Pixel `(row i, col j)` covers `[j, j+1] x [i, i+1]` and is considered
//! inside a region when its centre `(j + 0.5, i + 0.5)` is.

use serde::{Deserialize, Serialize};

use crate::coco::Segmentation;
use crate::error::{Error, Result};

/// Row-major binary mask.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BitMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, bits: vec![false; width as usize * height as usize] }
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch(format!(
                "{} bits for a {width}x{height} mask",
                bits.len()
            )));
        }
        Ok(Self { width, height, bits })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, row: u32, col: u32) -> bool {
        self.bits[row as usize * self.width as usize + col as usize]
    }

    #[inline]
    pub fn set(&mut self, row: u32, col: u32, value: bool) {
        let w = self.width as usize;
        self.bits[row as usize * w + col as usize] = value;
    }

    /// Bounds-checked read; pixels outside the mask read as unset.
    #[inline]
    pub fn get_signed(&self, row: i64, col: i64) -> bool {
        row >= 0
            && col >= 0
            && row < self.height as i64
            && col < self.width as i64
            && self.get(row as u32, col as u32)
    }

    pub fn count(&self) -> u64 {
        self.bits.iter().filter(|b| **b).count() as u64
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn same_dims(&self, other: &BitMask) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Tight pixel bounds `(min col, min row, cols, rows)`; `None` when empty.
    pub fn bbox(&self) -> Option<BBox> {
        let (mut c0, mut r0, mut c1, mut r1) = (u32::MAX, u32::MAX, 0u32, 0u32);
        let mut any = false;
        for r in 0..self.height {
            for c in 0..self.width {
                if self.get(r, c) {
                    any = true;
                    c0 = c0.min(c);
                    r0 = r0.min(r);
                    c1 = c1.max(c);
                    r1 = r1.max(r);
                }
            }
        }
        any.then(|| BBox::new(c0 as f64, r0 as f64, (c1 - c0 + 1) as f64, (r1 - r0 + 1) as f64))
    }

    /// Shift every set pixel by `(dx, dy)`; pixels leaving the frame are dropped.
    pub fn translate(&self, dx: i64, dy: i64) -> BitMask {
        let mut out = BitMask::new(self.width, self.height);
        for r in 0..self.height as i64 {
            for c in 0..self.width as i64 {
                if self.get_signed(r - dy, c - dx) {
                    out.set(r as u32, c as u32, true);
                }
            }
        }
        out
    }

    pub fn intersection_count(&self, other: &BitMask) -> u64 {
        self.bits.iter().zip(&other.bits).filter(|(a, b)| **a && **b).count() as u64
    }

    pub fn union_count(&self, other: &BitMask) -> u64 {
        self.bits.iter().zip(&other.bits).filter(|(a, b)| **a || **b).count() as u64
    }
}

/// Axis-aligned box in pixel units, serialised COCO-style as `[x, y, w, h]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }
}

impl From<[f64; 4]> for BBox {
    fn from(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

/// Closed polygon; the last vertex connects back to the first.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<[f64; 2]>,
}

impl Polygon {
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::Schema(format!("polygon needs 3 vertices, got {}", vertices.len())));
        }
        if vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Schema("polygon has a non-finite coordinate".into()));
        }
        Ok(Self { vertices })
    }

    /// Build from a COCO flat ring `x1, y1, ..., xn, yn`.
    pub fn from_flat(ring: &[f64]) -> Result<Self> {
        if !ring.len().is_multiple_of(2) {
            return Err(Error::Schema(format!("ring has odd length {}", ring.len())));
        }
        Self::new(ring.chunks_exact(2).map(|c| [c[0], c[1]]).collect())
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.vertices.iter().flat_map(|v| [v[0], v[1]]).collect()
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Polygon {
        Polygon { vertices: self.vertices.iter().map(|v| [v[0] + dx, v[1] + dy]).collect() }
    }
}

fn signed_area(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = v[i];
        let b = v[(i + 1) % n];
        acc += a[0] * b[1] - b[0] * a[1];
    }
    acc * 0.5
}

/// Shoelace area; independent of orientation.
pub fn polygon_area(p: &Polygon) -> f64 {
    signed_area(&p.vertices).abs()
}

pub fn polygon_to_bbox(p: &Polygon) -> BBox {
    let (mut x0, mut y0) = (f64::INFINITY, f64::INFINITY);
    let (mut x1, mut y1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for v in &p.vertices {
        x0 = x0.min(v[0]);
        y0 = y0.min(v[1]);
        x1 = x1.max(v[0]);
        y1 = y1.max(v[1]);
    }
    BBox::new(x0, y0, x1 - x0, y1 - y0)
}

/// Even-odd scanline fill of the union of `rings`, sampled at pixel centres.
pub fn rasterize_polygons(rings: &[Polygon], width: u32, height: u32) -> BitMask {
    let mut mask = BitMask::new(width, height);
    let edges: Vec<([f64; 2], [f64; 2])> = rings
        .iter()
        .flat_map(|p| {
            let v = &p.vertices;
            (0..v.len()).map(move |i| (v[i], v[(i + 1) % v.len()]))
        })
        .collect();
    if edges.is_empty() {
        return mask;
    }
    let y_min = edges.iter().map(|(a, b)| a[1].min(b[1])).fold(f64::INFINITY, f64::min);
    let y_max = edges.iter().map(|(a, b)| a[1].max(b[1])).fold(f64::NEG_INFINITY, f64::max);
    let row_lo = (y_min - 0.5).ceil().max(0.0) as i64;
    let row_hi = ((y_max - 0.5).floor() as i64).min(height as i64 - 1);
    let mut xs = Vec::new();
    for row in row_lo..=row_hi {
        let yc = row as f64 + 0.5;
        xs.clear();
        for (a, b) in &edges {
            if (a[1] <= yc) != (b[1] <= yc) {
                xs.push(a[0] + (yc - a[1]) * (b[0] - a[0]) / (b[1] - a[1]));
            }
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            let start = ((pair[0] - 0.5).ceil().max(0.0) as i64).min(width as i64);
            let end = ((pair[1] - 0.5).ceil().max(0.0) as i64).min(width as i64);
            for col in start..end {
                mask.set(row as u32, col as u32, true);
            }
        }
    }
    mask
}

/// COCO run-length encoding with integer counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rle {
    /// `[height, width]`
    pub size: [u32; 2],
    pub counts: Vec<u64>,
}

impl Rle {
    pub fn height(&self) -> u32 {
        self.size[0]
    }

    pub fn width(&self) -> u32 {
        self.size[1]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Number of set pixels, read from the odd-indexed runs.
    pub fn area(&self) -> u64 {
        self.counts.iter().skip(1).step_by(2).sum()
    }
}

/// Column-major runs, starting with the (possibly empty) run of zeros.
pub fn rle_encode(m: &BitMask) -> Rle {
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u64;
    for col in 0..m.width {
        for row in 0..m.height {
            let bit = m.get(row, col);
            if bit != current {
                counts.push(run);
                run = 0;
                current = bit;
            }
            run += 1;
        }
    }
    counts.push(run);
    Rle { size: [m.height, m.width], counts }
}

pub fn rle_decode(r: &Rle) -> Result<BitMask> {
    let (h, w) = (r.height(), r.width());
    let expected = h as u64 * w as u64;
    let actual = r.total();
    if actual != expected {
        return Err(Error::RleLengthMismatch { expected, actual });
    }
    let mut mask = BitMask::new(w, h);
    let mut pos = 0u64;
    let mut value = false;
    for &run in &r.counts {
        if value {
            for k in pos..pos + run {
                let col = (k / h as u64) as u32;
                let row = (k % h as u64) as u32;
                mask.set(row, col, true);
            }
        }
        pos += run;
        value = !value;
    }
    Ok(mask)
}

/// Intersection over union of two equally sized masks; 0 when both are empty.
pub fn mask_iou(a: &BitMask, b: &BitMask) -> Result<f64> {
    if !a.same_dims(b) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let union = a.union_count(b);
    if union == 0 {
        return Ok(0.0);
    }
    Ok(a.intersection_count(b) as f64 / union as f64)
}

pub fn bbox_iou(a: &BBox, b: &BBox) -> f64 {
    let iw = ((a.x + a.w).min(b.x + b.w) - a.x.max(b.x)).max(0.0);
    let ih = ((a.y + a.h).min(b.y + b.h) - a.y.max(b.y)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Materialise a segmentation as a `width x height` mask.
///
/// Polygon rings shorter than three vertices are skipped and a dangling odd
/// coordinate is ignored, so malformed input degrades rather than fails.
pub fn segmentation_mask(seg: &Segmentation, width: u32, height: u32) -> Result<BitMask> {
    match seg {
        Segmentation::Polygons(rings) => {
            let polys: Vec<Polygon> = rings
                .iter()
                .filter_map(|r| {
                    let even = &r[..r.len() - r.len() % 2];
                    Polygon::from_flat(even).ok()
                })
                .collect();
            Ok(rasterize_polygons(&polys, width, height))
        }
        Segmentation::Rle(rle) => {
            if rle.width() != width || rle.height() != height {
                return Err(Error::DimensionMismatch(format!(
                    "RLE size [{}, {}] disagrees with image {}x{}",
                    rle.height(),
                    rle.width(),
                    width,
                    height
                )));
            }
            rle_decode(rle)
        }
    }
}

pub fn instance_iou(a: &Segmentation, b: &Segmentation, width: u32, height: u32) -> Result<f64> {
    let ma = segmentation_mask(a, width, height)?;
    let mb = segmentation_mask(b, width, height)?;
    mask_iou(&ma, &mb)
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Vertices in positive (counter-clockwise in y-up terms) orientation, or
/// `NonConvex` if the turn directions disagree.
fn convex_ccw(p: &Polygon) -> Result<Vec<[f64; 2]>> {
    let mut v = p.vertices.clone();
    if signed_area(&v) < 0.0 {
        v.reverse();
    }
    let n = v.len();
    for i in 0..n {
        if cross(v[i], v[(i + 1) % n], v[(i + 2) % n]) < -1e-9 {
            return Err(Error::NonConvex);
        }
    }
    Ok(v)
}

/// Exact area of the intersection of two convex polygons
/// (Sutherland–Hodgman clipping followed by the shoelace formula).
pub fn convex_polygon_intersection_area(a: &Polygon, b: &Polygon) -> Result<f64> {
    let subject = convex_ccw(a)?;
    let clip = convex_ccw(b)?;
    let mut output = subject;
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let (c0, c1) = (clip[i], clip[(i + 1) % clip.len()]);
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let cur_in = cross(c0, c1, cur) >= 0.0;
            let prev_in = cross(c0, c1, prev) >= 0.0;
            if cur_in {
                if !prev_in {
                    output.push(line_intersection(prev, cur, c0, c1));
                }
                output.push(cur);
            } else if prev_in {
                output.push(line_intersection(prev, cur, c0, c1));
            }
        }
    }
    if output.len() < 3 {
        return Ok(0.0);
    }
    Ok(signed_area(&output).abs())
}

fn line_intersection(p: [f64; 2], q: [f64; 2], a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let dp = cross(a, b, p);
    let dq = cross(a, b, q);
    let t = dp / (dp - dq);
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

/// One outer boundary polygon per 4-connected component, with vertices on
/// integer pixel corners. Holes are not represented. With `simplify_eps > 0`
/// each outline is reduced by Ramer–Douglas–Peucker.
pub fn mask_to_polygons(m: &BitMask, simplify_eps: f64) -> Vec<Polygon> {
    let (w, h) = (m.width as usize, m.height as usize);
    let mut label = vec![0u32; w * h];
    let mut polygons = Vec::new();
    let mut next_label = 0u32;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !m.bits[start] || label[start] != 0 {
            continue;
        }
        next_label += 1;
        label[start] = next_label;
        stack.push(start);
        while let Some(p) = stack.pop() {
            let (r, c) = (p / w, p % w);
            let mut visit = |q: usize| {
                if m.bits[q] && label[q] == 0 {
                    label[q] = next_label;
                    stack.push(q);
                }
            };
            if r > 0 {
                visit(p - w);
            }
            if r + 1 < h {
                visit(p + w);
            }
            if c > 0 {
                visit(p - 1);
            }
            if c + 1 < w {
                visit(p + 1);
            }
        }
        // Row-major scan order makes `start` the top-left pixel of its component.
        let outline = trace_outline(&label, w, h, next_label, start);
        let vertices = if simplify_eps > 0.0 {
            let reduced = rdp_closed(&outline, simplify_eps);
            if reduced.len() >= 3 {
                reduced
            } else {
                outline
            }
        } else {
            outline
        };
        polygons.push(Polygon { vertices });
    }
    polygons
}

/// Walk the outer boundary with the component on the right-hand side
/// (image coordinates, y down). Turning right first keeps diagonal-only
/// contacts apart, which is what 4-connectivity requires.
fn trace_outline(label: &[u32], w: usize, h: usize, id: u32, start: usize) -> Vec<[f64; 2]> {
    const DIRS: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)]; // E S W N
    let inside = |x: i64, y: i64| -> bool {
        x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && label[y as usize * w + x as usize] == id
    };
    // Pixels ahead-left / ahead-right of vertex (x, y) when facing `d`.
    let ahead = |x: i64, y: i64, d: usize| -> (bool, bool) {
        match d {
            0 => (inside(x, y - 1), inside(x, y)),
            1 => (inside(x, y), inside(x - 1, y)),
            2 => (inside(x - 1, y), inside(x - 1, y - 1)),
            _ => (inside(x - 1, y - 1), inside(x, y - 1)),
        }
    };
    let sx = (start % w) as i64;
    let sy = (start / w) as i64;
    let (mut x, mut y, mut d) = (sx + 1, sy, 0usize);
    let mut corners = vec![[sx as f64, sy as f64]];
    loop {
        let (left, right) = ahead(x, y, d);
        let nd = if !right {
            (d + 1) % 4
        } else if left {
            (d + 3) % 4
        } else {
            d
        };
        if (x, y) == (sx, sy) {
            break;
        }
        if nd != d {
            corners.push([x as f64, y as f64]);
        }
        d = nd;
        x += DIRS[d].0;
        y += DIRS[d].1;
    }
    corners
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return ((p[0] - a[0]).powi(2) + (p[1] - a[1]).powi(2)).sqrt();
    }
    (dx * (a[1] - p[1]) - dy * (a[0] - p[0])).abs() / len2.sqrt()
}

fn rdp_open(points: &[[f64; 2]], eps: f64, out: &mut Vec<[f64; 2]>) {
    let (first, last) = (points[0], points[points.len() - 1]);
    let mut split = 0;
    let mut max_dist = 0.0;
    for (i, p) in points.iter().enumerate().take(points.len() - 1).skip(1) {
        let d = point_segment_distance(*p, first, last);
        if d > max_dist {
            max_dist = d;
            split = i;
        }
    }
    if max_dist > eps {
        rdp_open(&points[..=split], eps, out);
        out.pop();
        rdp_open(&points[split..], eps, out);
    } else {
        out.push(first);
        out.push(last);
    }
}

/// Ramer–Douglas–Peucker on a closed ring: split at the vertex farthest
/// from the first one and simplify both halves.
pub fn rdp_closed(ring: &[[f64; 2]], eps: f64) -> Vec<[f64; 2]> {
    if ring.len() <= 3 {
        return ring.to_vec();
    }
    let origin = ring[0];
    let far = (1..ring.len())
        .max_by(|&i, &j| {
            let di = (ring[i][0] - origin[0]).powi(2) + (ring[i][1] - origin[1]).powi(2);
            let dj = (ring[j][0] - origin[0]).powi(2) + (ring[j][1] - origin[1]).powi(2);
            di.total_cmp(&dj).then(j.cmp(&i))
        })
        .unwrap_or(1);
    let mut closed = ring.to_vec();
    closed.push(origin);
    let mut out = Vec::new();
    rdp_open(&closed[..=far], eps, &mut out);
    out.pop();
    rdp_open(&closed[far..], eps, &mut out);
    out.pop();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(v: &[(f64, f64)]) -> Polygon {
        Polygon::new(v.iter().map(|&(x, y)| [x, y]).collect()).unwrap()
    }

    fn unit_square() -> Polygon {
        poly(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])
    }

    #[test]
    fn shoelace_areas() {
        assert_eq!(polygon_area(&unit_square()), 1.0);
        assert_eq!(polygon_area(&poly(&[(0.0, 1.0), (1.0, 1.0), (1.0, 0.0), (0.0, 0.0)])), 1.0);
        assert_eq!(polygon_area(&poly(&[(0.0, 0.0), (4.0, 0.0), (0.0, 3.0)])), 6.0);
    }

    #[test]
    fn bounding_boxes() {
        assert_eq!(polygon_to_bbox(&unit_square()), BBox::new(0.0, 0.0, 1.0, 1.0));
        assert_eq!(
            polygon_to_bbox(&poly(&[(1.0, 2.0), (5.0, 2.0), (3.0, 7.0)])),
            BBox::new(1.0, 2.0, 4.0, 5.0)
        );
        let flat = polygon_to_bbox(&poly(&[(0.0, 0.0), (2.0, 0.0), (1.0, 0.0)]));
        assert_eq!(flat, BBox::new(0.0, 0.0, 2.0, 0.0));
    }

    #[test]
    fn polygon_rejects_short_and_non_finite() {
        assert!(Polygon::new(vec![[0.0, 0.0], [1.0, 1.0]]).is_err());
        assert!(Polygon::new(vec![[0.0, 0.0], [1.0, f64::NAN], [2.0, 0.0]]).is_err());
        assert!(Polygon::from_flat(&[0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 3.0]).is_err());
    }

    #[test]
    fn rasterise_square_matches_centre_enumeration() {
        let sq = poly(&[(0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0)]);
        let m = rasterize_polygons(std::slice::from_ref(&sq), 8, 8);
        // Brute-force: count pixel centres strictly inside the square.
        let mut expected = 0;
        for i in 0..8 {
            for j in 0..8 {
                let (x, y) = (j as f64 + 0.5, i as f64 + 0.5);
                if x > 0.0 && x < 4.0 && y > 0.0 && y < 4.0 {
                    expected += 1;
                    assert!(m.get(i, j));
                }
            }
        }
        assert_eq!(expected, 16);
        assert_eq!(m.count(), 16);
    }

    #[test]
    fn rasterise_empty_and_clipped() {
        assert!(rasterize_polygons(&[], 5, 5).is_empty());
        let outside = poly(&[(10.0, 10.0), (20.0, 10.0), (20.0, 20.0)]);
        assert!(rasterize_polygons(&[outside], 5, 5).is_empty());
        let negative = poly(&[(-10.0, -10.0), (-2.0, -10.0), (-2.0, -2.0)]);
        assert!(rasterize_polygons(&[negative], 5, 5).is_empty());
    }

    #[test]
    fn rasterise_even_odd_hole() {
        let outer = poly(&[(0.0, 0.0), (6.0, 0.0), (6.0, 6.0), (0.0, 6.0)]);
        let inner = poly(&[(2.0, 2.0), (4.0, 2.0), (4.0, 4.0), (2.0, 4.0)]);
        let m = rasterize_polygons(&[outer, inner], 6, 6);
        assert_eq!(m.count(), 32);
        assert!(!m.get(2, 2));
    }

    #[test]
    fn rle_reference_vectors() {
        let ones = BitMask::from_bits(3, 3, vec![true; 9]).unwrap();
        assert_eq!(rle_encode(&ones).counts, vec![0, 9]);
        assert_eq!(rle_encode(&BitMask::new(3, 3)).counts, vec![9]);
        let mut one = BitMask::new(2, 2);
        one.set(0, 0, true);
        assert_eq!(rle_encode(&one).counts, vec![0, 1, 3]);
        // Column-major: (row 1, col 0) is the second pixel.
        let mut second = BitMask::new(2, 2);
        second.set(1, 0, true);
        assert_eq!(rle_encode(&second).counts, vec![1, 1, 2]);
    }

    #[test]
    fn rle_decode_cases() {
        let zero = rle_decode(&Rle { size: [3, 3], counts: vec![9] }).unwrap();
        assert!(zero.is_empty());
        let full = rle_decode(&Rle { size: [3, 3], counts: vec![0, 9] }).unwrap();
        assert_eq!(full.count(), 9);
        let err = rle_decode(&Rle { size: [3, 3], counts: vec![4, 4] }).unwrap_err();
        assert_eq!(err.code(), "RLE_LENGTH_MISMATCH");
    }

    #[test]
    fn mask_iou_cases() {
        let mut a = BitMask::new(30, 10);
        let mut b = BitMask::new(30, 10);
        for r in 0..10 {
            for c in 0..10 {
                a.set(r, c, true);
                b.set(r, c + 5, true);
            }
        }
        assert_eq!(mask_iou(&a, &a).unwrap(), 1.0);
        assert!((mask_iou(&a, &b).unwrap() - 50.0 / 150.0).abs() < 1e-12);
        assert_eq!(mask_iou(&a, &b.translate(20, 0)).unwrap(), 0.0);
        assert_eq!(mask_iou(&BitMask::new(4, 4), &BitMask::new(4, 4)).unwrap(), 0.0);
        assert!(mask_iou(&a, &BitMask::new(4, 4)).is_err());
    }

    #[test]
    fn bbox_iou_cases() {
        let a = BBox::new(0.0, 0.0, 2.0, 2.0);
        assert_eq!(bbox_iou(&a, &a), 1.0);
        assert_eq!(bbox_iou(&a, &BBox::new(2.0, 0.0, 2.0, 2.0)), 0.0);
        assert!((bbox_iou(&a, &BBox::new(1.0, 0.0, 2.0, 2.0)) - 1.0 / 3.0).abs() < 1e-12);
        let z = BBox::new(1.0, 1.0, 0.0, 0.0);
        assert_eq!(bbox_iou(&z, &z), 0.0);
    }

    #[test]
    fn instance_iou_representation_invariance() {
        let tri = poly(&[(2.0, 1.0), (14.0, 3.0), (6.0, 12.0)]);
        let mask = rasterize_polygons(std::slice::from_ref(&tri), 16, 16);
        let as_poly = Segmentation::Polygons(vec![tri.to_flat()]);
        let as_rle = Segmentation::Rle(rle_encode(&mask));
        assert_eq!(instance_iou(&as_poly, &as_rle, 16, 16).unwrap(), 1.0);
        let empty = Segmentation::Polygons(vec![]);
        assert_eq!(instance_iou(&as_poly, &empty, 16, 16).unwrap(), 0.0);
        assert!(instance_iou(&as_rle, &as_poly, 8, 16).is_err());
    }

    #[test]
    fn convex_clipping_cases() {
        let sq = unit_square();
        assert!((convex_polygon_intersection_area(&sq, &sq).unwrap() - 1.0).abs() < 1e-12);
        let far = sq.translate(5.0, 0.0);
        assert_eq!(convex_polygon_intersection_area(&sq, &far).unwrap(), 0.0);
        let half = sq.translate(0.5, 0.0);
        assert!((convex_polygon_intersection_area(&sq, &half).unwrap() - 0.5).abs() < 1e-12);
        let dart = poly(&[(0.0, 0.0), (4.0, 0.0), (1.0, 1.0), (0.0, 4.0)]);
        assert_eq!(convex_polygon_intersection_area(&dart, &sq).unwrap_err().code(), "NON_CONVEX");
    }

    #[test]
    fn outline_of_two_by_two_block() {
        let mut m = BitMask::new(5, 5);
        for r in 0..2 {
            for c in 0..2 {
                m.set(r, c, true);
            }
        }
        let polys = mask_to_polygons(&m, 0.0);
        assert_eq!(polys.len(), 1);
        assert_eq!(polys[0].vertices(), &[[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]]);
        assert_eq!(polygon_area(&polys[0]), 4.0);
        assert_eq!(rasterize_polygons(&polys, 5, 5), m);
    }

    #[test]
    fn outline_component_counts() {
        assert!(mask_to_polygons(&BitMask::new(4, 4), 0.0).is_empty());
        let mut m = BitMask::new(10, 4);
        m.set(1, 1, true);
        m.set(1, 2, true);
        m.set(2, 7, true);
        assert_eq!(mask_to_polygons(&m, 0.0).len(), 2);
        // Diagonal contact only: two 4-connected components.
        let mut d = BitMask::new(3, 3);
        d.set(0, 0, true);
        d.set(1, 1, true);
        let polys = mask_to_polygons(&d, 0.0);
        assert_eq!(polys.len(), 2);
        assert_eq!(rasterize_polygons(&polys, 3, 3), d);
    }

    #[test]
    fn outline_with_diagonal_pinch_reproduces_mask() {
        // A U-shape whose arms touch a block diagonally.
        let rows = ["#####", "#...#", "#.#.#", "##.##", "#####"];
        let mut m = BitMask::new(5, 5);
        for (r, line) in rows.iter().enumerate() {
            for (c, ch) in line.chars().enumerate() {
                m.set(r as u32, c as u32, ch == '#');
            }
        }
        let polys = mask_to_polygons(&m, 0.0);
        // (2,2) only touches the frame diagonally, so it is its own component.
        assert_eq!(polys.len(), 2);
        let filled = rasterize_polygons(&polys[..1], 5, 5);
        assert!(filled.count() >= 20);
    }

    #[test]
    fn simplification_keeps_rectangle_corners() {
        let mut m = BitMask::new(20, 20);
        for r in 3..15 {
            for c in 2..18 {
                m.set(r, c, true);
            }
        }
        let polys = mask_to_polygons(&m, 0.5);
        assert_eq!(polys[0].vertices().len(), 4);
        assert_eq!(polygon_area(&polys[0]), 12.0 * 16.0);
    }

    #[test]
    fn translation_invariance_of_ious() {
        let a = BBox::new(1.0, 2.0, 5.0, 4.0);
        let b = BBox::new(3.0, 1.0, 4.0, 6.0);
        let shift = |bb: BBox| BBox::new(bb.x + 3.0, bb.y + 2.0, bb.w, bb.h);
        assert!((bbox_iou(&a, &b) - bbox_iou(&shift(a), &shift(b))).abs() < 1e-12);
    }
}
