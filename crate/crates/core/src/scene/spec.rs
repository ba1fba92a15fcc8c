//! Scene descriptions and their seeded randomisation.
//!
//! World frame: metres, +Y up, floor at y = 0. Floor pallets occupy a
//! 3 x 2 grid of cells in front of an optional rack; the camera orbits the
//! layout at a random azimuth.
//!
//! Draw order from the scene seed's SplitMix64 stream:
//! 1. camera: azimuth, distance, elevation
//! 2. light intensity
//! 3. pallet count
//! 4. floor-cell shuffle, then per pallet: arrangement, stack count,
//!    x jitter, z jitter, yaw
//! 5. rack (only when a pallet is racked): centre x, centre z, yaw, levels
//! 6. occluders: count, then per occluder (per attempt): position fraction,
//!    lateral offset, three extents, yaw
//! 7. materials: floor, wall, rack, one per pallet unit, one per occluder

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::camera::{Camera, NEAR_PLANE};
use super::math::{Cuboid, Vec3};
use crate::coco::Arrangement;
use crate::error::{Error, Result};
use crate::rng::{splitmix64_at, SplitMix64};

/// Horizontal radius that contains every pallet and rack member.
pub const LAYOUT_RADIUS: f64 = 4.0;
const CELL_PITCH: f64 = 1.8;
const CELL_JITTER: f64 = 0.1;
const FLOOR_CELLS: [(f64, f64); 6] = [
    (-CELL_PITCH, -CELL_PITCH),
    (0.0, -CELL_PITCH),
    (CELL_PITCH, -CELL_PITCH),
    (-CELL_PITCH, 0.0),
    (0.0, 0.0),
    (CELL_PITCH, 0.0),
];
pub const MAX_PALLET_UNITS: u32 = FLOOR_CELLS.len() as u32;
pub const MAX_STACK: u32 = 8;
const LOOK_AT: Vec3 = Vec3::new(0.0, 0.5, 0.0);
/// Clearance kept between the camera and any occluder surface.
const CAMERA_CLEARANCE: f64 = 0.25;
const OCCLUDER_RETRIES: u32 = 64;

const RACK_WIDTH: f64 = 3.0;
const RACK_DEPTH: f64 = 0.9;
const RACK_LEVEL_SPACING: f64 = 1.0;
const RACK_POST: f64 = 0.08;
const RACK_BEAM_HEIGHT: f64 = 0.1;
const RACK_BEAM_DEPTH: f64 = 0.06;
// Beams stop just short of the shelf plane and end inside the posts so no
// two surfaces are coplanar (coplanar faces make depth ties unstable).
const RACK_BEAM_GAP: f64 = 0.005;
const RACK_SLOTS: [f64; 2] = [-0.75, 0.75];
const MAX_RACK_LEVELS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PalletDims {
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

impl Default for PalletDims {
    fn default() -> Self {
        Self { length: 1.2, width: 1.0, height: 0.15 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PalletUnit {
    /// Centre of the bottom face of the lowest pallet.
    pub base_pose: Pose,
    pub arrangement: Arrangement,
    pub stack_count: u32,
    pub dims: PalletDims,
}

impl PalletUnit {
    /// One cuboid per pallet, bottom to top.
    pub fn cuboids(&self) -> Vec<Cuboid> {
        let d = self.dims;
        (0..self.stack_count)
            .map(|level| Cuboid {
                centre: Vec3::new(
                    self.base_pose.x,
                    self.base_pose.y + d.height * (level as f64 + 0.5),
                    self.base_pose.z,
                ),
                extents: Vec3::new(d.length, d.height, d.width),
                yaw: self.base_pose.yaw,
            })
            .collect()
    }
}

/// Pallet rack: two bays wide, one pallet deep, `levels` storage levels
/// (level 0 on the floor).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RackSpec {
    pub x: f64,
    pub z: f64,
    pub yaw: f64,
    pub levels: u32,
}

impl RackSpec {
    pub fn shelf_height(&self, level: u32) -> f64 {
        level as f64 * RACK_LEVEL_SPACING
    }

    pub fn capacity(&self) -> u32 {
        self.levels * RACK_SLOTS.len() as u32
    }

    fn local(&self, p: Vec3) -> Vec3 {
        p.rotate_y(self.yaw) + Vec3::new(self.x, 0.0, self.z)
    }

    /// Base pose of slot `slot` (level-major).
    pub fn slot_pose(&self, slot: u32) -> Pose {
        let level = slot / RACK_SLOTS.len() as u32;
        let side = RACK_SLOTS[(slot % RACK_SLOTS.len() as u32) as usize];
        let p = self.local(Vec3::new(side, self.shelf_height(level), 0.0));
        Pose { x: p.x, y: p.y, z: p.z, yaw: self.yaw }
    }

    /// Posts and shelf beams.
    pub fn members(&self) -> Vec<Cuboid> {
        let post_height = self.shelf_height(self.levels - 1) + RACK_LEVEL_SPACING;
        let mut out = Vec::new();
        for px in [-RACK_WIDTH / 2.0, 0.0, RACK_WIDTH / 2.0] {
            for pz in [-RACK_DEPTH / 2.0, RACK_DEPTH / 2.0] {
                out.push(Cuboid {
                    centre: self.local(Vec3::new(px, post_height / 2.0, pz)),
                    extents: Vec3::new(RACK_POST, post_height, RACK_POST),
                    yaw: self.yaw,
                });
            }
        }
        for level in 1..self.levels {
            let top = self.shelf_height(level);
            for pz in [-RACK_DEPTH / 2.0, RACK_DEPTH / 2.0] {
                out.push(Cuboid {
                    centre: self.local(Vec3::new(0.0, top - RACK_BEAM_GAP - RACK_BEAM_HEIGHT / 2.0, pz)),
                    extents: Vec3::new(RACK_WIDTH, RACK_BEAM_HEIGHT, RACK_BEAM_DEPTH),
                    yaw: self.yaw,
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialIds {
    pub floor: u32,
    pub wall: u32,
    pub rack: u32,
    pub pallets: Vec<u32>,
    pub occluders: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub camera: Camera,
    /// 0 (dark) to 10 (full brightness).
    pub light_intensity: f64,
    pub pallets: Vec<PalletUnit>,
    pub rack: Option<RackSpec>,
    pub occluders: Vec<Cuboid>,
    pub material_ids: MaterialIds,
}

/// What a renderable cuboid belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectKind {
    /// `pallet` indexes the flattened pallet list, `unit` the owning unit.
    Pallet { pallet: usize, unit: usize, level: u32 },
    Rack,
    Occluder(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneObject {
    pub cuboid: Cuboid,
    pub kind: ObjectKind,
    pub material: u32,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        self.camera.validate().map_err(Error::Config)?;
        if !(0.0..=10.0).contains(&self.light_intensity) {
            return Err(Error::Config(format!("light intensity {} outside [0, 10]", self.light_intensity)));
        }
        for (i, p) in self.pallets.iter().enumerate() {
            if p.stack_count == 0 || p.stack_count > MAX_STACK {
                return Err(Error::Config(format!("pallet {i}: stack count {} outside [1, {MAX_STACK}]", p.stack_count)));
            }
            if p.stack_count != 1 && p.arrangement != Arrangement::Stacked {
                return Err(Error::Config(format!("pallet {i}: only stacked units may have stack_count > 1")));
            }
            if p.base_pose.x.abs() > 10.0 || p.base_pose.z.abs() > 10.0 {
                return Err(Error::Config(format!("pallet {i} lies outside the 20 m floor cell")));
            }
        }
        for (i, o) in self.occluders.iter().enumerate() {
            if o.contains(self.camera.position, NEAR_PLANE) {
                return Err(Error::Config(format!("occluder {i} contains the camera")));
            }
        }
        if self.material_ids.pallets.len() != self.pallets.len()
            || self.material_ids.occluders.len() != self.occluders.len()
        {
            return Err(Error::Config("material id lists do not match object counts".into()));
        }
        Ok(())
    }

    /// Every renderable cuboid: pallets (flattened, unit-major, bottom to
    /// top), then rack members, then occluders.
    pub fn objects(&self) -> Vec<SceneObject> {
        let mut out = Vec::new();
        let mut pallet = 0;
        for (unit, p) in self.pallets.iter().enumerate() {
            for (level, cuboid) in p.cuboids().into_iter().enumerate() {
                out.push(SceneObject {
                    cuboid,
                    kind: ObjectKind::Pallet { pallet, unit, level: level as u32 },
                    material: self.material_ids.pallets[unit],
                });
                pallet += 1;
            }
        }
        if let Some(rack) = &self.rack {
            for cuboid in rack.members() {
                out.push(SceneObject { cuboid, kind: ObjectKind::Rack, material: self.material_ids.rack });
            }
        }
        for (i, cuboid) in self.occluders.iter().enumerate() {
            out.push(SceneObject { cuboid: *cuboid, kind: ObjectKind::Occluder(i), material: self.material_ids.occluders[i] });
        }
        out
    }
}

/// Inclusive `[lo, hi]` range.
pub type Range<T> = [T; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomisationConfig {
    pub pallet_count: Range<u32>,
    pub stack_count: Range<u32>,
    /// Relative weights of individual, stacked, racked.
    pub arrangement_weights: [f64; 3],
    /// Horizontal distance from the edge of the layout, metres.
    pub camera_distance: Range<f64>,
    /// Camera height above the floor, metres.
    pub camera_elevation: Range<f64>,
    pub light_intensity: Range<f64>,
    pub occluder_count: Range<u32>,
    /// Occluder edge length, metres.
    pub occluder_size: Range<f64>,
    pub material_pool: u32,
    pub pallet_dims: PalletDims,
    pub vfov: f64,
    pub image_width: u32,
    pub image_height: u32,
}

impl Default for RandomisationConfig {
    fn default() -> Self {
        Self {
            pallet_count: [1, 6],
            stack_count: [2, 5],
            arrangement_weights: [1.0, 1.0, 1.0],
            camera_distance: [2.0, 10.0],
            camera_elevation: [0.5, 3.0],
            light_intensity: [6.0, 10.0],
            occluder_count: [0, 4],
            occluder_size: [0.3, 1.5],
            material_pool: 8,
            pallet_dims: PalletDims::default(),
            vfov: 60.0,
            image_width: 320,
            image_height: 240,
        }
    }
}

fn check_range<T: PartialOrd + std::fmt::Debug>(name: &str, r: &Range<T>, lo: T, hi: T) -> Result<()> {
    if r[0] > r[1] || r[0] < lo || r[1] > hi {
        return Err(Error::Config(format!("{name} {r:?} must be a non-empty range within [{lo:?}, {hi:?}]")));
    }
    Ok(())
}

impl RandomisationConfig {
    pub fn validate(&self) -> Result<()> {
        check_range("pallet_count", &self.pallet_count, 1, MAX_PALLET_UNITS)?;
        check_range("stack_count", &self.stack_count, 1, MAX_STACK)?;
        check_range("camera_distance", &self.camera_distance, 0.0, 100.0)?;
        check_range("camera_elevation", &self.camera_elevation, 0.05, 20.0)?;
        check_range("light_intensity", &self.light_intensity, 0.0, 10.0)?;
        check_range("occluder_count", &self.occluder_count, 0, 16)?;
        check_range("occluder_size", &self.occluder_size, 0.01, 10.0)?;
        let w = &self.arrangement_weights;
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) || w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config("arrangement_weights must be non-negative with a positive sum".into()));
        }
        if self.material_pool == 0 {
            return Err(Error::Config("material_pool must be at least 1".into()));
        }
        let d = self.pallet_dims;
        if !(d.length > 0.0 && d.width > 0.0 && d.height > 0.0) {
            return Err(Error::Config("pallet dimensions must be positive".into()));
        }
        let radius = (d.length * d.length + d.width * d.width).sqrt() / 2.0 + CELL_JITTER;
        if radius > CELL_PITCH / 2.0 || d.length > 1.4 || d.width > RACK_DEPTH + 0.2 {
            return Err(Error::Config("pallet dimensions too large for the floor grid or rack".into()));
        }
        if !(10.0..=170.0).contains(&self.vfov) {
            return Err(Error::Config(format!("vfov {} outside [10, 170]", self.vfov)));
        }
        if self.image_width == 0 || self.image_height == 0 {
            return Err(Error::Config("image dimensions must be positive".into()));
        }
        Ok(())
    }
}

fn arrangement_from_index(i: usize) -> Arrangement {
    [Arrangement::Individual, Arrangement::Stacked, Arrangement::Racked][i]
}

/// Sample one scene. Pure function of `(cfg, seed)`.
pub fn generate_scene(cfg: &RandomisationConfig, seed: u64) -> Result<SceneSpec> {
    cfg.validate()?;
    let mut rng = SplitMix64::new(seed);

    let azimuth = rng.uniform(0.0, 2.0 * PI);
    let distance = LAYOUT_RADIUS + rng.uniform(cfg.camera_distance[0], cfg.camera_distance[1]);
    let elevation = rng.uniform(cfg.camera_elevation[0], cfg.camera_elevation[1]);
    let camera = Camera {
        position: Vec3::new(distance * azimuth.sin(), elevation, distance * azimuth.cos()),
        look_at: LOOK_AT,
        up: Vec3::new(0.0, 1.0, 0.0),
        vfov: cfg.vfov,
        width: cfg.image_width,
        height: cfg.image_height,
    };

    let light_intensity = rng.uniform(cfg.light_intensity[0], cfg.light_intensity[1]);
    let count = rng.range_inclusive(cfg.pallet_count[0] as u64, cfg.pallet_count[1] as u64) as usize;

    let mut cells: Vec<usize> = (0..FLOOR_CELLS.len()).collect();
    for i in (1..cells.len()).rev() {
        let j = rng.range_inclusive(0, i as u64) as usize;
        cells.swap(i, j);
    }
    let mut pallets = Vec::with_capacity(count);
    let mut next_cell = 0;
    let mut racked = Vec::new();
    for unit in 0..count {
        let arrangement = arrangement_from_index(rng.weighted_index(&cfg.arrangement_weights));
        let stack = rng.range_inclusive(cfg.stack_count[0] as u64, cfg.stack_count[1] as u64) as u32;
        let jx = rng.uniform(-CELL_JITTER, CELL_JITTER);
        let jz = rng.uniform(-CELL_JITTER, CELL_JITTER);
        let yaw = rng.uniform(-PI, PI);
        let base_pose = if arrangement == Arrangement::Racked {
            racked.push(unit);
            Pose { x: 0.0, y: 0.0, z: 0.0, yaw: 0.0 }
        } else {
            let (cx, cz) = FLOOR_CELLS[cells[next_cell]];
            next_cell += 1;
            Pose { x: cx + jx, y: 0.0, z: cz + jz, yaw }
        };
        pallets.push(PalletUnit {
            base_pose,
            arrangement,
            stack_count: if arrangement == Arrangement::Stacked { stack } else { 1 },
            dims: cfg.pallet_dims,
        });
    }

    let rack = if racked.is_empty() {
        None
    } else {
        let x = rng.uniform(-0.5, 0.5);
        let z = rng.uniform(1.9, 2.3);
        let yaw = rng.uniform(-0.2, 0.2);
        let drawn = rng.range_inclusive(2, MAX_RACK_LEVELS as u64) as u32;
        let needed = (racked.len() as u32).div_ceil(RACK_SLOTS.len() as u32);
        let rack = RackSpec { x, z, yaw, levels: drawn.max(needed) };
        for (slot, &unit) in racked.iter().enumerate() {
            pallets[unit].base_pose = rack.slot_pose(slot as u32);
        }
        Some(rack)
    };

    let occluder_count = rng.range_inclusive(cfg.occluder_count[0] as u64, cfg.occluder_count[1] as u64) as usize;
    let mut occluders = Vec::with_capacity(occluder_count);
    let ground_cam = Vec3::new(camera.position.x, 0.0, camera.position.z);
    let ground_target = Vec3::new(LOOK_AT.x, 0.0, LOOK_AT.z);
    let axis = ground_target - ground_cam;
    let lateral_dir = Vec3::new(-axis.z, 0.0, axis.x).normalized();
    for _ in 0..occluder_count {
        let mut placed = None;
        for _ in 0..OCCLUDER_RETRIES {
            let t = rng.uniform(0.25, 0.75);
            let lateral = rng.uniform(-1.5, 1.5);
            let sx = rng.uniform(cfg.occluder_size[0], cfg.occluder_size[1]);
            let sy = rng.uniform(cfg.occluder_size[0], cfg.occluder_size[1]);
            let sz = rng.uniform(cfg.occluder_size[0], cfg.occluder_size[1]);
            let yaw = rng.uniform(-PI, PI);
            let foot = ground_cam + axis * t + lateral_dir * lateral;
            let candidate = Cuboid { centre: Vec3::new(foot.x, sy / 2.0, foot.z), extents: Vec3::new(sx, sy, sz), yaw };
            if !candidate.contains(camera.position, CAMERA_CLEARANCE) {
                placed = Some(candidate);
                break;
            }
        }
        occluders.push(placed.ok_or(Error::RetryExhausted(OCCLUDER_RETRIES))?);
    }

    let pool = cfg.material_pool as u64;
    let mut material = || rng.range_inclusive(0, pool - 1) as u32;
    let floor = material();
    let wall = material();
    let rack_material = material();
    let pallet_materials = (0..pallets.len()).map(|_| material()).collect();
    let occluder_materials = (0..occluders.len()).map(|_| material()).collect();

    let spec = SceneSpec {
        seed,
        camera,
        light_intensity,
        pallets,
        rack,
        occluders,
        material_ids: MaterialIds {
            floor,
            wall,
            rack: rack_material,
            pallets: pallet_materials,
            occluders: occluder_materials,
        },
    };
    spec.validate()?;
    Ok(spec)
}

/// Scene `i` uses seed `splitmix64(master_seed)[i]`; output order is the
/// index order regardless of how work is scheduled.
pub fn generate_batch(cfg: &RandomisationConfig, count: usize, master_seed: u64) -> Result<Vec<SceneSpec>> {
    if count == 0 {
        return Err(Error::Config("scene count must be at least 1".into()));
    }
    (0..count)
        .into_par_iter()
        .map(|i| generate_scene(cfg, splitmix64_at(master_seed, i as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let cfg = RandomisationConfig::default();
        let a = serde_json::to_string(&generate_scene(&cfg, 99).unwrap()).unwrap();
        let b = serde_json::to_string(&generate_scene(&cfg, 99).unwrap()).unwrap();
        assert_eq!(a, b);
        let c = serde_json::to_string(&generate_scene(&cfg, 100).unwrap()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn degenerate_ranges() {
        let cfg = RandomisationConfig {
            pallet_count: [1, 1],
            arrangement_weights: [1.0, 0.0, 0.0],
            ..Default::default()
        };
        for seed in 0..20 {
            let s = generate_scene(&cfg, seed).unwrap();
            assert_eq!(s.pallets.len(), 1);
            assert_eq!(s.pallets[0].arrangement, Arrangement::Individual);
            assert_eq!(s.pallets[0].stack_count, 1);
            assert!(s.rack.is_none());
        }
    }

    #[test]
    fn racked_pallets_fit_in_rack() {
        let cfg = RandomisationConfig {
            pallet_count: [6, 6],
            arrangement_weights: [0.0, 0.0, 1.0],
            ..Default::default()
        };
        let s = generate_scene(&cfg, 5).unwrap();
        let rack = s.rack.as_ref().unwrap();
        assert!(rack.capacity() >= 6);
        for p in &s.pallets {
            assert!(p.base_pose.x.hypot(p.base_pose.z) < LAYOUT_RADIUS);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = RandomisationConfig { pallet_count: [3, 2], ..Default::default() };
        assert_eq!(generate_scene(&bad, 0).unwrap_err().code(), "CONFIG");
        let bad = RandomisationConfig { arrangement_weights: [0.0; 3], ..Default::default() };
        assert!(generate_scene(&bad, 0).is_err());
        let bad = RandomisationConfig { light_intensity: [5.0, 11.0], ..Default::default() };
        assert!(generate_scene(&bad, 0).is_err());
        assert!(generate_batch(&RandomisationConfig::default(), 0, 1).is_err());
    }

    #[test]
    fn occluders_never_contain_camera() {
        let cfg = RandomisationConfig { occluder_count: [4, 4], occluder_size: [1.0, 3.0], ..Default::default() };
        for seed in 0..200 {
            let s = generate_scene(&cfg, seed).unwrap();
            for o in &s.occluders {
                assert!(!o.contains(s.camera.position, 0.0));
            }
        }
    }

    #[test]
    fn batch_uses_stream_seeds() {
        let cfg = RandomisationConfig::default();
        let batch = generate_batch(&cfg, 3, 11).unwrap();
        for (i, s) in batch.iter().enumerate() {
            assert_eq!(s.seed, splitmix64_at(11, i as u64));
            assert_eq!(*s, generate_scene(&cfg, s.seed).unwrap());
        }
    }
}
