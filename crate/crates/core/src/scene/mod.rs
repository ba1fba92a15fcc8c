//! Deterministic domain-randomised warehouse scenes: sampling, pinhole
//! projection, z-buffer rendering and COCO export.

pub mod camera;
pub mod export;
pub mod math;
pub mod render;
pub mod spec;

pub use camera::{project_point, Camera, ProjectedPoint};
pub use export::{export_dataset, scene_to_annotations, DEFAULT_MIN_VISIBILITY};
pub use math::{Cuboid, Vec3};
pub use render::{rasterize_scene, InstanceKind, RenderOutput, RenderedInstance};
pub use spec::{
    generate_batch, generate_scene, MaterialIds, PalletDims, PalletUnit, Pose, RackSpec, RandomisationConfig,
    SceneSpec,
};

use std::path::Path;

use crate::coco::to_canonical_json;
use crate::error::{Error, Result};

pub const SCENES_FILE: &str = "scenes.json";

/// Serialise scene specs as JSON in declaration field order.
pub fn scenes_to_json(specs: &[SceneSpec]) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(specs)?;
    out.push(b'\n');
    Ok(out)
}

pub fn write_scenes(specs: &[SceneSpec], path: &Path) -> Result<()> {
    std::fs::write(path, scenes_to_json(specs)?).map_err(|e| Error::io(path, e))
}

pub fn read_config(path: &Path) -> Result<RandomisationConfig> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let cfg: RandomisationConfig = serde_json::from_slice(&bytes)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn config_to_json(cfg: &RandomisationConfig) -> Result<Vec<u8>> {
    to_canonical_json(cfg)
}
