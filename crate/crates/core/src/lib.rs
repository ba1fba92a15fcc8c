//! Dataset engineering and evaluation toolkit for pallet instance
//! segmentation: COCO tooling, a mask geometry kernel, brightness
//! augmentation, domain-randomised scene synthesis, mAP evaluation and
//! experiment orchestration.

pub mod cli;
pub mod coco;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod geom;
pub mod photometric;
pub mod rng;
pub mod scene;

pub use error::{Error, Result};
