use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coco::{Dataset, PredictedInstance, PredictionSet, Segmentation};
use crate::error::{Error, Result};
use crate::geom::rle_encode;
use crate::photometric::{load_image, mean_brightness};
use crate::rng::SplitMix64;

/// Stand-in detector: re-emits ground truth with a probability that falls
/// off as the image gets darker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockDetectorConfig {
    /// Mean grey level at or below which nothing is detected.
    pub brightness_floor: f64,
    /// Mean grey level at or above which everything is detected.
    pub brightness_ref: f64,
    pub jitter_px: u32,
    pub seed: u64,
}

impl Default for MockDetectorConfig {
    fn default() -> Self {
        Self { brightness_floor: 40.0, brightness_ref: 120.0, jitter_px: 0, seed: 0 }
    }
}

impl MockDetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.brightness_floor.partial_cmp(&self.brightness_ref) != Some(std::cmp::Ordering::Less) {
            return Err(Error::Config("mock brightness_floor must be below brightness_ref".into()));
        }
        Ok(())
    }

    /// Detection probability for an image of mean brightness `b`.
    pub fn detect_probability(&self, b: f64) -> f64 {
        ((b - self.brightness_floor) / (self.brightness_ref - self.brightness_floor)).clamp(0.0, 1.0)
    }
}

const DIRECTIONS: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// Per annotation the keyed stream `(seed, annotation id)` yields, in order:
/// the emission draw, the score draw and the jitter direction.
pub fn mock_detect(d: &Dataset, images_root: &Path, cfg: &MockDetectorConfig) -> Result<PredictionSet> {
    cfg.validate()?;
    let per_image: Vec<Vec<PredictedInstance>> = d
        .images
        .par_iter()
        .map(|img| -> Result<Vec<PredictedInstance>> {
            let pixels = load_image(&images_root.join(&img.file_name))?;
            let q = cfg.detect_probability(mean_brightness(&pixels));
            let mut out = Vec::new();
            for a in d.annotations.iter().filter(|a| a.image_id == img.id) {
                let mut rng = SplitMix64::keyed(cfg.seed, a.id);
                let u_emit = rng.next_f64();
                let u_score = rng.next_f64();
                let (dx, dy) = DIRECTIONS[(rng.next_u64() % 4) as usize];
                if u_emit >= q {
                    continue;
                }
                let segmentation = if cfg.jitter_px == 0 {
                    a.segmentation.clone()
                } else {
                    let j = cfg.jitter_px as i64;
                    let mask = a.segmentation.to_mask(img.width, img.height)?.translate(dx * j, dy * j);
                    Segmentation::Rle(rle_encode(&mask))
                };
                out.push(PredictedInstance {
                    image_id: img.id,
                    category_id: a.category_id,
                    segmentation,
                    score: q * (0.5 + 0.5 * u_score),
                    bbox: None,
                });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(PredictionSet { instances: per_image.into_iter().flatten().collect() })
}
