//! PNG image I/O and brightness-degradation augmentations.
//!
//! Darkening scales every stored 8-bit sample by `(100 - d) / 100` with
//! round-half-up integer arithmetic, so results are bit-exact everywhere.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coco::{self, Dataset};
use crate::error::{Error, Result};
use crate::rng::splitmix64_at;

/// File name of the annotation document inside a dataset directory.
pub const ANNOTATIONS_FILE: &str = "annotations.json";
pub const MANIFEST_FILE: &str = "darken_manifest.json";

/// 8-bit RGB image, row-major, interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: u32,
    height: u32,
    samples: Vec<u8>,
}

impl Image {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, samples: vec![0; width as usize * height as usize * 3] }
    }

    pub fn from_samples(width: u32, height: u32, samples: Vec<u8>) -> Result<Self> {
        if samples.len() != width as usize * height as usize * 3 {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for a {width}x{height} RGB image",
                samples.len()
            )));
        }
        Ok(Self { width, height, samples })
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let samples = rgb.iter().copied().cycle().take(width as usize * height as usize * 3).collect();
        Self { width, height, samples }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn pixel(&self, row: u32, col: u32) -> [u8; 3] {
        let i = (row as usize * self.width as usize + col as usize) * 3;
        [self.samples[i], self.samples[i + 1], self.samples[i + 2]]
    }

    pub fn set_pixel(&mut self, row: u32, col: u32, rgb: [u8; 3]) {
        let i = (row as usize * self.width as usize + col as usize) * 3;
        self.samples[i..i + 3].copy_from_slice(&rgb);
    }
}

fn image_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Image { path: path.to_path_buf(), message: message.into() }
}

/// Load an 8-bit RGB or greyscale PNG; greyscale is expanded to RGB.
pub fn load_image(path: &Path) -> Result<Image> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let decoder = png::Decoder::new(BufReader::new(file));
    let mut reader = decoder.read_info().map_err(|e| image_err(path, e.to_string()))?;
    let info = reader.info();
    if info.bit_depth != png::BitDepth::Eight {
        return Err(image_err(path, format!("unsupported bit depth {:?}", info.bit_depth)));
    }
    let color = info.color_type;
    let (width, height) = (info.width, info.height);
    let mut buf = vec![0; reader.output_buffer_size().ok_or_else(|| image_err(path, "image too large"))?];
    let frame = reader.next_frame(&mut buf).map_err(|e| image_err(path, e.to_string()))?;
    let data = &buf[..frame.buffer_size()];
    let samples = match color {
        png::ColorType::Rgb => data.to_vec(),
        png::ColorType::Grayscale => data.iter().flat_map(|&g| [g, g, g]).collect(),
        other => return Err(image_err(path, format!("unsupported colour type {other:?}"))),
    };
    Image::from_samples(width, height, samples)
}

/// Write an 8-bit RGB PNG. Output bytes depend only on the pixel data.
pub fn save_image(img: &Image, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), img.width, img.height);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header().map_err(|e| image_err(path, e.to_string()))?;
    writer.write_image_data(&img.samples).map_err(|e| image_err(path, e.to_string()))?;
    writer.finish().map_err(|e| image_err(path, e.to_string()))
}

#[inline]
pub fn darken_sample(s: u8, d: u8) -> u8 {
    ((s as u32 * (100 - d as u32) + 50) / 100) as u8
}

fn check_percent(d: i64) -> Result<u8> {
    if (0..=100).contains(&d) {
        Ok(d as u8)
    } else {
        Err(Error::DarkenRange(d))
    }
}

/// Static brightness reduction by `d` percent.
pub fn darken_static(img: &Image, d: i64) -> Result<Image> {
    let d = check_percent(d)?;
    let samples = img.samples.iter().map(|&s| darken_sample(s, d)).collect();
    Ok(Image { width: img.width, height: img.height, samples })
}

pub fn mean_brightness(img: &Image) -> f64 {
    if img.samples.is_empty() {
        return 0.0;
    }
    img.samples.iter().map(|&s| s as u64).sum::<u64>() as f64 / img.samples.len() as f64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DarkenEntry {
    pub image: String,
    pub d: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DarkenManifest {
    pub master_seed: u64,
    pub d_max: u8,
    pub entries: Vec<DarkenEntry>,
}

/// Darkening level of the image at position `index` of `images`.
pub fn random_level(master_seed: u64, d_max: u8, index: usize) -> u8 {
    (splitmix64_at(master_seed, index as u64) % (d_max as u64 + 1)) as u8
}

/// Darken each image by its own level and copy the annotation document
/// byte-for-byte. `levels[i]` applies to `images[i]`.
fn darken_dataset_with(dataset_json: &Path, images_root: &Path, levels: &[u8], out_dir: &Path) -> Result<Dataset> {
    let raw = std::fs::read(dataset_json).map_err(|e| Error::io(dataset_json, e))?;
    let dataset = coco::parse_dataset(&raw)?;
    debug_assert_eq!(levels.len(), dataset.images.len());
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    dataset
        .images
        .par_iter()
        .zip(levels.par_iter())
        .try_for_each(|(rec, &d)| -> Result<()> {
            let img = load_image(&images_root.join(&rec.file_name))?;
            save_image(&darken_static(&img, d as i64)?, &out_dir.join(&rec.file_name))
        })?;
    let out_json = out_dir.join(ANNOTATIONS_FILE);
    std::fs::write(&out_json, &raw).map_err(|e| Error::io(&out_json, e))?;
    Ok(dataset)
}

fn image_count(dataset_json: &Path) -> Result<usize> {
    Ok(coco::read_dataset(dataset_json)?.images.len())
}

/// Darken every image of a dataset by `d` percent into `out_dir`.
pub fn darken_dataset_static(dataset_json: &Path, images_root: &Path, d: i64, out_dir: &Path) -> Result<Dataset> {
    let d = check_percent(d)?;
    let n = image_count(dataset_json)?;
    darken_dataset_with(dataset_json, images_root, &vec![d; n], out_dir)
}

/// Darken image `i` by `splitmix64(master_seed)[i] mod (d_max + 1)` percent
/// and write the draws to a manifest beside the output dataset.
pub fn darken_dataset_random(
    dataset_json: &Path,
    images_root: &Path,
    d_max: i64,
    master_seed: u64,
    out_dir: &Path,
) -> Result<(Dataset, DarkenManifest)> {
    let d_max = check_percent(d_max)?;
    let dataset = coco::read_dataset(dataset_json)?;
    let levels: Vec<u8> = (0..dataset.images.len()).map(|i| random_level(master_seed, d_max, i)).collect();
    let dataset = darken_dataset_with(dataset_json, images_root, &levels, out_dir)?;
    let manifest = DarkenManifest {
        master_seed,
        d_max,
        entries: dataset
            .images
            .iter()
            .zip(&levels)
            .map(|(rec, &d)| DarkenEntry { image: rec.file_name.clone(), d })
            .collect(),
    };
    let path = out_dir.join(MANIFEST_FILE);
    std::fs::write(&path, coco::to_canonical_json(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok((dataset, manifest))
}

/// Directory that holds the images of `dataset_json` by default.
pub fn default_images_root(dataset_json: &Path) -> PathBuf {
    dataset_json.parent().map(Path::to_path_buf).unwrap_or_default()
}
