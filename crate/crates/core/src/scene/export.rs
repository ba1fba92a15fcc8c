use std::path::Path;

use rayon::prelude::*;

use super::render::{rasterize_scene, unoccluded_counts, InstanceKind, RenderOutput};
use super::spec::{ObjectKind, SceneSpec};
use crate::coco::{self, Annotation, Dataset, Extra, ImageRecord, Segmentation};
use crate::error::{Error, Result};
use crate::geom::rle_encode;
use crate::photometric::{save_image, ANNOTATIONS_FILE};

/// Default fraction of an instance that must be visible for it to be labelled.
pub const DEFAULT_MIN_VISIBILITY: f64 = 0.05;

pub const BODY_CATEGORY_ID: u64 = 1;
pub const FACE_CATEGORY_ID: u64 = 2;

pub fn image_file_name(index: usize) -> String {
    format!("images/{index:06}.png")
}

/// Annotations for one rendered scene. An instance is kept when it has at
/// least one visible pixel and `visible / unoccluded >= min_visibility`,
/// where `unoccluded` counts the instance's pixels with the pallet rendered
/// alone. Annotation ids start at `first_annotation_id`.
pub fn scene_to_annotations(
    spec: &SceneSpec,
    render: &RenderOutput,
    min_visibility: f64,
    image: ImageRecord,
    first_annotation_id: u64,
) -> (ImageRecord, Vec<Annotation>) {
    let objects = spec.objects();
    let pallet_cuboids: Vec<_> = objects
        .iter()
        .filter_map(|o| match o.kind {
            ObjectKind::Pallet { .. } => Some(o.cuboid),
            _ => None,
        })
        .collect();
    let mut cache: Vec<Option<(u64, [u64; 6])>> = vec![None; pallet_cuboids.len()];
    let mut annotations = Vec::new();
    for inst in &render.instances {
        let visible = inst.mask.count();
        if visible == 0 {
            continue;
        }
        let (body, faces) =
            *cache[inst.pallet].get_or_insert_with(|| unoccluded_counts(spec, &pallet_cuboids[inst.pallet]));
        let (unoccluded, category_id) = match inst.kind {
            InstanceKind::Body => (body, BODY_CATEGORY_ID),
            InstanceKind::Face(f) => (faces[f], FACE_CATEGORY_ID),
        };
        if unoccluded == 0 || (visible as f64) < min_visibility * unoccluded as f64 {
            continue;
        }
        let bbox = inst.mask.bbox().expect("non-empty mask");
        annotations.push(Annotation {
            id: first_annotation_id + annotations.len() as u64,
            image_id: image.id,
            category_id,
            segmentation: Segmentation::Rle(rle_encode(&inst.mask)),
            bbox,
            area: visible as f64,
            iscrowd: Some(0),
            arrangement: spec.pallets[inst.unit].arrangement,
            extra: Extra::new(),
        });
    }
    (image, annotations)
}

/// Render every scene, write `images/NNNNNN.png` and `annotations.json`
/// under `out_dir`, and return the dataset.
pub fn export_dataset(specs: &[SceneSpec], out_dir: &Path, min_visibility: f64) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&min_visibility) {
        return Err(Error::Config(format!("min_visibility {min_visibility} outside [0, 1]")));
    }
    std::fs::create_dir_all(out_dir.join("images")).map_err(|e| Error::io(out_dir, e))?;
    let per_scene: Vec<(ImageRecord, Vec<Annotation>)> = specs
        .par_iter()
        .enumerate()
        .map(|(i, spec)| -> Result<_> {
            spec.validate()?;
            let render = rasterize_scene(spec);
            let file_name = image_file_name(i);
            save_image(&render.image, &out_dir.join(&file_name))?;
            let record = ImageRecord {
                id: i as u64 + 1,
                file_name,
                width: spec.camera.width,
                height: spec.camera.height,
                extra: Extra::new(),
            };
            Ok(scene_to_annotations(spec, &render, min_visibility, record, 1))
        })
        .collect::<Result<_>>()?;

    let mut dataset = Dataset { categories: Dataset::pallet_categories(), ..Dataset::default() };
    for (image, annotations) in per_scene {
        dataset.images.push(image);
        for mut a in annotations {
            a.id = dataset.annotations.len() as u64 + 1;
            dataset.annotations.push(a);
        }
    }
    coco::write_dataset(&dataset, &out_dir.join(ANNOTATIONS_FILE))?;
    Ok(dataset)
}
