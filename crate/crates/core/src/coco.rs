//! COCO-JSON subset: dataset and prediction data model, deterministic
//! serialisation, defect linting, and dataset merging.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geom::{self, BBox, Polygon, Rle};

pub const BODY_CATEGORY: &str = "pallet_body";
pub const FACE_CATEGORY: &str = "pallet_face";

/// Unknown keys preserved verbatim for round-trips.
pub type Extra = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: u64,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRecord {
    pub id: u64,
    pub name: String,
    #[serde(default)]
    pub supercategory: String,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arrangement {
    Individual,
    Stacked,
    Racked,
    #[default]
    Unspecified,
}

impl Arrangement {
    pub const ALL: [Arrangement; 4] =
        [Arrangement::Individual, Arrangement::Stacked, Arrangement::Racked, Arrangement::Unspecified];

    pub fn as_str(self) -> &'static str {
        match self {
            Arrangement::Individual => "individual",
            Arrangement::Stacked => "stacked",
            Arrangement::Racked => "racked",
            Arrangement::Unspecified => "unspecified",
        }
    }
}

impl fmt::Display for Arrangement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Instance region: polygon rings (flat `x, y` lists) or an integer-count RLE.
#[derive(Debug, Clone, PartialEq)]
pub enum Segmentation {
    Polygons(Vec<Vec<f64>>),
    Rle(Rle),
}

impl Segmentation {
    pub fn to_mask(&self, width: u32, height: u32) -> Result<geom::BitMask> {
        geom::segmentation_mask(self, width, height)
    }

    /// Bounding box of the region; polygons use their vertex extent, RLE
    /// uses the pixel extent.
    pub fn bbox(&self) -> Result<BBox> {
        match self {
            Segmentation::Polygons(rings) => {
                let coords: Vec<[f64; 2]> = rings
                    .iter()
                    .flat_map(|r| r.chunks_exact(2).map(|c| [c[0], c[1]]))
                    .collect();
                if coords.is_empty() {
                    return Ok(BBox::new(0.0, 0.0, 0.0, 0.0));
                }
                let mut padded = coords;
                while padded.len() < 3 {
                    padded.push(padded[0]);
                }
                Ok(geom::polygon_to_bbox(&Polygon::new(padded)?))
            }
            Segmentation::Rle(rle) => Ok(geom::rle_decode(rle)?.bbox().unwrap_or(BBox::new(0.0, 0.0, 0.0, 0.0))),
        }
    }
}

impl Serialize for Segmentation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Segmentation::Polygons(rings) => rings.serialize(s),
            Segmentation::Rle(rle) => rle.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Segmentation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        match v {
            Value::Array(_) => serde_json::from_value(v).map(Segmentation::Polygons).map_err(de::Error::custom),
            Value::Object(ref m) => {
                if matches!(m.get("counts"), Some(Value::String(_))) {
                    return Err(de::Error::custom(Error::CompressedRle));
                }
                serde_json::from_value(v).map(Segmentation::Rle).map_err(de::Error::custom)
            }
            _ => Err(de::Error::custom("segmentation must be a ring list or an RLE object")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    pub segmentation: Segmentation,
    pub bbox: BBox,
    pub area: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iscrowd: Option<u8>,
    #[serde(default)]
    pub arrangement: Arrangement,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub images: Vec<ImageRecord>,
    pub categories: Vec<CategoryRecord>,
    pub annotations: Vec<Annotation>,
    #[serde(flatten)]
    pub extra: Extra,
}

impl Dataset {
    pub fn image(&self, id: u64) -> Option<&ImageRecord> {
        self.images.iter().find(|i| i.id == id)
    }

    pub fn category(&self, id: u64) -> Option<&CategoryRecord> {
        self.categories.iter().find(|c| c.id == id)
    }

    pub fn category_by_name(&self, name: &str) -> Option<&CategoryRecord> {
        self.categories.iter().find(|c| c.name == name)
    }

    /// The two canonical pallet categories with ids 1 and 2.
    pub fn pallet_categories() -> Vec<CategoryRecord> {
        [BODY_CATEGORY, FACE_CATEGORY]
            .iter()
            .enumerate()
            .map(|(i, name)| CategoryRecord {
                id: i as u64 + 1,
                name: (*name).to_string(),
                supercategory: "pallet".to_string(),
                extra: Extra::new(),
            })
            .collect()
    }
}

pub fn parse_dataset(bytes: &[u8]) -> Result<Dataset> {
    let value: Value = serde_json::from_slice(bytes)?;
    let Value::Object(top) = &value else {
        return Err(Error::Schema("top level must be a JSON object".into()));
    };
    for key in ["images", "annotations", "categories"] {
        match top.get(key) {
            Some(Value::Array(_)) => {}
            Some(_) => return Err(Error::Schema(format!("`{key}` must be an array"))),
            None => return Err(Error::Schema(format!("missing top-level array `{key}`"))),
        }
    }
    serde_json::from_value(value).map_err(|e| {
        if e.to_string().contains("compressed RLE") {
            Error::CompressedRle
        } else {
            Error::Schema(e.to_string())
        }
    })
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&bytes)
}

/// Round every float to 6 decimal places. Integers pass through untouched.
fn canonicalise(v: &mut Value) {
    match v {
        Value::Number(n) if !(n.is_u64() || n.is_i64()) => {
            if let Some(f) = n.as_f64() {
                let rounded = (f * 1e6).round() / 1e6;
                let rounded = if rounded == 0.0 { 0.0 } else { rounded };
                if let Some(num) = serde_json::Number::from_f64(rounded) {
                    *n = num;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(canonicalise),
        Value::Object(map) => map.values_mut().for_each(canonicalise),
        _ => {}
    }
}

/// Deterministic compact JSON: sorted keys, floats rounded to 6 decimals,
/// trailing newline.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_value(value)?;
    canonicalise(&mut v);
    let mut out = serde_json::to_vec(&v)?;
    out.push(b'\n');
    Ok(out)
}

pub fn serialize_dataset(d: &Dataset) -> Result<Vec<u8>> {
    to_canonical_json(d)
}

pub fn write_dataset(d: &Dataset, path: &Path) -> Result<()> {
    let bytes = serialize_dataset(d)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DefectCode {
    DanglingImageRef,
    DanglingCategoryRef,
    DupId,
    OddCoords,
    DegeneratePolygon,
    BboxOutOfBounds,
    AreaMismatch,
    RleLengthMismatch,
    MissingImageFile,
}

impl DefectCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DefectCode::DanglingImageRef => "DANGLING_IMAGE_REF",
            DefectCode::DanglingCategoryRef => "DANGLING_CATEGORY_REF",
            DefectCode::DupId => "DUP_ID",
            DefectCode::OddCoords => "ODD_COORDS",
            DefectCode::DegeneratePolygon => "DEGENERATE_POLYGON",
            DefectCode::BboxOutOfBounds => "BBOX_OUT_OF_BOUNDS",
            DefectCode::AreaMismatch => "AREA_MISMATCH",
            DefectCode::RleLengthMismatch => "RLE_LENGTH_MISMATCH",
            DefectCode::MissingImageFile => "MISSING_IMAGE_FILE",
        }
    }
}

impl fmt::Display for DefectCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Defect {
    pub code: DefectCode,
    pub message: String,
    pub ids: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub defects: Vec<Defect>,
    pub counts: BTreeMap<DefectCode, usize>,
}

impl ValidationReport {
    fn push(&mut self, code: DefectCode, ids: Vec<u64>, message: String) {
        *self.counts.entry(code).or_default() += 1;
        self.defects.push(Defect { code, message, ids });
    }

    pub fn is_clean(&self) -> bool {
        self.defects.is_empty()
    }

    pub fn len(&self) -> usize {
        self.defects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defects.is_empty()
    }
}

/// Relative tolerance between stated and computed area.
pub const AREA_TOLERANCE: f64 = 0.05;

fn duplicate_ids<'a>(ids: impl Iterator<Item = u64> + 'a) -> Vec<u64> {
    let mut seen = HashSet::new();
    let mut dups = Vec::new();
    for id in ids {
        if !seen.insert(id) && !dups.contains(&id) {
            dups.push(id);
        }
    }
    dups
}

/// Lint a dataset. Each annotation yields at most one geometry defect
/// (ring/RLE structure first, then degeneracy, then area), so one corruption
/// is reported once rather than cascading.
pub fn validate_dataset(d: &Dataset, image_root: Option<&Path>) -> ValidationReport {
    let mut report = ValidationReport::default();

    for (kind, ids) in [
        ("image", duplicate_ids(d.images.iter().map(|i| i.id))),
        ("category", duplicate_ids(d.categories.iter().map(|c| c.id))),
        ("annotation", duplicate_ids(d.annotations.iter().map(|a| a.id))),
    ] {
        for id in ids {
            report.push(DefectCode::DupId, vec![id], format!("{kind} id {id} is not unique"));
        }
    }

    let images: HashMap<u64, &ImageRecord> = d.images.iter().map(|i| (i.id, i)).collect();
    let categories: HashSet<u64> = d.categories.iter().map(|c| c.id).collect();

    for a in &d.annotations {
        let image = images.get(&a.image_id).copied();
        if image.is_none() {
            report.push(
                DefectCode::DanglingImageRef,
                vec![a.id, a.image_id],
                format!("annotation {} references missing image {}", a.id, a.image_id),
            );
        }
        if !categories.contains(&a.category_id) {
            report.push(
                DefectCode::DanglingCategoryRef,
                vec![a.id, a.category_id],
                format!("annotation {} references missing category {}", a.id, a.category_id),
            );
        }
        if let Some(img) = image {
            let b = &a.bbox;
            let inside = b.x >= 0.0
                && b.y >= 0.0
                && b.w >= 0.0
                && b.h >= 0.0
                && b.x + b.w <= img.width as f64
                && b.y + b.h <= img.height as f64;
            if !inside {
                report.push(
                    DefectCode::BboxOutOfBounds,
                    vec![a.id],
                    format!(
                        "annotation {} bbox [{}, {}, {}, {}] exceeds {}x{}",
                        a.id, b.x, b.y, b.w, b.h, img.width, img.height
                    ),
                );
            }
        }
        if let Some((code, message)) = geometry_defect(a, image) {
            report.push(code, vec![a.id], message);
        }
    }

    if let Some(root) = image_root {
        for img in &d.images {
            if !root.join(&img.file_name).is_file() {
                report.push(
                    DefectCode::MissingImageFile,
                    vec![img.id],
                    format!("image {} file {:?} not found", img.id, img.file_name),
                );
            }
        }
    }
    report
}

fn geometry_defect(a: &Annotation, image: Option<&ImageRecord>) -> Option<(DefectCode, String)> {
    let computed = match &a.segmentation {
        Segmentation::Polygons(rings) => {
            if let Some(r) = rings.iter().find(|r| r.len() % 2 != 0) {
                return Some((
                    DefectCode::OddCoords,
                    format!("annotation {} has a ring with {} coordinates", a.id, r.len()),
                ));
            }
            let mut total = 0.0;
            for r in rings {
                let poly = match Polygon::from_flat(r) {
                    Ok(p) if geom::polygon_area(&p) >= 1.0 => p,
                    _ => {
                        return Some((
                            DefectCode::DegeneratePolygon,
                            format!("annotation {} has a degenerate ring", a.id),
                        ))
                    }
                };
                total += geom::polygon_area(&poly);
            }
            if rings.is_empty() {
                return Some((DefectCode::DegeneratePolygon, format!("annotation {} has no rings", a.id)));
            }
            total
        }
        Segmentation::Rle(rle) => {
            let expected = rle.height() as u64 * rle.width() as u64;
            let dims_ok = image.is_none_or(|img| img.width == rle.width() && img.height == rle.height());
            if rle.total() != expected || !dims_ok {
                return Some((
                    DefectCode::RleLengthMismatch,
                    format!(
                        "annotation {} RLE covers {} pixels for size [{}, {}]",
                        a.id,
                        rle.total(),
                        rle.height(),
                        rle.width()
                    ),
                ));
            }
            let area = rle.area() as f64;
            if area < 1.0 {
                return Some((DefectCode::DegeneratePolygon, format!("annotation {} has an empty mask", a.id)));
            }
            area
        }
    };
    if !(a.area.is_finite() && ((a.area - computed) / computed).abs() <= AREA_TOLERANCE) {
        return Some((
            DefectCode::AreaMismatch,
            format!("annotation {} states area {} but geometry gives {}", a.id, a.area, computed),
        ));
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedInstance {
    pub image_id: u64,
    pub category_id: u64,
    pub segmentation: Segmentation,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BBox>,
}

impl PredictedInstance {
    pub fn bbox(&self) -> Result<BBox> {
        match self.bbox {
            Some(b) => Ok(b),
            None => self.segmentation.bbox(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PredictionSet {
    pub instances: Vec<PredictedInstance>,
}

impl PredictionSet {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

/// Parse a COCO results array and check every record against `reference`.
pub fn parse_predictions(bytes: &[u8], reference: &Dataset) -> Result<PredictionSet> {
    let value: Value = serde_json::from_slice(bytes)?;
    if !value.is_array() {
        return Err(Error::Schema("predictions must be a JSON array".into()));
    }
    let set: PredictionSet = serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))?;
    check_predictions(&set, reference)?;
    Ok(set)
}

pub fn check_predictions(set: &PredictionSet, reference: &Dataset) -> Result<()> {
    let images: HashSet<u64> = reference.images.iter().map(|i| i.id).collect();
    let categories: HashSet<u64> = reference.categories.iter().map(|c| c.id).collect();
    for (index, p) in set.instances.iter().enumerate() {
        if !(0.0..=1.0).contains(&p.score) {
            return Err(Error::ScoreRange { index, score: p.score });
        }
        if !images.contains(&p.image_id) {
            return Err(Error::UnknownImage { index, image_id: p.image_id });
        }
        if !categories.contains(&p.category_id) {
            return Err(Error::UnknownCategory { index, category_id: p.category_id });
        }
    }
    Ok(())
}

pub fn read_predictions(path: &Path, reference: &Dataset) -> Result<PredictionSet> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_predictions(&bytes, reference)
}

pub fn serialize_predictions(p: &PredictionSet) -> Result<Vec<u8>> {
    to_canonical_json(p)
}

/// Merge `b` into `a`: ids renumbered densely from 1 (records of `a` first),
/// categories unified by name.
pub fn merge_datasets(a: &Dataset, b: &Dataset) -> Result<Dataset> {
    let mut out = Dataset { extra: a.extra.clone(), ..Dataset::default() };
    for (k, v) in &b.extra {
        out.extra.entry(k.clone()).or_insert_with(|| v.clone());
    }

    let mut by_name: BTreeMap<String, u64> = BTreeMap::new();
    let mut category_maps: [HashMap<u64, u64>; 2] = [HashMap::new(), HashMap::new()];
    for (side, ds) in [a, b].into_iter().enumerate() {
        for c in &ds.categories {
            let new_id = match by_name.get(&c.name) {
                Some(&id) => {
                    let existing = out.categories.iter().find(|x| x.id == id).expect("unified category");
                    if existing.supercategory != c.supercategory {
                        return Err(Error::CategoryConflict {
                            name: c.name.clone(),
                            a: existing.supercategory.clone(),
                            b: c.supercategory.clone(),
                        });
                    }
                    id
                }
                None => {
                    let id = out.categories.len() as u64 + 1;
                    by_name.insert(c.name.clone(), id);
                    out.categories.push(CategoryRecord { id, ..c.clone() });
                    id
                }
            };
            category_maps[side].entry(c.id).or_insert(new_id);
        }
    }

    let mut image_maps: [HashMap<u64, u64>; 2] = [HashMap::new(), HashMap::new()];
    for (side, ds) in [a, b].into_iter().enumerate() {
        for img in &ds.images {
            let id = out.images.len() as u64 + 1;
            image_maps[side].entry(img.id).or_insert(id);
            out.images.push(ImageRecord { id, ..img.clone() });
        }
    }

    for (side, ds) in [a, b].into_iter().enumerate() {
        for ann in &ds.annotations {
            let id = out.annotations.len() as u64 + 1;
            // Dangling references stay dangling (mapped past the new id range)
            // so the validator still reports them after a merge.
            let image_id = image_maps[side].get(&ann.image_id).copied().unwrap_or(u64::MAX - ann.image_id);
            let category_id =
                category_maps[side].get(&ann.category_id).copied().unwrap_or(u64::MAX - ann.category_id);
            out.annotations.push(Annotation { id, image_id, category_id, ..ann.clone() });
        }
    }
    Ok(out)
}
