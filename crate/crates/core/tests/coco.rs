//! Dataset parsing, canonical serialisation, validation and merging.

use palletbench::coco::{
    merge_datasets, parse_dataset, parse_predictions, serialize_dataset, validate_dataset, Arrangement, DefectCode,
    Segmentation,
};
use palletbench::scene::{self, RandomisationConfig};
use proptest::prelude::*;
use serde_json::{json, Value};

fn minimal() -> Value {
    json!({
        "images": [{"id": 1, "file_name": "a.png", "width": 10, "height": 10}],
        "categories": [{"id": 1, "name": "pallet_body", "supercategory": "pallet"}],
        "annotations": []
    })
}

fn with_annotation(ann: Value) -> Vec<u8> {
    let mut doc = minimal();
    doc["annotations"] = json!([ann]);
    serde_json::to_vec(&doc).unwrap()
}

#[test]
fn minimal_document() {
    let d = parse_dataset(&serde_json::to_vec(&minimal()).unwrap()).unwrap();
    assert_eq!(d.images.len(), 1);
    assert!(d.annotations.is_empty());
}

#[test]
fn dangling_reference_is_deferred_to_validation() {
    let bytes = with_annotation(json!({
        "id": 1, "image_id": 99, "category_id": 1,
        "segmentation": [[1, 1, 4, 1, 4, 4]], "bbox": [1, 1, 3, 3], "area": 4.5
    }));
    let d = parse_dataset(&bytes).unwrap();
    let report = validate_dataset(&d, None);
    assert_eq!(report.len(), 1);
    assert_eq!(report.defects[0].code, DefectCode::DanglingImageRef);
}

#[test]
fn odd_ring_parses_then_flags() {
    let bytes = with_annotation(json!({
        "id": 1, "image_id": 1, "category_id": 1,
        "segmentation": [[1, 1, 4, 1, 4, 4, 1]], "bbox": [1, 1, 3, 3], "area": 4.5
    }));
    let d = parse_dataset(&bytes).unwrap();
    assert_eq!(validate_dataset(&d, None).defects[0].code, DefectCode::OddCoords);
}

#[test]
fn compressed_rle_and_malformed_json_are_errors() {
    let bytes = with_annotation(json!({
        "id": 1, "image_id": 1, "category_id": 1,
        "segmentation": {"size": [10, 10], "counts": "PPX3"}, "bbox": [0, 0, 1, 1], "area": 1
    }));
    assert_eq!(parse_dataset(&bytes).unwrap_err().code(), "COMPRESSED_RLE");
    assert_eq!(parse_dataset(b"{\"images\": [").unwrap_err().code(), "MALFORMED_JSON");
    assert_eq!(parse_dataset(b"[]").unwrap_err().code(), "SCHEMA");
}

#[test]
fn empty_dataset_serialises_to_three_arrays() {
    let d = parse_dataset(br#"{"images": [], "categories": [], "annotations": []}"#).unwrap();
    assert_eq!(serialize_dataset(&d).unwrap(), b"{\"annotations\":[],\"categories\":[],\"images\":[]}\n");
}

#[test]
fn unknown_fields_survive_a_round_trip() {
    let mut doc = minimal();
    doc["info"] = json!({"year": 2024});
    doc["images"][0]["license"] = json!(3);
    let d = parse_dataset(&serde_json::to_vec(&doc).unwrap()).unwrap();
    let back: Value = serde_json::from_slice(&serialize_dataset(&d).unwrap()).unwrap();
    assert_eq!(back["info"]["year"], 2024);
    assert_eq!(back["images"][0]["license"], 3);
}

#[test]
fn generated_dataset_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let specs = scene::generate_batch(&RandomisationConfig::default(), 5, 3).unwrap();
    let d = scene::export_dataset(&specs, dir.path(), 0.05).unwrap();
    let bytes = serialize_dataset(&d).unwrap();
    let back = parse_dataset(&bytes).unwrap();
    assert_eq!(back, d);
    assert_eq!(serialize_dataset(&back).unwrap(), bytes);
    assert!(back.annotations.iter().all(|a| matches!(a.segmentation, Segmentation::Rle(_))));
    assert!(back.annotations.iter().all(|a| a.arrangement != Arrangement::Unspecified));
}

#[test]
fn predictions_contract() {
    let d = parse_dataset(&serde_json::to_vec(&minimal()).unwrap()).unwrap();
    assert!(parse_predictions(b"[]", &d).unwrap().is_empty());
    let bad = br#"[{"image_id": 1, "category_id": 1, "score": 1.5, "segmentation": [[0, 0, 2, 0, 2, 2]]}]"#;
    assert_eq!(parse_predictions(bad, &d).unwrap_err().code(), "SCORE_RANGE");
    let cat = br#"[{"image_id": 1, "category_id": 4, "score": 0.5, "segmentation": [[0, 0, 2, 0, 2, 2]]}]"#;
    assert_eq!(parse_predictions(cat, &d).unwrap_err().code(), "UNKNOWN_CATEGORY");
    assert_eq!(parse_predictions(b"{}", &d).unwrap_err().code(), "SCHEMA");
}

#[test]
fn merge_counts_and_renumbering() {
    let one = parse_dataset(&serde_json::to_vec(&minimal()).unwrap()).unwrap();
    let empty = parse_dataset(br#"{"images": [], "categories": [], "annotations": []}"#).unwrap();
    let m = merge_datasets(&one, &empty).unwrap();
    assert_eq!(m.images[0].id, 1);
    let two = merge_datasets(&one, &one).unwrap();
    assert_eq!(two.images.iter().map(|i| i.id).collect::<Vec<_>>(), vec![1, 2]);
    assert_eq!(two.categories.len(), 1);

    let cfg = RandomisationConfig { image_width: 64, image_height: 48, ..Default::default() };
    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let a = scene::export_dataset(&scene::generate_batch(&cfg, 100, 1).unwrap(), da.path(), 0.05).unwrap();
    let b = scene::export_dataset(&scene::generate_batch(&cfg, 50, 2).unwrap(), db.path(), 0.05).unwrap();
    let m = merge_datasets(&a, &b).unwrap();
    assert_eq!(m.images.len(), 150);
    assert_eq!(m.annotations.len(), a.annotations.len() + b.annotations.len());
    assert!(validate_dataset(&m, None).is_clean());
}

#[test]
fn merge_unifies_categories_by_name() {
    let a = parse_dataset(&serde_json::to_vec(&minimal()).unwrap()).unwrap();
    let mut doc = minimal();
    doc["categories"] = json!([{"id": 1, "name": "pallet_face", "supercategory": "pallet"},
                               {"id": 2, "name": "pallet_body", "supercategory": "pallet"}]);
    let b = parse_dataset(&serde_json::to_vec(&doc).unwrap()).unwrap();
    // A differing id alone is not a conflict; a differing supercategory is.
    let m = merge_datasets(&a, &b).unwrap();
    assert_eq!(m.categories.len(), 2);
    doc["categories"][1]["supercategory"] = json!("crate");
    let c = parse_dataset(&serde_json::to_vec(&doc).unwrap()).unwrap();
    assert_eq!(merge_datasets(&a, &c).unwrap_err().code(), "CATEGORY_CONFLICT");
}

proptest! {
    #[test]
    fn canonical_serialisation_is_a_fixed_point(
        boxes in proptest::collection::vec((0u32..50, 0u32..50, 1u32..20, 1u32..20), 0..8),
        scale in 0.25f64..4.0,
    ) {
        let anns: Vec<Value> = boxes.iter().enumerate().map(|(i, &(x, y, w, h))| {
            let (x, y, w, h) = (x as f64 * scale, y as f64 * scale, w as f64 * scale, h as f64 * scale);
            json!({"id": i + 1, "image_id": 1, "category_id": 1,
                   "segmentation": [[x, y, x + w, y, x + w, y + h, x, y + h]],
                   "bbox": [x, y, w, h], "area": w * h})
        }).collect();
        let mut doc = minimal();
        doc["annotations"] = json!(anns);
        let first = serialize_dataset(&parse_dataset(&serde_json::to_vec(&doc).unwrap()).unwrap()).unwrap();
        let second = serialize_dataset(&parse_dataset(&first).unwrap()).unwrap();
        prop_assert_eq!(first, second);
    }
}
