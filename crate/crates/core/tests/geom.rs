//! Mask geometry against hand-derived values and independent oracles.

mod common;

use palletbench::coco::Segmentation;
use palletbench::geom::{
    bbox_iou, convex_polygon_intersection_area, instance_iou, mask_iou, mask_to_polygons, polygon_area,
    polygon_to_bbox, rasterize_polygons, rle_decode, rle_encode, BitMask, BBox, Polygon, Rle,
};
use proptest::prelude::*;

fn poly(v: &[[f64; 2]]) -> Polygon {
    Polygon::new(v.to_vec()).unwrap()
}

fn square(x: f64, y: f64, s: f64) -> Polygon {
    poly(&[[x, y], [x + s, y], [x + s, y + s], [x, y + s]])
}

#[test]
fn polygon_measures() {
    let unit = square(0.0, 0.0, 1.0);
    assert_eq!(polygon_area(&unit), 1.0);
    assert_eq!(polygon_area(&poly(&[[0.0, 1.0], [1.0, 1.0], [1.0, 0.0], [0.0, 0.0]])), 1.0);
    assert_eq!(polygon_area(&poly(&[[0.0, 0.0], [4.0, 0.0], [0.0, 3.0]])), 6.0);
    assert_eq!(polygon_to_bbox(&unit), BBox::new(0.0, 0.0, 1.0, 1.0));
    assert_eq!(polygon_to_bbox(&poly(&[[1.0, 2.0], [5.0, 2.0], [3.0, 7.0]])), BBox::new(1.0, 2.0, 4.0, 5.0));
    assert_eq!(polygon_to_bbox(&poly(&[[0.0, 0.0], [2.0, 0.0], [1.0, 0.0]])), BBox::new(0.0, 0.0, 2.0, 0.0));
}

#[test]
fn rasterisation_examples() {
    assert_eq!(rasterize_polygons(&[square(0.0, 0.0, 4.0)], 8, 8).count(), 16);
    assert!(rasterize_polygons(&[], 8, 8).is_empty());
    assert!(rasterize_polygons(&[square(20.0, 20.0, 4.0)], 8, 8).is_empty());
}

#[test]
fn rle_examples() {
    let full = BitMask::from_bits(3, 3, vec![true; 9]).unwrap();
    assert_eq!(rle_encode(&full).counts, vec![0, 9]);
    assert_eq!(rle_encode(&BitMask::new(3, 3)).counts, vec![9]);
    assert!(rle_decode(&Rle { size: [3, 3], counts: vec![9] }).unwrap().is_empty());
    assert_eq!(rle_decode(&Rle { size: [3, 3], counts: vec![0, 9] }).unwrap().count(), 9);
    assert_eq!(rle_decode(&Rle { size: [3, 3], counts: vec![4] }).unwrap_err().code(), "RLE_LENGTH_MISMATCH");
}

#[test]
fn iou_examples() {
    let a = rasterize_polygons(&[square(0.0, 0.0, 10.0)], 30, 30);
    assert_eq!(mask_iou(&a, &a).unwrap(), 1.0);
    let far = rasterize_polygons(&[square(15.0, 15.0, 10.0)], 30, 30);
    assert_eq!(mask_iou(&a, &far).unwrap(), 0.0);
    let strip = rasterize_polygons(&[square(5.0, 0.0, 10.0)], 30, 30);
    assert!((mask_iou(&a, &strip).unwrap() - 50.0 / 150.0).abs() < 1e-12);
    assert_eq!(mask_iou(&a, &BitMask::new(3, 3)).unwrap_err().code(), "DIMENSION_MISMATCH");

    let b = BBox::new(0.0, 0.0, 2.0, 2.0);
    assert_eq!(bbox_iou(&b, &b), 1.0);
    assert_eq!(bbox_iou(&b, &BBox::new(2.0, 0.0, 2.0, 2.0)), 0.0);
    assert!((bbox_iou(&b, &BBox::new(1.0, 0.0, 2.0, 2.0)) - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn instance_iou_representation_invariance() {
    let p = poly(&[[3.2, 4.1], [20.7, 6.3], [15.5, 25.9], [2.1, 18.0]]);
    let as_poly = Segmentation::Polygons(vec![p.to_flat()]);
    let as_rle = Segmentation::Rle(rle_encode(&rasterize_polygons(&[p], 32, 32)));
    assert_eq!(instance_iou(&as_poly, &as_rle, 32, 32).unwrap(), 1.0);
    assert_eq!(instance_iou(&as_poly, &Segmentation::Polygons(vec![]), 32, 32).unwrap(), 0.0);
}

#[test]
fn convex_intersection_examples() {
    let s = square(0.0, 0.0, 1.0);
    assert_eq!(convex_polygon_intersection_area(&s, &s).unwrap(), 1.0);
    assert_eq!(convex_polygon_intersection_area(&s, &square(3.0, 3.0, 1.0)).unwrap(), 0.0);
    let shifted = poly(&[[0.5, 0.0], [1.5, 0.0], [1.5, 1.0], [0.5, 1.0]]);
    assert!((convex_polygon_intersection_area(&s, &shifted).unwrap() - 0.5).abs() < 1e-12);
    let dart = poly(&[[0.0, 0.0], [4.0, 0.0], [1.0, 1.0], [0.0, 4.0]]);
    assert_eq!(convex_polygon_intersection_area(&dart, &s).unwrap_err().code(), "NON_CONVEX");
}

#[test]
fn contour_examples() {
    assert!(mask_to_polygons(&BitMask::new(5, 5), 0.0).is_empty());
    let mut m = BitMask::new(6, 6);
    for (r, c) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        m.set(r, c, true);
    }
    let polys = mask_to_polygons(&m, 0.0);
    assert_eq!(polys.len(), 1);
    assert_eq!(rasterize_polygons(&polys, 6, 6), m);
    m.set(4, 4, true);
    m.set(4, 5, true);
    assert_eq!(mask_to_polygons(&m, 0.0).len(), 2);
}

fn vertex() -> impl Strategy<Value = [f64; 2]> {
    // Offsets of 0.37 keep vertices off pixel centres, so boundary
    // conventions cannot make the two rasterisers disagree.
    (0u32..40, 0u32..40).prop_map(|(x, y)| [x as f64 + 0.37, y as f64 + 0.37])
}

proptest! {
    #[test]
    fn rasteriser_matches_point_in_polygon(verts in proptest::collection::vec(vertex(), 3..9)) {
        let p = Polygon::new(verts).unwrap();
        let ours = rasterize_polygons(std::slice::from_ref(&p), 40, 40);
        let oracle = common::raster_rings(&[p.to_flat()], 40, 40);
        for r in 0..40 {
            for c in 0..40 {
                prop_assert_eq!(ours.get(r, c), oracle[(r * 40 + c) as usize]);
            }
        }
    }

    #[test]
    fn rle_round_trip(w in 1u32..40, h in 1u32..40, seed in any::<u64>()) {
        let mut rng = palletbench::rng::SplitMix64::new(seed);
        let bits: Vec<bool> = (0..w * h).map(|_| rng.next_u64().is_multiple_of(3)).collect();
        let m = BitMask::from_bits(w, h, bits).unwrap();
        let rle = rle_encode(&m);
        prop_assert_eq!(rle.counts.iter().sum::<u64>(), (w * h) as u64);
        prop_assert_eq!(rle_decode(&rle).unwrap(), m);
    }

    #[test]
    fn mask_iou_is_symmetric_and_bounded(seed in any::<u64>()) {
        let mut rng = palletbench::rng::SplitMix64::new(seed);
        let a = BitMask::from_bits(16, 16, (0..256).map(|_| rng.next_u64().is_multiple_of(2)).collect()).unwrap();
        let b = BitMask::from_bits(16, 16, (0..256).map(|_| rng.next_u64().is_multiple_of(4)).collect()).unwrap();
        let ab = mask_iou(&a, &b).unwrap();
        prop_assert_eq!(ab, mask_iou(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
    }
}
