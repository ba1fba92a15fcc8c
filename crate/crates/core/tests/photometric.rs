//! Image I/O and darkening, including whole-dataset variants.

use std::path::Path;

use palletbench::coco::read_dataset;
use palletbench::photometric::{
    darken_dataset_random, darken_dataset_static, darken_static, load_image, mean_brightness, random_level,
    save_image, Image, ANNOTATIONS_FILE, MANIFEST_FILE,
};
use palletbench::rng::splitmix64_at;
use palletbench::scene::{self, RandomisationConfig};

fn fixture(dir: &Path, count: usize) -> std::path::PathBuf {
    let cfg = RandomisationConfig { image_width: 80, image_height: 60, ..Default::default() };
    scene::export_dataset(&scene::generate_batch(&cfg, count, 17).unwrap(), dir, 0.05).unwrap();
    dir.join(ANNOTATIONS_FILE)
}

fn write_grey_png(path: &Path, value: u8) {
    let file = std::fs::File::create(path).unwrap();
    let mut enc = png::Encoder::new(std::io::BufWriter::new(file), 3, 2);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    enc.write_header().unwrap().write_image_data(&[value; 6]).unwrap();
}

#[test]
fn png_loading_rules() {
    let dir = tempfile::tempdir().unwrap();
    let white = dir.path().join("white.png");
    save_image(&Image::filled(1, 1, [255, 255, 255]), &white).unwrap();
    assert_eq!(load_image(&white).unwrap().samples(), &[255, 255, 255]);
    let grey = dir.path().join("grey.png");
    write_grey_png(&grey, 7);
    let img = load_image(&grey).unwrap();
    assert_eq!((img.width(), img.height()), (3, 2));
    assert_eq!(img.pixel(1, 2), [7, 7, 7]);
    assert_eq!(load_image(&dir.path().join("missing.png")).unwrap_err().code(), "IO");
}

#[test]
fn render_survives_save_and_load() {
    let dir = tempfile::tempdir().unwrap();
    let spec = scene::generate_scene(&RandomisationConfig::default(), 5).unwrap();
    let render = scene::rasterize_scene(&spec);
    let path = dir.path().join("r.png");
    save_image(&render.image, &path).unwrap();
    assert_eq!(load_image(&path).unwrap(), render.image);
}

#[test]
fn brightness_bounds() {
    assert_eq!(mean_brightness(&Image::filled(4, 4, [0, 0, 0])), 0.0);
    assert_eq!(mean_brightness(&Image::filled(4, 4, [255, 255, 255])), 255.0);
    let samples: Vec<u8> = (0..300u32).map(|i| (i * 37 % 256) as u8).collect();
    let img = Image::from_samples(10, 10, samples).unwrap();
    for d in [1, 13, 50, 99] {
        let dark = darken_static(&img, d).unwrap();
        assert!(mean_brightness(&dark) <= mean_brightness(&img) * (100 - d) as f64 / 100.0 + 0.5);
    }
    assert_eq!(darken_static(&img, -1).unwrap_err().code(), "DARKEN_RANGE");
}

#[test]
fn static_variant_is_imagewise_composition() {
    let (src, out) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let json = fixture(src.path(), 4);
    let d = darken_dataset_static(&json, src.path(), 25, out.path()).unwrap();
    assert_eq!(std::fs::read(&json).unwrap(), std::fs::read(out.path().join(ANNOTATIONS_FILE)).unwrap());
    for rec in &d.images {
        let original = load_image(&src.path().join(&rec.file_name)).unwrap();
        let dark = load_image(&out.path().join(&rec.file_name)).unwrap();
        assert_eq!(dark, darken_static(&original, 25).unwrap());
    }

    let zero = tempfile::tempdir().unwrap();
    darken_dataset_static(&json, src.path(), 0, zero.path()).unwrap();
    for rec in &d.images {
        assert_eq!(
            load_image(&zero.path().join(&rec.file_name)).unwrap(),
            load_image(&src.path().join(&rec.file_name)).unwrap()
        );
    }
}

#[test]
fn random_variant_manifest_and_determinism() {
    let src = tempfile::tempdir().unwrap();
    let json = fixture(src.path(), 6);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (_, ma) = darken_dataset_random(&json, src.path(), 60, 42, a.path()).unwrap();
    let (_, mb) = darken_dataset_random(&json, src.path(), 60, 42, b.path()).unwrap();
    assert_eq!(ma, mb);
    assert_eq!(std::fs::read(a.path().join(MANIFEST_FILE)).unwrap(), std::fs::read(b.path().join(MANIFEST_FILE)).unwrap());
    let d = read_dataset(&json).unwrap();
    for (i, (entry, rec)) in ma.entries.iter().zip(&d.images).enumerate() {
        assert_eq!(entry.d as u64, splitmix64_at(42, i as u64) % 61);
        let expected = darken_static(&load_image(&src.path().join(&rec.file_name)).unwrap(), entry.d as i64).unwrap();
        assert_eq!(load_image(&a.path().join(&rec.file_name)).unwrap(), expected);
        assert_eq!(load_image(&b.path().join(&rec.file_name)).unwrap(), expected);
    }

    let none = tempfile::tempdir().unwrap();
    let (_, m0) = darken_dataset_random(&json, src.path(), 0, 9, none.path()).unwrap();
    assert!(m0.entries.iter().all(|e| e.d == 0));
}

#[test]
fn random_levels_average_half_of_max() {
    let mean = (0..1000).map(|i| random_level(42, 60, i) as f64).sum::<f64>() / 1000.0;
    assert!((27.0..=33.0).contains(&mean), "{mean}");
}
