//! C ABI over palletbench.
//!
//! Conventions: every fallible function returns a `PbStatus`; outputs go
//! through pointer arguments. Datasets and prediction sets are opaque
//! handles released with their `*_free` function. Byte buffers returned to
//! the caller are released with `pb_buffer_free`. After a failure,
//! `pb_last_error_message` describes it (per thread).

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::ptr;

use palletbench::coco::{self, Dataset, PredictionSet};
use palletbench::eval::{self, EvalConfig, EvalMode};
use palletbench::geom::{rle_decode, rle_encode, BitMask, Rle};
use palletbench::photometric::darken_sample;
use palletbench::rng::splitmix64_at;
use palletbench::Error;

/// Status codes; the values are stable.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PbStatus {
    Ok = 0,
    NullArgument = 1,
    MalformedJson = 2,
    Schema = 3,
    CompressedRle = 4,
    RleLengthMismatch = 5,
    DimensionMismatch = 6,
    ScoreRange = 7,
    UnknownImage = 8,
    UnknownCategory = 9,
    DarkenRange = 10,
    BufferTooSmall = 11,
    InvalidArgument = 12,
    Internal = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PbEvalMode {
    Mask = 0,
    Bbox = 1,
}

/// Caller-owned view of bytes allocated by this library.
#[repr(C)]
#[derive(Debug)]
pub struct PbBuffer {
    pub data: *mut u8,
    pub len: usize,
}

/// Opaque parsed dataset.
pub struct PbDataset(Dataset);

/// Opaque prediction set, checked against a dataset when parsed.
pub struct PbPredictions(PredictionSet);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: PbStatus, msg: &str) -> PbStatus {
    set_error(msg);
    status
}

fn status_of(e: &Error) -> PbStatus {
    match e {
        Error::Json(_) => PbStatus::MalformedJson,
        Error::Schema(_) => PbStatus::Schema,
        Error::CompressedRle => PbStatus::CompressedRle,
        Error::RleLengthMismatch { .. } => PbStatus::RleLengthMismatch,
        Error::DimensionMismatch(_) => PbStatus::DimensionMismatch,
        Error::ScoreRange { .. } => PbStatus::ScoreRange,
        Error::UnknownImage { .. } => PbStatus::UnknownImage,
        Error::UnknownCategory { .. } => PbStatus::UnknownCategory,
        Error::DarkenRange(_) => PbStatus::DarkenRange,
        Error::Config(_) => PbStatus::InvalidArgument,
        _ => PbStatus::Internal,
    }
}

fn from_error(e: Error) -> PbStatus {
    fail(status_of(&e), &format!("{}: {e}", e.code()))
}

/// Run `f`, turning panics into `Internal` so they never cross the boundary.
fn guard(f: impl FnOnce() -> PbStatus) -> PbStatus {
    std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)).unwrap_or_else(|_| fail(PbStatus::Internal, "internal panic"))
}

unsafe fn bytes<'a>(data: *const u8, len: usize) -> &'a [u8] {
    if len == 0 {
        &[]
    } else {
        std::slice::from_raw_parts(data, len)
    }
}

/// Message for the most recent failure on this thread; valid until the next
/// call into the library from the same thread. Never null.
#[no_mangle]
pub extern "C" fn pb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parse COCO JSON. On success `*out` owns a new handle.
///
/// # Safety
/// `json` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pb_dataset_parse(json: *const u8, len: usize, out: *mut *mut PbDataset) -> PbStatus {
    guard(|| {
        if (json.is_null() && len > 0) || out.is_null() {
            return fail(PbStatus::NullArgument, "null argument");
        }
        match coco::parse_dataset(bytes(json, len)) {
            Ok(d) => {
                *out = Box::into_raw(Box::new(PbDataset(d)));
                PbStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `d` must be null or a handle from `pb_dataset_parse` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pb_dataset_free(d: *mut PbDataset) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Number of images, annotations and categories.
///
/// # Safety
/// `d` must be a live handle; output pointers may be null to skip them.
#[no_mangle]
pub unsafe extern "C" fn pb_dataset_counts(
    d: *const PbDataset,
    images: *mut usize,
    annotations: *mut usize,
    categories: *mut usize,
) -> PbStatus {
    let Some(d) = d.as_ref() else { return fail(PbStatus::NullArgument, "null dataset") };
    for (ptr, value) in [(images, d.0.images.len()), (annotations, d.0.annotations.len()), (categories, d.0.categories.len())] {
        if !ptr.is_null() {
            *ptr = value;
        }
    }
    PbStatus::Ok
}

/// Canonical JSON serialisation into a new buffer.
///
/// # Safety
/// `d` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pb_dataset_serialize(d: *const PbDataset, out: *mut PbBuffer) -> PbStatus {
    guard(|| {
        let (Some(d), false) = (d.as_ref(), out.is_null()) else { return fail(PbStatus::NullArgument, "null argument") };
        match coco::serialize_dataset(&d.0) {
            Ok(v) => {
                let boxed = v.into_boxed_slice();
                let len = boxed.len();
                *out = PbBuffer { data: Box::into_raw(boxed) as *mut u8, len };
                PbStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Release a buffer returned by this library. Null data is ignored.
///
/// # Safety
/// `buf` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pb_buffer_free(buf: PbBuffer) {
    if !buf.data.is_null() {
        drop(Box::from_raw(ptr::slice_from_raw_parts_mut(buf.data, buf.len)));
    }
}

/// Validate without touching the filesystem; `*defects` receives the count.
/// The full report is available as JSON through `report` when non-null.
///
/// # Safety
/// `d` must be a live handle; `defects` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pb_dataset_validate(d: *const PbDataset, defects: *mut usize, report: *mut PbBuffer) -> PbStatus {
    guard(|| {
        let (Some(d), false) = (d.as_ref(), defects.is_null()) else {
            return fail(PbStatus::NullArgument, "null argument");
        };
        let r = coco::validate_dataset(&d.0, None);
        *defects = r.len();
        if !report.is_null() {
            match coco::to_canonical_json(&r) {
                Ok(v) => {
                    let boxed = v.into_boxed_slice();
                    let len = boxed.len();
                    *report = PbBuffer { data: Box::into_raw(boxed) as *mut u8, len };
                }
                Err(e) => return from_error(e),
            }
        }
        PbStatus::Ok
    })
}

/// Parse a COCO results array and check it against `d`.
///
/// # Safety
/// `json` must point to `len` bytes; `d` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pb_predictions_parse(
    json: *const u8,
    len: usize,
    d: *const PbDataset,
    out: *mut *mut PbPredictions,
) -> PbStatus {
    guard(|| {
        let Some(d) = d.as_ref() else { return fail(PbStatus::NullArgument, "null dataset") };
        if (json.is_null() && len > 0) || out.is_null() {
            return fail(PbStatus::NullArgument, "null argument");
        }
        match coco::parse_predictions(bytes(json, len), &d.0) {
            Ok(p) => {
                *out = Box::into_raw(Box::new(PbPredictions(p)));
                PbStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `p` must be null or a handle from `pb_predictions_parse` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pb_predictions_free(p: *mut PbPredictions) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Class-grouped mAP at IoU 0.5. `*map50` is NaN when no class has ground truth.
///
/// # Safety
/// Handles must be live; `map50` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pb_evaluate_map50(
    d: *const PbDataset,
    p: *const PbPredictions,
    mode: PbEvalMode,
    map50: *mut f64,
) -> PbStatus {
    guard(|| {
        let (Some(d), Some(p), false) = (d.as_ref(), p.as_ref(), map50.is_null()) else {
            return fail(PbStatus::NullArgument, "null argument");
        };
        let cfg = EvalConfig {
            mode: match mode {
                PbEvalMode::Mask => EvalMode::Mask,
                PbEvalMode::Bbox => EvalMode::Bbox,
            },
            ..EvalConfig::default()
        };
        match eval::evaluate(&d.0, &p.0, &cfg) {
            Ok(r) => {
                *map50 = r.map50.unwrap_or(f64::NAN);
                PbStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Encode a row-major mask (`height * width` bytes, non-zero = set) into
/// column-major RLE counts. `*count_len` receives the number of counts; if
/// it exceeds `capacity`, nothing is written and `BufferTooSmall` returned.
///
/// # Safety
/// `mask` must hold `width * height` bytes; `counts` must hold `capacity`
/// values (may be null when `capacity` is 0); `count_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pb_rle_encode(
    mask: *const u8,
    width: u32,
    height: u32,
    counts: *mut u64,
    capacity: usize,
    count_len: *mut usize,
) -> PbStatus {
    guard(|| {
        let n = width as usize * height as usize;
        if (mask.is_null() && n > 0) || count_len.is_null() {
            return fail(PbStatus::NullArgument, "null argument");
        }
        let bits: Vec<bool> = bytes(mask, n).iter().map(|&b| b != 0).collect();
        let m = match BitMask::from_bits(width, height, bits) {
            Ok(m) => m,
            Err(e) => return from_error(e),
        };
        let rle = rle_encode(&m);
        *count_len = rle.counts.len();
        if rle.counts.len() > capacity {
            return fail(PbStatus::BufferTooSmall, "counts buffer too small");
        }
        if counts.is_null() {
            return fail(PbStatus::NullArgument, "null counts buffer");
        }
        ptr::copy_nonoverlapping(rle.counts.as_ptr(), counts, rle.counts.len());
        PbStatus::Ok
    })
}

/// Decode column-major RLE counts into a row-major 0/1 mask of
/// `width * height` bytes.
///
/// # Safety
/// `counts` must hold `count_len` values; `mask` must hold `width * height` bytes.
#[no_mangle]
pub unsafe extern "C" fn pb_rle_decode(
    counts: *const u64,
    count_len: usize,
    width: u32,
    height: u32,
    mask: *mut u8,
) -> PbStatus {
    guard(|| {
        let n = width as usize * height as usize;
        if (counts.is_null() && count_len > 0) || (mask.is_null() && n > 0) {
            return fail(PbStatus::NullArgument, "null argument");
        }
        let counts = if count_len == 0 { Vec::new() } else { std::slice::from_raw_parts(counts, count_len).to_vec() };
        match rle_decode(&Rle { size: [height, width], counts }) {
            Ok(m) => {
                let out = std::slice::from_raw_parts_mut(mask, n);
                for r in 0..height {
                    for c in 0..width {
                        out[(r * width + c) as usize] = m.get(r, c) as u8;
                    }
                }
                PbStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Darken 8-bit samples in place by `percent` (0 to 100), rounding half up.
///
/// # Safety
/// `samples` must hold `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn pb_darken(samples: *mut u8, len: usize, percent: i32) -> PbStatus {
    if !(0..=100).contains(&percent) {
        return fail(PbStatus::DarkenRange, &format!("darkening percent {percent} outside [0, 100]"));
    }
    if len == 0 {
        return PbStatus::Ok;
    }
    if samples.is_null() {
        return fail(PbStatus::NullArgument, "null samples");
    }
    for s in std::slice::from_raw_parts_mut(samples, len) {
        *s = darken_sample(*s, percent as u8);
    }
    PbStatus::Ok
}

/// Element `index` of the splitmix64 stream seeded with `seed`.
#[no_mangle]
pub extern "C" fn pb_splitmix64_at(seed: u64, index: u64) -> u64 {
    splitmix64_at(seed, index)
}
