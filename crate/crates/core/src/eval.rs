//! COCO-style instance evaluation: greedy score-ordered matching,
//! 101-point interpolated average precision, grouping by category and by
//! pallet arrangement, and a run-to-run prediction stability measure.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coco::{check_predictions, Annotation, Arrangement, Dataset, PredictedInstance, PredictionSet};
use crate::error::{Error, Result};
use crate::geom::{bbox_iou, BBox, BitMask};

/// Recall sample points used by the interpolated AP.
pub const RECALL_POINTS: usize = 101;

pub const FP_ATTRIBUTION: &str = "true positives count toward the arrangement of their matched ground truth; \
unmatched predictions count as false positives in every arrangement group of their category";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    #[default]
    Mask,
    Bbox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    #[default]
    ByClass,
    ByArrangement,
    ByClassAndArrangement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub iou_thresholds: Vec<f64>,
    pub mode: EvalMode,
    pub grouping: Grouping,
    pub max_detections_per_image: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { iou_thresholds: vec![0.5], mode: EvalMode::Mask, grouping: Grouping::ByClass, max_detections_per_image: 100 }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iou_thresholds.is_empty() {
            return Err(Error::Config("at least one IoU threshold is required".into()));
        }
        if self.iou_thresholds.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
            return Err(Error::Config("IoU thresholds must lie in (0, 1]".into()));
        }
        if self.iou_thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("IoU thresholds must be strictly increasing".into()));
        }
        Ok(())
    }

    /// Index of the 0.5 threshold, if configured.
    pub fn map50_index(&self) -> Option<usize> {
        self.iou_thresholds.iter().position(|t| (t - 0.5).abs() < 1e-9)
    }
}

/// One detection after matching, in descending score order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedDetection {
    /// Position of the detection in the input slice.
    pub index: usize,
    pub score: f64,
    pub true_positive: bool,
    /// Ground truth the detection was matched to (true positives only).
    pub gt: Option<usize>,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub detections: Vec<MatchedDetection>,
    pub gt_count: usize,
}

impl MatchResult {
    pub fn true_positives(&self) -> usize {
        self.detections.iter().filter(|d| d.true_positive).count()
    }
}

/// Stable descending-score order; equal scores keep insertion order.
pub fn score_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Greedy matching on a precomputed IoU matrix (`ious[det][gt]`).
pub fn match_with_ious(ious: &[Vec<f64>], scores: &[f64], gt_count: usize, threshold: f64, max_detections: usize) -> MatchResult {
    let mut taken = vec![false; gt_count];
    let mut detections = Vec::new();
    for index in score_order(scores).into_iter().take(max_detections) {
        let mut best: Option<(usize, f64)> = None;
        for (g, &iou) in ious[index].iter().enumerate() {
            if !taken[g] && best.is_none_or(|(_, b)| iou > b) {
                best = Some((g, iou));
            }
        }
        let (gt, iou, tp) = match best {
            Some((g, iou)) if iou >= threshold => {
                taken[g] = true;
                (Some(g), iou, true)
            }
            Some((_, iou)) => (None, iou, false),
            None => (None, 0.0, false),
        };
        detections.push(MatchedDetection { index, score: scores[index], true_positive: tp, gt, iou });
    }
    MatchResult { detections, gt_count }
}

/// Mask with its pixel bounds, for IoU computed over the bounding overlap.
#[derive(Debug, Clone)]
pub struct RegionMask {
    mask: BitMask,
    bounds: Option<(u32, u32, u32, u32)>,
    count: u64,
}

impl RegionMask {
    pub fn new(mask: BitMask) -> Self {
        let bounds = mask.bbox().map(|b| {
            let (c0, r0) = (b.x as u32, b.y as u32);
            (c0, r0, c0 + b.w as u32, r0 + b.h as u32)
        });
        let count = mask.count();
        Self { mask, bounds, count }
    }

    pub fn mask(&self) -> &BitMask {
        &self.mask
    }

    pub fn iou(&self, other: &RegionMask) -> f64 {
        let union_base = self.count + other.count;
        let (Some(a), Some(b)) = (self.bounds, other.bounds) else {
            return 0.0;
        };
        let (c0, r0) = (a.0.max(b.0), a.1.max(b.1));
        let (c1, r1) = (a.2.min(b.2), a.3.min(b.3));
        let mut inter = 0u64;
        for r in r0..r1 {
            for c in c0..c1 {
                if self.mask.get(r, c) && other.mask.get(r, c) {
                    inter += 1;
                }
            }
        }
        inter as f64 / (union_base - inter) as f64
    }
}

enum Region {
    Mask(RegionMask),
    Box(BBox),
}

impl Region {
    fn iou(&self, other: &Region) -> f64 {
        match (self, other) {
            (Region::Mask(a), Region::Mask(b)) => a.iou(b),
            (Region::Box(a), Region::Box(b)) => bbox_iou(a, b),
            _ => unreachable!("regions of one evaluation share a mode"),
        }
    }
}

fn gt_region(a: &Annotation, mode: EvalMode, width: u32, height: u32) -> Result<Region> {
    Ok(match mode {
        EvalMode::Mask => Region::Mask(RegionMask::new(a.segmentation.to_mask(width, height)?)),
        EvalMode::Bbox => Region::Box(a.bbox),
    })
}

fn det_region(p: &PredictedInstance, mode: EvalMode, width: u32, height: u32) -> Result<Region> {
    Ok(match mode {
        EvalMode::Mask => Region::Mask(RegionMask::new(p.segmentation.to_mask(width, height)?)),
        EvalMode::Bbox => Region::Box(p.bbox()?),
    })
}

fn iou_matrix(gt: &[Region], det: &[Region]) -> Vec<Vec<f64>> {
    det.iter().map(|d| gt.iter().map(|g| d.iou(g)).collect()).collect()
}

/// Match detections of one image and category against its ground truth.
pub fn match_instances(
    gt: &[Annotation],
    det: &[PredictedInstance],
    threshold: f64,
    mode: EvalMode,
    width: u32,
    height: u32,
    max_detections: usize,
) -> Result<MatchResult> {
    let g: Vec<Region> = gt.iter().map(|a| gt_region(a, mode, width, height)).collect::<Result<_>>()?;
    let d: Vec<Region> = det.iter().map(|p| det_region(p, mode, width, height)).collect::<Result<_>>()?;
    let scores: Vec<f64> = det.iter().map(|p| p.score).collect();
    Ok(match_with_ious(&iou_matrix(&g, &d), &scores, gt.len(), threshold, max_detections))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApResult {
    pub ap: f64,
    /// Interpolated precision at recall 0.00, 0.01, ..., 1.00.
    pub precision: Vec<f64>,
}

/// 101-point interpolated AP over `(score, is_true_positive)` pairs.
/// Recall thresholds are compared exactly in integers (`tp * 100 >= k * gt`).
pub fn average_precision(pairs: &[(f64, bool)], gt_count: usize) -> Result<ApResult> {
    if gt_count == 0 {
        return Err(Error::GroupEmpty);
    }
    let scores: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let order = score_order(&scores);
    let mut tp = 0usize;
    let mut cum_tp = Vec::with_capacity(pairs.len());
    let mut precision = Vec::with_capacity(pairs.len());
    for (rank, &i) in order.iter().enumerate() {
        if pairs[i].1 {
            tp += 1;
        }
        cum_tp.push(tp);
        precision.push(tp as f64 / (rank + 1) as f64);
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut samples = vec![0.0; RECALL_POINTS];
    let mut cursor = 0;
    for (k, sample) in samples.iter_mut().enumerate() {
        while cursor < cum_tp.len() && cum_tp[cursor] * 100 < k * gt_count {
            cursor += 1;
        }
        if cursor < cum_tp.len() {
            *sample = precision[cursor];
        }
    }
    let ap = samples.iter().sum::<f64>() / RECALL_POINTS as f64;
    Ok(ApResult { ap, precision: samples })
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum GroupKey {
    Class(u64),
    Arrangement(Arrangement),
    ClassArrangement(u64, Arrangement),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub threshold: f64,
    /// `None` when the group has no ground truth.
    pub ap: Option<f64>,
    pub precision: Vec<f64>,
    pub true_positives: usize,
    pub detections: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub group: String,
    pub gt_count: usize,
    pub results: Vec<ThresholdResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapEntry {
    pub threshold: f64,
    pub map: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub grouping: Grouping,
    pub fp_attribution: String,
    pub iou_thresholds: Vec<f64>,
    pub groups: Vec<GroupReport>,
    pub map: Vec<MapEntry>,
    pub map50: Option<f64>,
    pub image_count: usize,
    pub gt_count: usize,
    pub detection_count: usize,
}

impl EvalReport {
    pub fn group(&self, name: &str) -> Option<&GroupReport> {
        self.groups.iter().find(|g| g.group == name)
    }

    /// AP of `group` at threshold index `t`.
    pub fn ap(&self, group: &str, t: usize) -> Option<f64> {
        self.group(group).and_then(|g| g.results[t].ap)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("group,threshold,ap,gt_count\n");
        for g in &self.groups {
            for r in &g.results {
                let ap = r.ap.map(|a| format!("{a:.6}")).unwrap_or_default();
                out.push_str(&format!("{},{},{},{}\n", g.group, r.threshold, ap, g.gt_count));
            }
        }
        out
    }
}

/// Per-threshold outcome of one detection, tagged with what it counts toward.
struct Scored {
    threshold: usize,
    score: f64,
    tp: bool,
    category: u64,
    arrangement: Option<Arrangement>,
}

/// Evaluate predictions against a dataset.
pub fn evaluate(d: &Dataset, p: &PredictionSet, cfg: &EvalConfig) -> Result<EvalReport> {
    cfg.validate()?;
    check_predictions(p, d)?;

    let mut gt_by_image: HashMap<u64, Vec<&Annotation>> = HashMap::new();
    for a in &d.annotations {
        gt_by_image.entry(a.image_id).or_default().push(a);
    }
    let mut det_by_image: HashMap<u64, Vec<&PredictedInstance>> = HashMap::new();
    for inst in &p.instances {
        det_by_image.entry(inst.image_id).or_default().push(inst);
    }
    let category_order: Vec<u64> = d.categories.iter().map(|c| c.id).collect();

    let per_image: Vec<Vec<Scored>> = d
        .images
        .par_iter()
        .map(|img| -> Result<Vec<Scored>> {
            let gts = gt_by_image.get(&img.id).map(Vec::as_slice).unwrap_or(&[]);
            let dets = det_by_image.get(&img.id).map(Vec::as_slice).unwrap_or(&[]);
            let mut out = Vec::new();
            for &cat in &category_order {
                let g: Vec<&Annotation> = gts.iter().copied().filter(|a| a.category_id == cat).collect();
                let dt: Vec<&PredictedInstance> = dets.iter().copied().filter(|x| x.category_id == cat).collect();
                if dt.is_empty() {
                    continue;
                }
                let g_regions: Vec<Region> =
                    g.iter().map(|a| gt_region(a, cfg.mode, img.width, img.height)).collect::<Result<_>>()?;
                let d_regions: Vec<Region> =
                    dt.iter().map(|x| det_region(x, cfg.mode, img.width, img.height)).collect::<Result<_>>()?;
                let ious = iou_matrix(&g_regions, &d_regions);
                let scores: Vec<f64> = dt.iter().map(|x| x.score).collect();
                for (t, &threshold) in cfg.iou_thresholds.iter().enumerate() {
                    let m = match_with_ious(&ious, &scores, g.len(), threshold, cfg.max_detections_per_image);
                    out.extend(m.detections.iter().map(|md| Scored {
                        threshold: t,
                        score: md.score,
                        tp: md.true_positive,
                        category: cat,
                        arrangement: md.gt.map(|gi| g[gi].arrangement),
                    }));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    // Ground-truth counts per group, and arrangements present per category.
    let mut gt_counts: BTreeMap<GroupKey, usize> = BTreeMap::new();
    let mut arrangements_of: BTreeMap<u64, Vec<Arrangement>> = BTreeMap::new();
    for a in &d.annotations {
        let arr = arrangements_of.entry(a.category_id).or_default();
        if !arr.contains(&a.arrangement) {
            arr.push(a.arrangement);
        }
    }
    arrangements_of.values_mut().for_each(|v| v.sort());
    match cfg.grouping {
        Grouping::ByClass => {
            for c in &d.categories {
                gt_counts.insert(GroupKey::Class(c.id), 0);
            }
        }
        Grouping::ByArrangement => {
            for arr in arrangements_of.values().flatten() {
                gt_counts.insert(GroupKey::Arrangement(*arr), 0);
            }
        }
        Grouping::ByClassAndArrangement => {
            for (c, arrs) in &arrangements_of {
                for arr in arrs {
                    gt_counts.insert(GroupKey::ClassArrangement(*c, *arr), 0);
                }
            }
        }
    }
    for a in &d.annotations {
        let key = match cfg.grouping {
            Grouping::ByClass => GroupKey::Class(a.category_id),
            Grouping::ByArrangement => GroupKey::Arrangement(a.arrangement),
            Grouping::ByClassAndArrangement => GroupKey::ClassArrangement(a.category_id, a.arrangement),
        };
        if let Some(n) = gt_counts.get_mut(&key) {
            *n += 1;
        }
    }

    let nt = cfg.iou_thresholds.len();
    let mut pairs: BTreeMap<GroupKey, Vec<Vec<(f64, bool)>>> =
        gt_counts.keys().map(|k| (k.clone(), vec![Vec::new(); nt])).collect();
    let mut push = |key: GroupKey, t: usize, pair: (f64, bool)| {
        if let Some(v) = pairs.get_mut(&key) {
            v[t].push(pair);
        }
    };
    for s in per_image.iter().flatten() {
        match cfg.grouping {
            Grouping::ByClass => push(GroupKey::Class(s.category), s.threshold, (s.score, s.tp)),
            Grouping::ByArrangement | Grouping::ByClassAndArrangement => {
                let key = |arr| match cfg.grouping {
                    Grouping::ByArrangement => GroupKey::Arrangement(arr),
                    _ => GroupKey::ClassArrangement(s.category, arr),
                };
                match s.arrangement {
                    Some(arr) if s.tp => push(key(arr), s.threshold, (s.score, true)),
                    _ => {
                        for arr in arrangements_of.get(&s.category).into_iter().flatten() {
                            push(key(*arr), s.threshold, (s.score, false));
                        }
                    }
                }
            }
        }
    }

    let name_of = |key: &GroupKey| -> String {
        let cat = |id: u64| d.category(id).map(|c| c.name.clone()).unwrap_or_else(|| id.to_string());
        match key {
            GroupKey::Class(c) => cat(*c),
            GroupKey::Arrangement(a) => a.to_string(),
            GroupKey::ClassArrangement(c, a) => format!("{}/{}", cat(*c), a),
        }
    };

    let mut groups = Vec::new();
    for (key, per_threshold) in &pairs {
        let gt_count = gt_counts[key];
        let mut results = Vec::with_capacity(nt);
        for (t, list) in per_threshold.iter().enumerate() {
            let (ap, precision) = match average_precision(list, gt_count) {
                Ok(r) => (Some(r.ap), r.precision),
                Err(Error::GroupEmpty) => (None, vec![0.0; RECALL_POINTS]),
                Err(e) => return Err(e),
            };
            results.push(ThresholdResult {
                threshold: cfg.iou_thresholds[t],
                ap,
                precision,
                true_positives: list.iter().filter(|p| p.1).count(),
                detections: list.len(),
            });
        }
        groups.push(GroupReport { group: name_of(key), gt_count, results });
    }

    let map: Vec<MapEntry> = (0..nt)
        .map(|t| {
            let aps: Vec<f64> = groups.iter().filter_map(|g| g.results[t].ap).collect();
            let map = (!aps.is_empty()).then(|| aps.iter().sum::<f64>() / aps.len() as f64);
            MapEntry { threshold: cfg.iou_thresholds[t], map }
        })
        .collect();
    let map50 = cfg.map50_index().and_then(|t| map[t].map);

    Ok(EvalReport {
        mode: cfg.mode,
        grouping: cfg.grouping,
        fp_attribution: FP_ATTRIBUTION.to_string(),
        iou_thresholds: cfg.iou_thresholds.clone(),
        groups,
        map,
        map50,
        image_count: d.images.len(),
        gt_count: d.annotations.len(),
        detection_count: p.instances.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageStability {
    pub image_id: u64,
    pub a_count: usize,
    pub b_count: usize,
    pub matched: usize,
    pub mean_iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub iou_floor: f64,
    pub matched_fraction: f64,
    pub mean_matched_iou: f64,
    pub matched: usize,
    pub a_count: usize,
    pub b_count: usize,
    pub images: Vec<ImageStability>,
}

impl fmt::Display for StabilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "matched {}/{} (fraction {:.4}), mean IoU {:.4}",
            self.matched,
            self.a_count.max(self.b_count),
            self.matched_fraction,
            self.mean_matched_iou
        )
    }
}

/// Compare two prediction sets for the same dataset by greedily pairing
/// masks per image and category (descending score order of `a`).
pub fn stability_compare(a: &PredictionSet, b: &PredictionSet, d: &Dataset, iou_floor: f64) -> Result<StabilityReport> {
    check_predictions(a, d)?;
    check_predictions(b, d)?;
    let images: Vec<ImageStability> = d
        .images
        .par_iter()
        .map(|img| -> Result<ImageStability> {
            let mut matched = 0;
            let mut iou_sum = 0.0;
            let (mut a_count, mut b_count) = (0, 0);
            for cat in &d.categories {
                let pick = |set: &PredictionSet| -> Vec<PredictedInstance> {
                    set.instances.iter().filter(|x| x.image_id == img.id && x.category_id == cat.id).cloned().collect()
                };
                let (sa, sb) = (pick(a), pick(b));
                a_count += sa.len();
                b_count += sb.len();
                if sa.is_empty() || sb.is_empty() {
                    continue;
                }
                let ma: Vec<RegionMask> = sa
                    .iter()
                    .map(|x| x.segmentation.to_mask(img.width, img.height).map(RegionMask::new))
                    .collect::<Result<_>>()?;
                let mb: Vec<RegionMask> = sb
                    .iter()
                    .map(|x| x.segmentation.to_mask(img.width, img.height).map(RegionMask::new))
                    .collect::<Result<_>>()?;
                let ious: Vec<Vec<f64>> = ma.iter().map(|x| mb.iter().map(|y| x.iou(y)).collect()).collect();
                let scores: Vec<f64> = sa.iter().map(|x| x.score).collect();
                let m = match_with_ious(&ious, &scores, mb.len(), iou_floor, usize::MAX);
                for md in m.detections.iter().filter(|x| x.true_positive) {
                    matched += 1;
                    iou_sum += md.iou;
                }
            }
            Ok(ImageStability {
                image_id: img.id,
                a_count,
                b_count,
                matched,
                mean_iou: if matched > 0 { iou_sum / matched as f64 } else { 0.0 },
            })
        })
        .collect::<Result<_>>()?;
    let matched: usize = images.iter().map(|i| i.matched).sum();
    let a_count: usize = images.iter().map(|i| i.a_count).sum();
    let b_count: usize = images.iter().map(|i| i.b_count).sum();
    let iou_total: f64 = images.iter().map(|i| i.mean_iou * i.matched as f64).sum();
    let denom = a_count.max(b_count);
    Ok(StabilityReport {
        iou_floor,
        matched_fraction: if denom == 0 { 1.0 } else { matched as f64 / denom as f64 },
        mean_matched_iou: if matched == 0 { 0.0 } else { iou_total / matched as f64 },
        matched,
        a_count,
        b_count,
        images,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ap_single_true_positive() {
        assert_eq!(average_precision(&[(0.9, true)], 1).unwrap().ap, 1.0);
    }

    #[test]
    fn ap_without_detections() {
        assert_eq!(average_precision(&[], 3).unwrap().ap, 0.0);
    }

    #[test]
    fn ap_false_positive_first() {
        // Ranks: FP (p=0), TP (p=0.5, r=1). Interpolated precision is 0.5 at every recall point.
        let r = average_precision(&[(0.9, false), (0.8, true)], 1).unwrap();
        assert!((r.ap - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ap_requires_ground_truth() {
        assert_eq!(average_precision(&[(0.5, false)], 0).unwrap_err().code(), "GROUP_EMPTY");
    }

    #[test]
    fn greedy_matching_follows_score_order() {
        // det A (0.9) overlaps GT with IoU 0.6, det B (0.8) with IoU 0.9.
        let ious = vec![vec![0.6], vec![0.9]];
        let m = match_with_ious(&ious, &[0.9, 0.8], 1, 0.5, 100);
        assert_eq!(m.detections[0].index, 0);
        assert!(m.detections[0].true_positive);
        assert!(!m.detections[1].true_positive);
    }

    #[test]
    fn ties_keep_insertion_order_and_max_detections_apply() {
        let ious = vec![vec![1.0], vec![1.0], vec![1.0]];
        let m = match_with_ious(&ious, &[0.5, 0.5, 0.7], 1, 0.5, 2);
        assert_eq!(m.detections.iter().map(|d| d.index).collect::<Vec<_>>(), vec![2, 0]);
        assert_eq!(m.true_positives(), 1);
    }

    #[test]
    fn below_threshold_leaves_gt_free() {
        let ious = vec![vec![0.4, 0.0], vec![0.45, 0.0]];
        let m = match_with_ious(&ious, &[0.9, 0.8], 2, 0.5, 100);
        assert_eq!(m.true_positives(), 0);
        assert_eq!(m.gt_count, 2);
    }

    #[test]
    fn thresholds_must_increase() {
        let cfg = EvalConfig { iou_thresholds: vec![0.5, 0.5], ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = EvalConfig { iou_thresholds: vec![0.0], ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
