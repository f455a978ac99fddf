//! Superpixel benchmark measures: boundary recall, corrected
//! under-segmentation error and achievable segmentation accuracy.

use crate::error::{Error, Result};
use crate::imgio::LabelMap;
use crate::par::{self, Parallelism};

/// Default boundary recall tolerance, in pixels.
pub const DEFAULT_TOLERANCE: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub br: f64,
    pub cue: f64,
    pub asa: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    /// Means over annotations.
    pub br: f64,
    pub cue: f64,
    pub asa: f64,
    pub region_count: usize,
    pub per_annotation: Vec<Scores>,
}

fn check_dims(seg: &LabelMap, gt: &LabelMap) -> Result<()> {
    if (seg.width, seg.height) != (gt.width, gt.height) {
        return Err(Error::dims(
            format!("{}x{}", seg.width, seg.height),
            format!("{}x{}", gt.width, gt.height),
        ));
    }
    Ok(())
}

/// Pixels with a 4-neighbor of a different id.
pub fn boundary_mask(map: &LabelMap) -> Vec<bool> {
    let (w, h) = (map.width, map.height);
    let ids = &map.ids;
    let mut mask = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w && ids[i] != ids[i + 1] {
                mask[i] = true;
                mask[i + 1] = true;
            }
            if y + 1 < h && ids[i] != ids[i + w] {
                mask[i] = true;
                mask[i + w] = true;
            }
        }
    }
    mask
}

/// Square (Chebyshev) dilation of a mask by `r`, as two 1D passes.
fn dilate(mask: &[bool], w: usize, h: usize, r: usize) -> Vec<bool> {
    let pass = |src: &[bool], len: usize, count: usize, stride: usize, step: usize| {
        let mut out = vec![false; src.len()];
        for line in 0..count {
            let base = line * stride;
            // distance to the last set position, scanning both ways
            let mut last: Option<usize> = None;
            for t in 0..len {
                if src[base + t * step] {
                    last = Some(t);
                }
                if matches!(last, Some(l) if t - l <= r) {
                    out[base + t * step] = true;
                }
            }
            last = None;
            for t in (0..len).rev() {
                if src[base + t * step] {
                    last = Some(t);
                }
                if matches!(last, Some(l) if l - t <= r) {
                    out[base + t * step] = true;
                }
            }
        }
        out
    };
    let rows = pass(mask, w, h, w, 1);
    pass(&rows, h, w, 1, w)
}

/// Fraction of ground-truth boundary pixels within Chebyshev distance `tol`
/// of a segmentation boundary pixel. A ground truth without boundaries scores 1.
pub fn boundary_recall(seg: &LabelMap, gt: &LabelMap, tol: usize) -> Result<f64> {
    check_dims(seg, gt)?;
    let gt_b = boundary_mask(gt);
    let total = gt_b.iter().filter(|&&b| b).count();
    if total == 0 {
        return Ok(1.0);
    }
    let near = dilate(&boundary_mask(seg), seg.width, seg.height, tol);
    let hit = gt_b.iter().zip(&near).filter(|(&g, &n)| g && n).count();
    Ok(hit as f64 / total as f64)
}

/// `sum over regions of max overlap with one gt segment`, in pixels.
fn best_overlap(seg: &LabelMap, gt: &LabelMap) -> u64 {
    let mut pairs: Vec<u64> = seg
        .ids
        .iter()
        .zip(&gt.ids)
        .map(|(&s, &g)| (u64::from(s) << 32) | u64::from(g))
        .collect();
    pairs.sort_unstable();
    let mut total = 0u64;
    let mut i = 0;
    while i < pairs.len() {
        let region = pairs[i] >> 32;
        let mut best = 0u64;
        while i < pairs.len() && pairs[i] >> 32 == region {
            let key = pairs[i];
            let start = i;
            while i < pairs.len() && pairs[i] == key {
                i += 1;
            }
            best = best.max((i - start) as u64);
        }
        total += best;
    }
    total
}

/// Pixels of each region outside its best-overlapping gt segment, over `S`.
pub fn cue(seg: &LabelMap, gt: &LabelMap) -> Result<f64> {
    check_dims(seg, gt)?;
    let s = seg.ids.len() as u64;
    Ok((s - best_overlap(seg, gt)) as f64 / s as f64)
}

/// `sum over regions of max_g |sp ∩ g|`, over `S`.
pub fn asa(seg: &LabelMap, gt: &LabelMap) -> Result<f64> {
    check_dims(seg, gt)?;
    Ok(best_overlap(seg, gt) as f64 / seg.ids.len() as f64)
}

pub fn score(seg: &LabelMap, gt: &LabelMap, tol: usize) -> Result<Scores> {
    check_dims(seg, gt)?;
    let s = seg.ids.len() as u64;
    let m = best_overlap(seg, gt);
    Ok(Scores {
        br: boundary_recall(seg, gt, tol)?,
        cue: (s - m) as f64 / s as f64,
        asa: m as f64 / s as f64,
    })
}

/// Scores against every annotation and their arithmetic means.
pub fn evaluate(seg: &LabelMap, gts: &[LabelMap], tol: usize) -> Result<MetricReport> {
    evaluate_with(seg, gts, tol, Parallelism::default())
}

pub fn evaluate_with(seg: &LabelMap, gts: &[LabelMap], tol: usize, mode: Parallelism) -> Result<MetricReport> {
    if gts.is_empty() {
        return Err(Error::Config("at least one ground truth is required".into()));
    }
    let per_annotation = par::map_range(mode, gts.len(), |i| score(seg, &gts[i], tol))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let n = per_annotation.len() as f64;
    let mean = |f: fn(&Scores) -> f64| per_annotation.iter().map(f).sum::<f64>() / n;
    Ok(MetricReport {
        br: mean(|s| s.br),
        cue: mean(|s| s.cue),
        asa: mean(|s| s.asa),
        region_count: seg.region_count(),
        per_annotation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(w: usize, h: usize, f: impl Fn(usize, usize) -> u32) -> LabelMap {
        LabelMap::new(w, h, (0..w * h).map(|i| f(i % w, i / w)).collect()).unwrap()
    }

    #[test]
    fn identical_maps() {
        let m = map(10, 10, |x, y| (x / 3 + 4 * (y / 4)) as u32);
        let s = score(&m, &m, 2).unwrap();
        assert_eq!((s.br, s.cue, s.asa), (1.0, 0.0, 1.0));
    }

    #[test]
    fn single_region_has_no_recall() {
        let gt = map(8, 8, |x, _| u32::from(x >= 4));
        let seg = map(8, 8, |_, _| 0);
        assert_eq!(boundary_recall(&seg, &gt, 2).unwrap(), 0.0);
    }

    #[test]
    fn stripe_offsets() {
        // Boundaries are two pixels thick: gt columns 9 and 10.
        let gt = map(20, 6, |x, _| u32::from(x >= 10));
        let shifted = |d: usize| map(20, 6, move |x, _| u32::from(x >= 10 + d));
        assert_eq!(boundary_recall(&shifted(2), &gt, 2).unwrap(), 1.0);
        // column 10 is 2 away from column 12, column 9 is 3 away
        assert_eq!(boundary_recall(&shifted(3), &gt, 2).unwrap(), 0.5);
        assert_eq!(boundary_recall(&shifted(4), &gt, 2).unwrap(), 0.0);
        assert_eq!(boundary_recall(&shifted(3), &gt, 3).unwrap(), 1.0);
    }

    #[test]
    fn sixty_forty() {
        let gt = map(10, 10, |x, _| u32::from(x >= 6));
        let seg = map(10, 10, |_, _| 5);
        assert!((cue(&seg, &gt).unwrap() - 0.40).abs() < 1e-12);
        assert!((asa(&seg, &gt).unwrap() - 0.60).abs() < 1e-12);
        let inside = map(10, 10, |x, y| (x / 2 + 10 * (y / 5)) as u32);
        let inner = map(10, 10, |x, _| u32::from(x >= 6));
        assert_eq!(cue(&inside, &inner).unwrap(), 0.0);
    }

    #[test]
    fn multi_annotation_mean() {
        let seg = map(8, 8, |x, _| u32::from(x >= 4));
        let single = evaluate(&seg, std::slice::from_ref(&seg), 2).unwrap();
        assert_eq!(single.per_annotation[0], score(&seg, &seg, 2).unwrap());
        let twice = evaluate(&seg, &[seg.clone(), seg.clone()], 2).unwrap();
        assert_eq!((twice.br, twice.cue, twice.asa), (single.br, single.cue, single.asa));
        assert_eq!(twice.region_count, 2);
        assert!(evaluate(&seg, &[], 2).is_err());
    }

    #[test]
    fn hand_built_half_recall() {
        // gt: vertical boundary (columns 3|4) and horizontal boundary (rows 3|4)
        // on the right half only; seg only has the vertical one.
        let seg = map(8, 8, |x, _| u32::from(x >= 4));
        let gt = map(8, 8, |x, y| u32::from(x >= 4) + u32::from(x >= 4 && y >= 4));
        let br = boundary_recall(&seg, &gt, 0).unwrap();
        // gt boundary pixels: columns 3 and 4 over 8 rows = 16, plus rows 3,4 in
        // columns 5..7 = 6 (column 4 already counted). seg recalls the 16.
        assert!((br - 16.0 / 22.0).abs() < 1e-12);
        let r = evaluate(&seg, &[seg.clone(), gt.clone()], 0).unwrap();
        assert!((r.br - (1.0 + 16.0 / 22.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let a = map(4, 4, |_, _| 0);
        let b = map(4, 5, |_, _| 0);
        assert!(boundary_recall(&a, &b, 2).is_err());
        assert!(cue(&a, &b).is_err());
        assert!(asa(&a, &b).is_err());
    }
}
