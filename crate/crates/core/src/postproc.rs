//! Probability-map post-processing: binary thresholding, median filtering,
//! connected components to merged bounding boxes, and IoU scoring against
//! ground truth.

use std::fmt::Write as _;

use crate::dataset::GroundTruthMask;
use crate::error::{Error, Result};
use crate::localize::ProbabilityMap;

/// Default binary threshold and median-filter kernel (map-grid cells).
pub const DEFAULT_THRESHOLD: f32 = 0.5;
pub const DEFAULT_MEDIAN_K: usize = 5;

/// IoU above which a localization counts as correct (strict).
pub const IOU_CORRECT: f64 = 0.5;

/// Axis-aligned pixel rectangle, half-open: [top, bottom) x [left, right).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundingBox {
    pub top: usize,
    pub left: usize,
    pub bottom: usize,
    pub right: usize,
}

impl BoundingBox {
    pub fn new(top: usize, left: usize, bottom: usize, right: usize) -> Result<Self> {
        if bottom <= top || right <= left {
            return Err(Error::Parameter(format!(
                "degenerate box ({top},{left},{bottom},{right})"
            )));
        }
        Ok(BoundingBox { top, left, bottom, right })
    }

    pub fn area(&self) -> u64 {
        (self.bottom - self.top) as u64 * (self.right - self.left) as u64
    }

    /// Positive-area intersection; touching edges do not intersect.
    pub fn intersection(&self, other: &BoundingBox) -> Option<BoundingBox> {
        let top = self.top.max(other.top);
        let left = self.left.max(other.left);
        let bottom = self.bottom.min(other.bottom);
        let right = self.right.min(other.right);
        if bottom > top && right > left {
            Some(BoundingBox { top, left, bottom, right })
        } else {
            None
        }
    }

    pub fn union_box(&self, other: &BoundingBox) -> BoundingBox {
        BoundingBox {
            top: self.top.min(other.top),
            left: self.left.min(other.left),
            bottom: self.bottom.max(other.bottom),
            right: self.right.max(other.right),
        }
    }
}

/// area(a ∩ b) / area(a ∪ b); 0 when disjoint.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = match a.intersection(b) {
        Some(i) => i.area(),
        None => return 0.0,
    };
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

/// Thresholded probability map; inherits the source map's geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryMap {
    pub rows: usize,
    pub cols: usize,
    pub stride: usize,
    pub window: usize,
    bits: Vec<bool>,
}

impl BinaryMap {
    pub fn new(rows: usize, cols: usize, stride: usize, window: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(Error::Shape(format!(
                "binary map {rows}x{cols} expects {} bits, got {}",
                rows * cols,
                bits.len()
            )));
        }
        Ok(BinaryMap { rows, cols, stride, window, bits })
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.cols + col]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// 0/255 raster for PGM export.
    pub fn to_image(&self) -> crate::color::ImageBuffer {
        crate::color::ImageBuffer::new(
            self.rows,
            self.cols,
            1,
            crate::color::ColorSpace::ScalarMask,
            self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        )
        .expect("binary map dims")
    }
}

/// Bit set iff score > t (strict).
pub fn threshold(map: &ProbabilityMap, t: f32) -> BinaryMap {
    BinaryMap {
        rows: map.rows,
        cols: map.cols,
        stride: map.stride,
        window: map.window,
        bits: map.scores().iter().map(|&s| s > t).collect(),
    }
}

/// Majority vote over the k x k neighborhood with edge replication
/// (out-of-bounds coordinates clamp to the nearest cell, so border cells
/// count their own value multiple times). k must be odd.
pub fn median_filter(map: &BinaryMap, k: usize) -> Result<BinaryMap> {
    if k.is_multiple_of(2) || k == 0 {
        return Err(Error::Parameter(format!("median kernel must be odd, got {k}")));
    }
    if k == 1 {
        return Ok(map.clone());
    }
    let half = (k / 2) as isize;
    let (rows, cols) = (map.rows, map.cols);
    let mut bits = vec![false; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let mut ones = 0usize;
            for dr in -half..=half {
                for dc in -half..=half {
                    let nr = (r as isize + dr).clamp(0, rows as isize - 1) as usize;
                    let nc = (c as isize + dc).clamp(0, cols as isize - 1) as usize;
                    if map.get(nr, nc) {
                        ones += 1;
                    }
                }
            }
            bits[r * cols + c] = ones * 2 > k * k;
        }
    }
    BinaryMap::new(rows, cols, map.stride, map.window, bits)
}

/// 8-connected components of set cells; each component's tight cell rectangle
/// is mapped to pixels via (r*stride, c*stride, r_max*stride + window,
/// c_max*stride + window), then overlapping boxes are merged into their union
/// until no two intersect.
pub fn components_to_boxes(map: &BinaryMap) -> Vec<BoundingBox> {
    let (rows, cols) = (map.rows, map.cols);
    let mut visited = vec![false; rows * cols];
    let mut boxes = Vec::new();
    let mut stack = Vec::new();
    for start in 0..rows * cols {
        if visited[start] || !map.bits[start] {
            continue;
        }
        let (mut r_min, mut r_max) = (rows, 0usize);
        let (mut c_min, mut c_max) = (cols, 0usize);
        visited[start] = true;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            let (r, c) = (idx / cols, idx % cols);
            r_min = r_min.min(r);
            r_max = r_max.max(r);
            c_min = c_min.min(c);
            c_max = c_max.max(c);
            for dr in -1isize..=1 {
                for dc in -1isize..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let nr = r as isize + dr;
                    let nc = c as isize + dc;
                    if nr < 0 || nr >= rows as isize || nc < 0 || nc >= cols as isize {
                        continue;
                    }
                    let nidx = nr as usize * cols + nc as usize;
                    if map.bits[nidx] && !visited[nidx] {
                        visited[nidx] = true;
                        stack.push(nidx);
                    }
                }
            }
        }
        boxes.push(BoundingBox {
            top: r_min * map.stride,
            left: c_min * map.stride,
            bottom: r_max * map.stride + map.window,
            right: c_max * map.stride + map.window,
        });
    }
    merge_overlapping(boxes)
}

/// Replace any intersecting pair by its union until a fixed point.
pub fn merge_overlapping(mut boxes: Vec<BoundingBox>) -> Vec<BoundingBox> {
    loop {
        let mut merged_any = false;
        'outer: for i in 0..boxes.len() {
            for j in i + 1..boxes.len() {
                if boxes[i].intersection(&boxes[j]).is_some() {
                    let merged = boxes[i].union_box(&boxes[j]);
                    boxes.swap_remove(j);
                    boxes[i] = merged;
                    merged_any = true;
                    break 'outer;
                }
            }
        }
        if !merged_any {
            return boxes;
        }
    }
}

/// Outcome of scoring one image.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Verdict {
    pub correct: bool,
    pub best_iou: f64,
}

/// Tight bounding box of the mask's set pixels.
pub fn mask_bounding_box(mask: &GroundTruthMask) -> Result<BoundingBox> {
    let (mut r_min, mut r_max, mut c_min, mut c_max) = (mask.height, 0usize, mask.width, 0usize);
    let mut any = false;
    for r in 0..mask.height {
        for c in 0..mask.width {
            if mask.get(r, c) {
                any = true;
                r_min = r_min.min(r);
                r_max = r_max.max(r);
                c_min = c_min.min(c);
                c_max = c_max.max(c);
            }
        }
    }
    if !any {
        return Err(Error::Data("mask has no tampered pixels".into()));
    }
    BoundingBox::new(r_min, c_min, r_max + 1, c_max + 1)
}

/// Best IoU of any predicted box against the mask's tight bounding box;
/// correct iff strictly above 0.5.
pub fn evaluate(predicted: &[BoundingBox], mask: &GroundTruthMask) -> Result<Verdict> {
    let gt = mask_bounding_box(mask)?;
    let best_iou = predicted
        .iter()
        .map(|b| iou(b, &gt))
        .fold(0.0f64, f64::max);
    Ok(Verdict {
        correct: best_iou > IOU_CORRECT,
        best_iou,
    })
}

/// Fraction of correct verdicts.
pub fn corpus_accuracy(results: &[bool]) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::Data("accuracy over an empty result list".into()));
    }
    Ok(results.iter().filter(|&&c| c).count() as f64 / results.len() as f64)
}

// ---------------------------------------------------------------------------
// Result line format: one line per image, diff-friendly:
//   <image-id> <n> <top,left,bottom,right>{n} <best_iou:.6> <correct|incorrect>
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct ResultLine {
    pub image_id: u32,
    pub boxes: Vec<BoundingBox>,
    pub best_iou: f64,
    pub correct: bool,
}

pub fn format_result_line(line: &ResultLine) -> String {
    let mut s = format!("{} {}", line.image_id, line.boxes.len());
    for b in &line.boxes {
        write!(s, " {},{},{},{}", b.top, b.left, b.bottom, b.right).unwrap();
    }
    write!(
        s,
        " {:.6} {}",
        line.best_iou,
        if line.correct { "correct" } else { "incorrect" }
    )
    .unwrap();
    s
}

pub fn parse_result_line(text: &str) -> Result<ResultLine> {
    let mut fields = text.split_whitespace();
    let mut next = |what: &str| {
        fields
            .next()
            .ok_or_else(|| Error::format(format!("result line missing {what}")))
    };
    let image_id: u32 = next("image id")?
        .parse()
        .map_err(|_| Error::format("bad image id"))?;
    let n: usize = next("box count")?
        .parse()
        .map_err(|_| Error::format("bad box count"))?;
    let mut boxes = Vec::with_capacity(n);
    for _ in 0..n {
        let quad = next("box")?;
        let parts: Vec<&str> = quad.split(',').collect();
        if parts.len() != 4 {
            return Err(Error::format(format!("bad box quadruple {quad:?}")));
        }
        let mut vals = [0usize; 4];
        for (v, p) in vals.iter_mut().zip(&parts) {
            *v = p
                .parse()
                .map_err(|_| Error::format(format!("bad box coordinate {p:?}")))?;
        }
        boxes.push(BoundingBox::new(vals[0], vals[1], vals[2], vals[3])?);
    }
    let best_iou: f64 = next("best iou")?
        .parse()
        .map_err(|_| Error::format("bad best_iou"))?;
    let correct = match next("verdict")? {
        "correct" => true,
        "incorrect" => false,
        other => return Err(Error::format(format!("bad verdict {other:?}"))),
    };
    if fields.next().is_some() {
        return Err(Error::format("trailing fields on result line"));
    }
    Ok(ResultLine { image_id, boxes, best_iou, correct })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Pcg32;

    fn map_from(rows: usize, cols: usize, scores: Vec<f32>) -> ProbabilityMap {
        ProbabilityMap::new(rows, cols, 2, 32, scores).unwrap()
    }

    fn bmap(rows: usize, cols: usize, stride: usize, set: &[(usize, usize)]) -> BinaryMap {
        let mut bits = vec![false; rows * cols];
        for &(r, c) in set {
            bits[r * cols + c] = true;
        }
        BinaryMap::new(rows, cols, stride, 32, bits).unwrap()
    }

    #[test]
    fn threshold_is_strict() {
        let map = map_from(2, 2, vec![0.2, 0.7, 0.5, 0.8]);
        let bin = threshold(&map, 0.5);
        assert_eq!(bin.bits(), &[false, true, false, true]);
        let all = threshold(&map_from(1, 3, vec![0.9, 0.9, 0.9]), 0.5);
        assert_eq!(all.count_ones(), 3);
    }

    #[test]
    fn median_rejects_even_kernel() {
        let bin = bmap(3, 3, 2, &[]);
        assert!(matches!(median_filter(&bin, 4), Err(Error::Parameter(_))));
    }

    #[test]
    fn median_k1_is_identity_and_constant_maps_unchanged() {
        let bin = bmap(4, 4, 2, &[(1, 1), (2, 3)]);
        assert_eq!(median_filter(&bin, 1).unwrap(), bin);
        let solid = BinaryMap::new(4, 4, 2, 32, vec![true; 16]).unwrap();
        assert_eq!(median_filter(&solid, 3).unwrap(), solid);
        let empty = bmap(4, 4, 2, &[]);
        assert_eq!(median_filter(&empty, 3).unwrap(), empty);
    }

    #[test]
    fn median_clears_isolated_bit() {
        let bin = bmap(5, 5, 2, &[(2, 2)]);
        assert_eq!(median_filter(&bin, 3).unwrap().count_ones(), 0);
    }

    /// Independent brute-force majority with explicit edge replication.
    fn median_oracle(map: &BinaryMap, k: usize) -> BinaryMap {
        let half = k as isize / 2;
        let mut bits = vec![false; map.rows * map.cols];
        for r in 0..map.rows {
            for c in 0..map.cols {
                let mut votes = Vec::with_capacity(k * k);
                for dr in -half..=half {
                    for dc in -half..=half {
                        let nr = (r as isize + dr).max(0).min(map.rows as isize - 1) as usize;
                        let nc = (c as isize + dc).max(0).min(map.cols as isize - 1) as usize;
                        votes.push(map.get(nr, nc));
                    }
                }
                votes.sort_unstable();
                bits[r * map.cols + c] = votes[votes.len() / 2];
            }
        }
        BinaryMap::new(map.rows, map.cols, map.stride, map.window, bits).unwrap()
    }

    #[test]
    fn median_agrees_with_brute_force_oracle() {
        let mut rng = Pcg32::new(99);
        for case in 0..100 {
            let rows = 3 + rng.below(12);
            let cols = 3 + rng.below(12);
            let bits: Vec<bool> = (0..rows * cols).map(|_| rng.next_f32() < 0.4).collect();
            let map = BinaryMap::new(rows, cols, 2, 32, bits).unwrap();
            for k in [3usize, 5] {
                let got = median_filter(&map, k).unwrap();
                let want = median_oracle(&map, k);
                assert_eq!(got, want, "case {case} k {k}");
            }
        }
    }

    #[test]
    fn block_survives_median_per_oracle() {
        // 5x5 solid block: the filter and the brute-force oracle agree cell
        // by cell, including the corners the majority vote erodes.
        let set: Vec<(usize, usize)> = (5..10)
            .flat_map(|r| (5..10).map(move |c| (r, c)))
            .collect();
        let map = bmap(20, 20, 2, &set);
        let got = median_filter(&map, 3).unwrap();
        assert_eq!(got, median_oracle(&map, 3));
        // Interior cells are untouched.
        for r in 6..9 {
            for c in 6..9 {
                assert!(got.get(r, c));
            }
        }
    }

    #[test]
    fn empty_map_gives_no_boxes() {
        assert!(components_to_boxes(&bmap(6, 6, 2, &[])).is_empty());
    }

    #[test]
    fn single_cell_box_coordinates() {
        let boxes = components_to_boxes(&bmap(12, 12, 2, &[(0, 0)]));
        assert_eq!(boxes, vec![BoundingBox { top: 0, left: 0, bottom: 32, right: 32 }]);
        let boxes = components_to_boxes(&bmap(12, 12, 4, &[(3, 5)]));
        assert_eq!(boxes, vec![BoundingBox { top: 12, left: 20, bottom: 44, right: 52 }]);
    }

    #[test]
    fn disjoint_components_merge_into_one_when_pixel_boxes_overlap() {
        // Cells (0,0) and (10,10) at stride 2: pixel boxes (0,0,32,32) and
        // (20,20,52,52) overlap, so they merge into one union box.
        let boxes = components_to_boxes(&bmap(20, 20, 2, &[(0, 0), (10, 10)]));
        assert_eq!(boxes, vec![BoundingBox { top: 0, left: 0, bottom: 52, right: 52 }]);
    }

    #[test]
    fn far_components_stay_separate() {
        let boxes = components_to_boxes(&bmap(40, 40, 2, &[(0, 0), (30, 30)]));
        assert_eq!(boxes.len(), 2);
        assert!(boxes.contains(&BoundingBox { top: 0, left: 0, bottom: 32, right: 32 }));
        assert!(boxes.contains(&BoundingBox { top: 60, left: 60, bottom: 92, right: 92 }));
    }

    #[test]
    fn eight_connectivity_joins_diagonals() {
        let boxes = components_to_boxes(&bmap(30, 30, 2, &[(3, 3), (4, 4), (5, 5)]));
        assert_eq!(boxes.len(), 1);
        assert_eq!(boxes[0], BoundingBox { top: 6, left: 6, bottom: 42, right: 42 });
    }

    #[test]
    fn merge_reaches_a_fixed_point_with_disjoint_output() {
        let mut rng = Pcg32::new(17);
        for _ in 0..50 {
            let boxes: Vec<BoundingBox> = (0..8)
                .map(|_| {
                    let top = rng.below(50);
                    let left = rng.below(50);
                    BoundingBox::new(top, left, top + 1 + rng.below(30), left + 1 + rng.below(30))
                        .unwrap()
                })
                .collect();
            let merged = merge_overlapping(boxes);
            // No pair intersects.
            for i in 0..merged.len() {
                for j in i + 1..merged.len() {
                    assert!(merged[i].intersection(&merged[j]).is_none());
                }
            }
            // Fixed point.
            assert_eq!(merge_overlapping(merged.clone()), merged);
        }
    }

    #[test]
    fn iou_known_values() {
        let a = BoundingBox::new(0, 0, 10, 10).unwrap();
        assert_eq!(iou(&a, &a), 1.0);
        let disjoint = BoundingBox::new(20, 20, 25, 25).unwrap();
        assert_eq!(iou(&a, &disjoint), 0.0);
        let b = BoundingBox::new(0, 5, 10, 15).unwrap();
        assert!((iou(&a, &b) - 1.0 / 3.0).abs() <= 1e-12);
    }

    #[test]
    fn iou_is_symmetric_and_bounded() {
        let mut rng = Pcg32::new(4);
        for _ in 0..200 {
            let mk = |rng: &mut Pcg32| {
                let top = rng.below(40);
                let left = rng.below(40);
                BoundingBox::new(top, left, top + 1 + rng.below(30), left + 1 + rng.below(30))
                    .unwrap()
            };
            let a = mk(&mut rng);
            let b = mk(&mut rng);
            let ab = iou(&a, &b);
            assert_eq!(ab, iou(&b, &a));
            assert!((0.0..=1.0).contains(&ab));
        }
    }

    #[test]
    fn evaluate_against_mask() {
        let mut mask = GroundTruthMask::zeros(40, 40);
        for r in 0..10 {
            for c in 0..10 {
                mask.set(r, c, true);
            }
        }
        // Exact prediction.
        let exact = BoundingBox::new(0, 0, 10, 10).unwrap();
        let v = evaluate(&[exact], &mask).unwrap();
        assert!(v.correct);
        assert_eq!(v.best_iou, 1.0);
        // No predictions.
        let v = evaluate(&[], &mask).unwrap();
        assert!(!v.correct);
        assert_eq!(v.best_iou, 0.0);
        // Half coverage is exactly 0.5 — NOT correct under the strict rule.
        let half = BoundingBox::new(0, 0, 10, 5).unwrap();
        let v = evaluate(&[half], &mask).unwrap();
        assert_eq!(v.best_iou, 0.5);
        assert!(!v.correct);
    }

    #[test]
    fn evaluate_rejects_empty_mask() {
        let mask = GroundTruthMask::zeros(8, 8);
        let b = BoundingBox::new(0, 0, 4, 4).unwrap();
        assert!(matches!(evaluate(&[b], &mask), Err(Error::Data(_))));
    }

    #[test]
    fn ground_truth_boxes_score_perfectly() {
        // Harness check: feeding each mask's own tight box back through the
        // scorer makes every image correct.
        let mut rng = Pcg32::new(8);
        let mut verdicts = Vec::new();
        for _ in 0..10 {
            let mut mask = GroundTruthMask::zeros(64, 64);
            let top = rng.below(30);
            let left = rng.below(30);
            for r in top..top + 10 + rng.below(20) {
                for c in left..left + 10 + rng.below(20) {
                    mask.set(r, c, true);
                }
            }
            let gt = mask_bounding_box(&mask).unwrap();
            verdicts.push(evaluate(&[gt], &mask).unwrap().correct);
        }
        assert_eq!(corpus_accuracy(&verdicts).unwrap(), 1.0);
    }

    #[test]
    fn corpus_accuracy_fraction() {
        assert_eq!(corpus_accuracy(&[true, true]).unwrap(), 1.0);
        let nine_of_eleven: Vec<bool> = (0..11).map(|i| i < 9).collect();
        assert!((corpus_accuracy(&nine_of_eleven).unwrap() - 9.0 / 11.0).abs() <= 1e-12);
        assert!(matches!(corpus_accuracy(&[]), Err(Error::Data(_))));
    }

    #[test]
    fn result_line_round_trip() {
        let line = ResultLine {
            image_id: 7,
            boxes: vec![
                BoundingBox::new(0, 0, 32, 32).unwrap(),
                BoundingBox::new(10, 20, 52, 70).unwrap(),
            ],
            best_iou: 0.728441,
            correct: true,
        };
        let text = format_result_line(&line);
        assert_eq!(text, "7 2 0,0,32,32 10,20,52,70 0.728441 correct");
        let parsed = parse_result_line(&text).unwrap();
        assert_eq!(parsed, line);
        assert_eq!(format_result_line(&parsed), text);
    }

    #[test]
    fn result_line_rejects_garbage() {
        assert!(parse_result_line("7 1 0,0,32 0.5 correct").is_err());
        assert!(parse_result_line("7 0 0.5 maybe").is_err());
        assert!(parse_result_line("").is_err());
    }
}
