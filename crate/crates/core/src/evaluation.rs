//! Block-level confusion counts and the derived precision, recall and accuracy.

use std::iter::Sum;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::Raster;
use crate::periodic_blocks::{BlockLabel, CropSpec, Periodicity};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionCounts {
    /// Defective blocks flagged defective.
    pub tp: u64,
    /// Defect-free blocks left unflagged.
    pub tn: u64,
    /// Defect-free blocks flagged defective.
    pub fp: u64,
    /// Defective blocks missed.
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn metrics(&self) -> Metrics {
        Metrics::from_counts(self)
    }
}

impl Add for ConfusionCounts {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            tp: self.tp + rhs.tp,
            tn: self.tn + rhs.tn,
            fp: self.fp + rhs.fp,
            fn_: self.fn_ + rhs.fn_,
        }
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
}

impl Metrics {
    /// Ratios of the counts.
    ///
    /// Empty denominators: precision is 1 when there was nothing to find
    /// (`tp + fn == 0`) and 0 otherwise; recall is 1 when nothing was flagged
    /// (`tp + fp == 0`) and 0 otherwise; accuracy over zero blocks is 1.
    pub fn from_counts(c: &ConfusionCounts) -> Self {
        let ratio = |num: u64, den: u64, empty: f64| if den == 0 { empty } else { num as f64 / den as f64 };
        let nothing_to_find = c.tp + c.fn_ == 0;
        let nothing_flagged = c.tp + c.fp == 0;
        Self {
            precision: ratio(c.tp, c.tp + c.fp, if nothing_to_find { 1.0 } else { 0.0 }),
            recall: ratio(c.tp, c.tp + c.fn_, if nothing_flagged { 1.0 } else { 0.0 }),
            accuracy: ratio(c.tp + c.tn, c.total(), 1.0),
        }
    }
}

/// True block labels of `crop`: a block is defective when the fraction of its
/// pixels set in `gt_mask` exceeds `min_overlap`.
pub fn ground_truth_labels<T: Scalar>(
    gt_mask: &Raster<T>,
    crop: &CropSpec,
    period: Periodicity,
    min_overlap: f64,
    image_dims: (usize, usize),
) -> Result<Vec<BlockLabel>> {
    if gt_mask.dims() != image_dims {
        return Err(Error::argument(format!(
            "ground truth {:?} does not match image {:?}",
            gt_mask.dims(),
            image_dims
        )));
    }
    if !(0.0..=1.0).contains(&min_overlap) {
        return Err(Error::argument(format!("min_overlap {min_overlap} outside [0, 1]")));
    }
    if crop.row_offset + crop.height > image_dims.0 || crop.col_offset + crop.width > image_dims.1 {
        return Err(Error::argument("crop exceeds the ground truth mask"));
    }
    let rows = crop.height / period.rows;
    let cols = crop.width / period.cols;
    let area = period.area() as f64;
    let half = T::of(0.5);
    let mut labels = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let (r0, c0, h, w) = crop.block_rect(period, i, j);
            let positive: usize = (r0..r0 + h)
                .map(|r| gt_mask.row(r)[c0..c0 + w].iter().filter(|&&v| v > half).count())
                .sum();
            labels.push(if positive as f64 / area > min_overlap {
                BlockLabel::Defective
            } else {
                BlockLabel::DefectFree
            });
        }
    }
    Ok(labels)
}

/// Confusion counts and metrics of `predicted` against `truth`.
pub fn score(predicted: &[BlockLabel], truth: &[BlockLabel]) -> Result<(ConfusionCounts, Metrics)> {
    if predicted.len() != truth.len() {
        return Err(Error::argument(format!(
            "{} predictions vs {} truth labels",
            predicted.len(),
            truth.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (p, t) in predicted.iter().zip(truth) {
        match (p.is_defective(), t.is_defective()) {
            (true, true) => c.tp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok((c, c.metrics()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::periodic_blocks::{four_corner_crops, Corner};
    use proptest::prelude::*;

    use BlockLabel::{DefectFree as F, Defective as D};

    fn counts(tp: u64, tn: u64, fp: u64, fn_: u64) -> ConfusionCounts {
        ConfusionCounts { tp, tn, fp, fn_ }
    }

    #[test]
    fn hand_computed_counts() {
        let mut predicted = vec![D; 3];
        predicted.extend(vec![F; 97]);
        let mut truth = vec![D; 4];
        truth.extend(vec![F; 96]);
        let (c, m) = score(&predicted, &truth).unwrap();
        assert_eq!(c, counts(3, 96, 0, 1));
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.recall, 0.75);
        assert_eq!(m.accuracy, 0.99);
    }

    #[test]
    fn perfect_predictions() {
        let truth = vec![D, F, F, D, F];
        let (_, m) = score(&truth, &truth).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert!(score(&truth, &truth[..4]).is_err());
    }

    #[test]
    fn empty_denominators() {
        let clean = Metrics::from_counts(&counts(0, 10, 0, 0));
        assert_eq!((clean.precision, clean.recall, clean.accuracy), (1.0, 1.0, 1.0));
        let missed = Metrics::from_counts(&counts(0, 8, 0, 2));
        assert_eq!((missed.precision, missed.recall), (0.0, 0.0));
        let false_alarm = Metrics::from_counts(&counts(0, 8, 2, 0));
        assert_eq!((false_alarm.precision, false_alarm.recall), (0.0, 0.0));
        assert_eq!(Metrics::from_counts(&ConfusionCounts::default()).accuracy, 1.0);
    }

    #[test]
    fn pooled_counts() {
        let pooled = counts(1, 9, 0, 0) + counts(0, 8, 1, 1);
        let m = pooled.metrics();
        assert_eq!((m.precision, m.recall), (0.5, 0.5));
    }

    #[test]
    fn truth_labels_from_mask() {
        let period = Periodicity::new(10, 10).unwrap();
        let crop = four_corner_crops(20, 30, period).unwrap()[0];
        assert_eq!(crop.corner, Corner::TopLeft);

        let empty = Raster::<f64>::zeros(20, 30);
        let labels = ground_truth_labels(&empty, &crop, period, 0.0, (20, 30)).unwrap();
        assert!(labels.iter().all(|l| *l == F));

        let full_block = Raster::from_fn(20, 30, |r, c| if r >= 10 && (10..20).contains(&c) { 1.0 } else { 0.0 });
        let labels = ground_truth_labels(&full_block, &crop, period, 0.0, (20, 30)).unwrap();
        assert_eq!(labels, vec![F, F, F, F, D, F]);

        // 90 pixels in block (0,0), 10 in block (0,1)
        let straddle = Raster::from_fn(20, 30, |r, c| if r < 10 && (1..11).contains(&c) { 1.0 } else { 0.0 });
        let labels = ground_truth_labels(&straddle, &crop, period, 0.5, (20, 30)).unwrap();
        assert_eq!(labels, vec![D, F, F, F, F, F]);
        let labels = ground_truth_labels(&straddle, &crop, period, 0.0, (20, 30)).unwrap();
        assert_eq!(labels, vec![D, D, F, F, F, F]);

        assert!(ground_truth_labels(&empty, &crop, period, 0.0, (20, 31)).is_err());
        assert!(ground_truth_labels(&empty, &crop, period, 1.5, (20, 30)).is_err());
    }

    proptest! {
        #[test]
        fn metrics_identities(labels in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..200), k in 1usize..5) {
            let lab = |b: bool| if b { D } else { F };
            let predicted: Vec<_> = labels.iter().map(|(p, _)| lab(*p)).collect();
            let truth: Vec<_> = labels.iter().map(|(_, t)| lab(*t)).collect();
            let (c, m) = score(&predicted, &truth).unwrap();
            prop_assert_eq!(c.total() as usize, labels.len());
            prop_assert!((m.accuracy - (1.0 - (c.fp + c.fn_) as f64 / c.total() as f64)).abs() <= 2.0 * f64::EPSILON);

            let mut rev_p = predicted.clone();
            let mut rev_t = truth.clone();
            rev_p.reverse();
            rev_t.reverse();
            prop_assert_eq!(score(&rev_p, &rev_t).unwrap().0, c);

            let pooled: ConfusionCounts = std::iter::repeat_n(c, k).sum();
            prop_assert_eq!(pooled.metrics(), m);
        }
    }
}
