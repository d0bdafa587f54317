//! Evaluation battery: confusion matrix, weighted classification scores
//! (precision/recall/F1, informedness, markedness, MCC), frame-level
//! segment errors (fragmentation, under-fill, over-fill), completeness
//! error breakdowns, and remaining-time error.
//!
//! Zero-denominator ratios contribute 0 throughout, matching common
//! weighted-average reporting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{real, Real};

/// Rows are ground truth, columns are predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn from_sequences(gt: &[usize], pred: &[usize], num_classes: usize) -> Result<Self> {
        check_sequences(gt, pred, num_classes)?;
        let mut counts = vec![0u64; num_classes * num_classes];
        for (&g, &p) in gt.iter().zip(pred) {
            counts[g * num_classes + p] += 1;
        }
        Ok(ConfusionMatrix {
            num_classes,
            counts,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn count(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.num_classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_sum(&self, gt: usize) -> u64 {
        (0..self.num_classes).map(|p| self.count(gt, p)).sum()
    }

    pub fn col_sum(&self, pred: usize) -> u64 {
        (0..self.num_classes).map(|g| self.count(g, pred)).sum()
    }
}

fn check_sequences(gt: &[usize], pred: &[usize], num_classes: usize) -> Result<()> {
    if gt.is_empty() || gt.len() != pred.len() {
        return Err(Error::usage(format!(
            "sequences must have equal non-zero lengths, got {} and {}",
            gt.len(),
            pred.len()
        )));
    }
    if let Some(&bad) = gt.iter().chain(pred).find(|&&c| c >= num_classes) {
        return Err(Error::usage(format!(
            "class index {bad} outside {num_classes} classes"
        )));
    }
    Ok(())
}

/// Ratio with the zero-denominator-contributes-zero convention.
#[inline]
fn ratio<T: Real>(num: u64, den: u64) -> T {
    if den == 0 {
        T::zero()
    } else {
        real::<T>(num as f64) / real(den as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport<T> {
    pub accuracy: T,
    pub precision: T,
    pub recall: T,
    pub f1: T,
    pub informedness: T,
    pub markedness: T,
    pub mcc: T,
}

/// One-vs-rest scores per class, weighted by ground-truth support, plus
/// accuracy and the multiclass Matthews correlation coefficient.
pub fn classification_report<T: Real>(
    gt: &[usize],
    pred: &[usize],
    num_classes: usize,
) -> Result<ClassificationReport<T>> {
    let matrix = ConfusionMatrix::from_sequences(gt, pred, num_classes)?;
    let total = matrix.total();
    let total_t = real::<T>(total as f64);

    let mut precision = T::zero();
    let mut recall = T::zero();
    let mut f1 = T::zero();
    let mut informedness = T::zero();
    let mut markedness = T::zero();
    let mut correct = 0u64;

    for c in 0..num_classes {
        let tp = matrix.count(c, c);
        let support = matrix.row_sum(c);
        let predicted = matrix.col_sum(c);
        let fn_ = support - tp;
        let fp = predicted - tp;
        let tn = total - tp - fn_ - fp;
        correct += tp;

        let p = ratio::<T>(tp, tp + fp);
        let r = ratio::<T>(tp, tp + fn_);
        let inverse_recall = ratio::<T>(tn, tn + fp);
        let inverse_precision = ratio::<T>(tn, tn + fn_);
        let f = if p + r > T::zero() {
            real::<T>(2.0) * p * r / (p + r)
        } else {
            T::zero()
        };

        let weight = real::<T>(support as f64) / total_t;
        precision += weight * p;
        recall += weight * r;
        f1 += weight * f;
        informedness += weight * (r + inverse_recall - T::one());
        markedness += weight * (p + inverse_precision - T::one());
    }

    // Multiclass MCC over the confusion matrix.
    let s = total as f64;
    let c = correct as f64;
    let mut sum_pt = 0.0f64;
    let mut sum_p2 = 0.0f64;
    let mut sum_t2 = 0.0f64;
    for k in 0..num_classes {
        let pk = matrix.col_sum(k) as f64;
        let tk = matrix.row_sum(k) as f64;
        sum_pt += pk * tk;
        sum_p2 += pk * pk;
        sum_t2 += tk * tk;
    }
    let denom = ((s * s - sum_p2) * (s * s - sum_t2)).sqrt();
    let mcc = if denom == 0.0 {
        T::zero()
    } else {
        real::<T>((c * s - sum_pt) / denom)
    };

    Ok(ClassificationReport {
        accuracy: ratio::<T>(correct, total),
        precision,
        recall,
        f1,
        informedness,
        markedness,
        mcc,
    })
}

/// Frame-level segment error rates, each already weighted across classes
/// by ground-truth support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentErrorReport<T> {
    pub fragmentation: T,
    pub under_fill: T,
    pub over_fill: T,
}

/// Maximal runs of `class` in `seq` as `(start, end)` inclusive.
fn runs_of(seq: &[usize], class: usize) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &c) in seq.iter().enumerate() {
        if c == class {
            if start.is_none() {
                start = Some(i);
            }
        } else if let Some(s) = start.take() {
            runs.push((s, i - 1));
        }
    }
    if let Some(s) = start {
        runs.push((s, seq.len() - 1));
    }
    runs
}

/// Segment errors at frame granularity, one-vs-rest per class:
///
/// * fragmentation: frames inside a ground-truth run, mispredicted
///   strictly between that run's first and last correctly-predicted frames;
/// * under-fill: mispredicted frames at a run's head or tail, or the
///   whole run when nothing matched;
/// * over-fill: frames predicted as the class outside any of its
///   ground-truth runs, within a predicted run that touches one.
///
/// Rates are frame counts over total frames, weighted across classes by
/// ground-truth support.
pub fn two_set<T: Real>(
    gt: &[usize],
    pred: &[usize],
    num_classes: usize,
) -> Result<SegmentErrorReport<T>> {
    check_sequences(gt, pred, num_classes)?;
    let n = gt.len();
    let n_t = real::<T>(n as f64);

    let mut fragmentation = T::zero();
    let mut under_fill = T::zero();
    let mut over_fill = T::zero();

    for class in 0..num_classes {
        let support = gt.iter().filter(|&&c| c == class).count();
        if support == 0 {
            continue;
        }
        let mut frag = 0usize;
        let mut under = 0usize;
        let mut over = 0usize;

        let gt_runs = runs_of(gt, class);
        for &(start, end) in &gt_runs {
            let matched: Vec<usize> = (start..=end).filter(|&i| pred[i] == class).collect();
            match (matched.first(), matched.last()) {
                (None, _) | (_, None) => under += end - start + 1,
                (Some(&first), Some(&last)) => {
                    under += (first - start) + (end - last);
                    frag += (first + 1..last).filter(|&i| pred[i] != class).count();
                }
            }
        }
        for &(start, end) in &runs_of(pred, class) {
            let touches = (start..=end).any(|i| gt[i] == class);
            if touches {
                over += (start..=end).filter(|&i| gt[i] != class).count();
            }
        }

        let weight = real::<T>(support as f64) / n_t;
        fragmentation += weight * real::<T>(frag as f64) / n_t;
        under_fill += weight * real::<T>(under as f64) / n_t;
        over_fill += weight * real::<T>(over as f64) / n_t;
    }

    Ok(SegmentErrorReport {
        fragmentation,
        under_fill,
        over_fill,
    })
}

/// Mean absolute error of one curve bin; `mae` is `None` when no frame
/// fell into the bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveBin<T> {
    pub count: usize,
    pub mae: Option<T>,
}

pub const CURVE_BINS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletenessErrorReport<T> {
    pub overall_mae: T,
    /// MAE per ground-truth phase; `None` for phases with no frames.
    pub per_phase_mae: Vec<Option<T>>,
    /// MAE binned by normalized trace time, 100 bins.
    pub curve: Vec<CurveBin<T>>,
}

/// Completeness error overall, per phase, and along normalized duration.
/// `normalized_time` holds `t / T` per frame.
pub fn completeness_error<T: Real>(
    gt_labels: &[T],
    estimates: &[T],
    phases: &[usize],
    normalized_time: &[T],
    num_classes: usize,
) -> Result<CompletenessErrorReport<T>> {
    let n = gt_labels.len();
    if n == 0 || estimates.len() != n || phases.len() != n || normalized_time.len() != n {
        return Err(Error::usage(format!(
            "completeness_error needs equal non-zero lengths, got {n}/{}/{}/{}",
            estimates.len(),
            phases.len(),
            normalized_time.len()
        )));
    }
    if let Some(&bad) = phases.iter().find(|&&p| p >= num_classes) {
        return Err(Error::usage(format!(
            "phase index {bad} outside {num_classes} classes"
        )));
    }

    let mut total = T::zero();
    let mut phase_sums = vec![T::zero(); num_classes];
    let mut phase_counts = vec![0usize; num_classes];
    let mut bin_sums = [T::zero(); CURVE_BINS];
    let mut bin_counts = [0usize; CURVE_BINS];

    for i in 0..n {
        let err = (estimates[i] - gt_labels[i]).abs();
        total += err;
        phase_sums[phases[i]] += err;
        phase_counts[phases[i]] += 1;
        let pos = normalized_time[i].to_f64().unwrap_or(0.0).clamp(0.0, 1.0);
        let bin = ((pos * CURVE_BINS as f64) as usize).min(CURVE_BINS - 1);
        bin_sums[bin] += err;
        bin_counts[bin] += 1;
    }

    Ok(CompletenessErrorReport {
        overall_mae: total / real(n as f64),
        per_phase_mae: (0..num_classes)
            .map(|p| {
                (phase_counts[p] > 0).then(|| phase_sums[p] / real(phase_counts[p] as f64))
            })
            .collect(),
        curve: (0..CURVE_BINS)
            .map(|b| CurveBin {
                count: bin_counts[b],
                mae: (bin_counts[b] > 0).then(|| bin_sums[b] / real(bin_counts[b] as f64)),
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainingTimeReport<T> {
    /// Mean absolute error in seconds over frames with a defined estimate;
    /// `None` when every report was unknown.
    pub overall_mean_abs_s: Option<T>,
    pub per_phase_mean_abs_s: Vec<Option<T>>,
    pub evaluated_frames: usize,
    pub unknown_frames: usize,
}

/// Remaining-time error against the ground truth `T - t` per frame.
/// Unknown estimates are excluded from the averages and counted.
pub fn remaining_time_error<T: Real>(
    gt_remaining_s: &[T],
    estimates_s: &[Option<T>],
    phases: &[usize],
    num_classes: usize,
) -> Result<RemainingTimeReport<T>> {
    let n = gt_remaining_s.len();
    if n == 0 || estimates_s.len() != n || phases.len() != n {
        return Err(Error::usage(format!(
            "remaining_time_error needs equal non-zero lengths, got {n}/{}/{}",
            estimates_s.len(),
            phases.len()
        )));
    }
    if let Some(&bad) = phases.iter().find(|&&p| p >= num_classes) {
        return Err(Error::usage(format!(
            "phase index {bad} outside {num_classes} classes"
        )));
    }

    let mut total = T::zero();
    let mut evaluated = 0usize;
    let mut unknown = 0usize;
    let mut phase_sums = vec![T::zero(); num_classes];
    let mut phase_counts = vec![0usize; num_classes];
    for i in 0..n {
        match estimates_s[i] {
            Some(est) => {
                let err = (est - gt_remaining_s[i]).abs();
                total += err;
                evaluated += 1;
                phase_sums[phases[i]] += err;
                phase_counts[phases[i]] += 1;
            }
            None => unknown += 1,
        }
    }

    Ok(RemainingTimeReport {
        overall_mean_abs_s: (evaluated > 0).then(|| total / real(evaluated as f64)),
        per_phase_mean_abs_s: (0..num_classes)
            .map(|p| {
                (phase_counts[p] > 0).then(|| phase_sums[p] / real(phase_counts[p] as f64))
            })
            .collect(),
        evaluated_frames: evaluated,
        unknown_frames: unknown,
    })
}
