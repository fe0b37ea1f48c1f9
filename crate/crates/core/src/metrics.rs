//! Rank metrics and descriptive statistics.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// ROC AUC in its Mann–Whitney form: the fraction of (positive, negative)
/// pairs where the positive scores higher, ties counting one half.
///
/// Labels are 0/1 (anything non-zero is a positive). Scores must not be NaN.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            found: labels.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("NaN score".into()));
    }
    let positives = labels.iter().filter(|&&l| l != 0).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedAuc {
            positives,
            negatives,
        });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // U = Σ over positives of (#negatives strictly below + ½ #negatives tied).
    // Counted in half-units so the sum stays an exact integer.
    let mut half_units: u64 = 0;
    let mut negatives_below: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let group = &order[i..j];
        let pos = group.iter().filter(|&&k| labels[k] != 0).count() as u64;
        let neg = group.len() as u64 - pos;
        half_units += pos * (2 * negatives_below + neg);
        negatives_below += neg;
        i = j;
    }
    Ok(half_units as f64 / 2.0 / (positives as f64 * negatives as f64))
}

/// AUC over the concatenation of several users' predictions.
pub fn group_auc<'a>(groups: impl IntoIterator<Item = (&'a [f64], &'a [u8])>) -> Result<f64> {
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (s, l) in groups {
        if s.len() != l.len() {
            return Err(Error::DimensionMismatch {
                expected: s.len(),
                found: l.len(),
            });
        }
        scores.extend_from_slice(s);
        labels.extend_from_slice(l);
    }
    auc(&scores, &labels)
}

/// Count, mean, sample standard deviation and linearly interpolated
/// quantiles.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Summary {
    /// `None` for an empty input.
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_unstable_by(f64::total_cmp);
        let n = v.len();
        let mean = v.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            libm::sqrt(v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64)
        } else {
            0.0
        };
        Some(Summary {
            count: n,
            mean,
            std,
            min: v[0],
            q1: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            q3: quantile_sorted(&v, 0.75),
            max: v[n - 1],
        })
    }
}

/// Linear interpolation between closest ranks; `sorted` must be non-empty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = libm::ceil(pos) as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_reversed() {
        assert_eq!(auc(&[0.9, 0.1], &[1, 0]).unwrap(), 1.0);
        assert_eq!(auc(&[0.1, 0.9], &[1, 0]).unwrap(), 0.0);
    }

    #[test]
    fn all_ties_is_half() {
        assert_eq!(auc(&[0.3; 6], &[1, 0, 1, 0, 0, 0]).unwrap(), 0.5);
    }

    #[test]
    fn single_class_is_undefined() {
        assert_eq!(
            auc(&[0.1, 0.2], &[1, 1]),
            Err(Error::UndefinedAuc {
                positives: 2,
                negatives: 0
            })
        );
        assert_eq!(
            auc(&[], &[]),
            Err(Error::UndefinedAuc {
                positives: 0,
                negatives: 0
            })
        );
    }

    #[test]
    fn mixed_ties() {
        // pos {0.5, 0.7}, neg {0.5, 0.2}: pairs 0.5 (tie), 1, 1, 1 → 3.5 / 4
        assert_eq!(auc(&[0.5, 0.7, 0.5, 0.2], &[1, 1, 0, 0]).unwrap(), 0.875);
    }

    #[test]
    fn group_auc_can_fall_below_per_user() {
        // Each user ranks perfectly, but user A's negative outranks user B's positive.
        let (sa, la) = ([0.9, 0.8], [1u8, 0]);
        let (sb, lb) = ([0.3, 0.2], [1u8, 0]);
        assert_eq!(auc(&sa, &la).unwrap(), 1.0);
        assert_eq!(auc(&sb, &lb).unwrap(), 1.0);
        let g = group_auc([(&sa[..], &la[..]), (&sb[..], &lb[..])]).unwrap();
        assert_eq!(g, 0.75);
        assert_eq!(group_auc([(&sa[..], &la[..])]).unwrap(), 1.0);
    }

    #[test]
    fn summary_stats() {
        let s = Summary::of(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(s.count, 4);
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.median, 2.5);
        assert_eq!(s.q1, 1.75);
        assert_eq!(s.q3, 3.25);
        assert!((s.std - 1.2909944487358056).abs() < 1e-12);
        assert!(Summary::of(&[]).is_none());
        assert_eq!(Summary::of(&[7.0]).unwrap().std, 0.0);
    }
}
