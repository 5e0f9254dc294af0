//! Exact greedy split search over presorted feature values.

use rayon::prelude::*;

use super::GbdtParams;
use crate::Scalar;

/// Rows per node below which features are scanned sequentially.
const PARALLEL_MIN_WORK: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate<T> {
    pub feature: usize,
    pub threshold: T,
    pub gain: T,
    pub(crate) n_left: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SplitRules<T> {
    pub lambda: T,
    pub min_gain: T,
    pub min_samples_leaf: usize,
}

impl<T: Scalar> SplitRules<T> {
    pub fn from_params(p: &GbdtParams) -> Self {
        Self {
            lambda: T::lit(p.lambda),
            min_gain: T::lit(p.min_gain),
            min_samples_leaf: p.min_samples_leaf.max(1),
        }
    }

    #[inline]
    fn score(&self, g: T, n: usize) -> T {
        g * g / (T::from_usize_lossy(n) + self.lambda)
    }
}

/// Midpoint strictly below `hi` so that `lo` routes left and `hi` right.
fn midpoint<T: Scalar>(lo: T, hi: T) -> T {
    let m = lo + (hi - lo) / T::lit(2.0);
    if m >= hi {
        lo
    } else {
        m
    }
}

/// Best split of one feature given the node's rows sorted by that feature.
fn scan_feature<T: Scalar>(
    feature: usize,
    sorted: &[usize],
    values: &[T],
    residuals: &[T],
    total: T,
    rules: &SplitRules<T>,
) -> Option<SplitCandidate<T>> {
    let n = sorted.len();
    let msl = rules.min_samples_leaf;
    if n < 2 * msl {
        return None;
    }
    let parent = rules.score(total, n);
    let mut left = T::zero();
    let mut best: Option<SplitCandidate<T>> = None;
    for i in 0..n - 1 {
        left += residuals[sorted[i]];
        let n_left = i + 1;
        let (lo, hi) = (values[sorted[i]], values[sorted[i + 1]]);
        if lo >= hi || n_left < msl || n - n_left < msl {
            continue;
        }
        let right = total - left;
        let children = rules.score(left, n_left) + rules.score(right, n - n_left);
        let gain = children - parent;
        // gains within rounding noise of zero are not real improvements
        let noise = T::epsilon() * T::lit(64.0) * (children + parent);
        if gain <= rules.min_gain + noise {
            continue;
        }
        if best.is_none_or(|b| gain > b.gain) {
            best = Some(SplitCandidate {
                feature,
                threshold: midpoint(lo, hi),
                gain,
                n_left,
            });
        }
    }
    best
}

/// Reduces per-feature candidates in ascending feature order; the first
/// strictly greatest gain wins, so ties keep the lower feature index.
fn reduce<T: Scalar>(cands: impl IntoIterator<Item = Option<SplitCandidate<T>>>) -> Option<SplitCandidate<T>> {
    cands.into_iter().flatten().fold(None, |best, c| match best {
        Some(b) if c.gain <= b.gain => Some(b),
        _ => Some(c),
    })
}

/// Split search over a node whose rows are given per feature in sorted order.
pub(crate) fn best_split_presorted<T: Scalar>(
    columns: &[Vec<T>],
    residuals: &[T],
    sorted: &[Vec<usize>],
    total: T,
    rules: &SplitRules<T>,
) -> Option<SplitCandidate<T>> {
    let n = sorted.first().map_or(0, Vec::len);
    let work = |f: usize| scan_feature(f, &sorted[f], &columns[f], residuals, total, rules);
    if n * columns.len() >= PARALLEL_MIN_WORK {
        let per_feature: Vec<_> = (0..columns.len()).into_par_iter().map(work).collect();
        reduce(per_feature)
    } else {
        reduce((0..columns.len()).map(work))
    }
}

/// Sorts `rows` by the feature's value, ties by row index.
pub(crate) fn sort_rows<T: Scalar>(rows: &[usize], values: &[T]) -> Vec<usize> {
    let mut v = rows.to_vec();
    v.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite").then(a.cmp(&b)));
    v
}

/// Finds the split of `node_rows` maximizing
/// `G_L²/(n_L+λ) + G_R²/(n_R+λ) − G²/(n+λ)`, where `G` sums residuals.
///
/// `columns` is column-major: `columns[f][row]`. Candidate thresholds are
/// midpoints between consecutive distinct values. Returns `None` when no
/// split beats `min_gain` while leaving `min_samples_leaf` rows per side.
pub fn best_split<T: Scalar>(
    columns: &[Vec<T>],
    residuals: &[T],
    node_rows: &[usize],
    params: &GbdtParams,
) -> Option<SplitCandidate<T>> {
    if node_rows.is_empty() {
        return None;
    }
    let rules = SplitRules::from_params(params);
    let mut ordered = node_rows.to_vec();
    ordered.sort_unstable();
    let total: T = ordered.iter().map(|&r| residuals[r]).sum();
    let sorted: Vec<Vec<usize>> = columns.iter().map(|c| sort_rows(node_rows, c)).collect();
    best_split_presorted(columns, residuals, &sorted, total, &rules)
}
