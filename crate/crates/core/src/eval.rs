//! Evaluation plumbing: confusion matrices and their metrics, Jensen-Shannon
//! divergence on grids, stratified splits and label flipping.

use alloc::vec::Vec;

use crate::dataset::{Label, LabeledDataset};
use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tp: u64,
}

impl ConfusionMatrix {
    pub fn new(tn: u64, fp: u64, fn_: u64, tp: u64) -> Self {
        Self { tn, fp, fn_, tp }
    }

    pub fn from_predictions(truth: &[Label], predicted: &[Label]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::DimensionMismatch {
                expected: truth.len(),
                found: predicted.len(),
            });
        }
        let mut cm = Self::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            match (t, p) {
                (0, 0) => cm.tn += 1,
                (0, 1) => cm.fp += 1,
                (1, 0) => cm.fn_ += 1,
                (1, 1) => cm.tp += 1,
                (l, _) if l > 1 => return Err(Error::InvalidLabel(l)),
                (_, l) => return Err(Error::InvalidLabel(l)),
            }
        }
        Ok(cm)
    }

    pub fn total(&self) -> u64 {
        self.tn + self.fp + self.fn_ + self.tp
    }

    pub fn metrics(&self) -> Metrics {
        metrics(self)
    }
}

/// Scores derived from a confusion matrix. Ratios with a zero denominator
/// are reported as 0 and set `degenerate`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub accuracy: f64,
    /// `fp + fn`
    pub mistakes: u64,
    pub degenerate: bool,
}

pub fn metrics(cm: &ConfusionMatrix) -> Metrics {
    let mut degenerate = false;
    let mut ratio = |num: u64, den: u64| {
        if den == 0 {
            degenerate = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    // 2PR/(P+R) written in counts
    let f1 = ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn_);
    let accuracy = ratio(cm.tp + cm.tn, cm.total());
    Metrics {
        recall,
        precision,
        f1,
        accuracy,
        mistakes: cm.fp + cm.fn_,
        degenerate,
    }
}

fn normalised(p: &[f64]) -> Result<Vec<f64>> {
    if p.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(invalid("densities must be finite and non-negative"));
    }
    let s: f64 = p.iter().sum();
    if !(s > 0.0) {
        return Err(invalid("density has no mass on the grid"));
    }
    Ok(p.iter().map(|v| v / s).collect())
}

/// Jensen-Shannon divergence (natural log) between two densities tabulated
/// on the same grid, each first renormalised to unit sum. Lies in
/// `[0, ln 2]`.
pub fn jsd(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::GridMismatch(p.len(), q.len()));
    }
    let (p, q) = (normalised(p)?, normalised(q)?);
    let kl_to_mid = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .filter(|(x, _)| **x > 0.0)
            .map(|(x, y)| x * libm::log(2.0 * x / (x + y)))
            .sum()
    };
    let v = 0.5 * (kl_to_mid(&p, &q) + kl_to_mid(&q, &p));
    Ok(v.clamp(0.0, core::f64::consts::LN_2))
}

/// [`jsd`] of point densities weighted by quadrature cell sizes.
pub fn jsd_weighted(p: &[f64], q: &[f64], weights: &[f64]) -> Result<f64> {
    if weights.len() != p.len() {
        return Err(Error::GridMismatch(p.len(), weights.len()));
    }
    if p.len() != q.len() {
        return Err(Error::GridMismatch(p.len(), q.len()));
    }
    let pw: Vec<f64> = p.iter().zip(weights).map(|(a, w)| a * w).collect();
    let qw: Vec<f64> = q.iter().zip(weights).map(|(a, w)| a * w).collect();
    jsd(&pw, &qw)
}

/// How the test side of a split is sized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitSpec {
    /// Fraction of each class kept for training, rounded half to even.
    TrainRatio(f64),
    /// Exact test-set size of class 0 and class 1.
    TestCounts([usize; 2]),
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    /// Source row indices, ascending.
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

/// Class-wise split; each class is shuffled with its own stream of `seed`.
pub fn stratified_split(data: &LabeledDataset, spec: SplitSpec, seed: u64) -> Result<Split> {
    if let SplitSpec::TrainRatio(r) = spec {
        if !(r > 0.0 && r < 1.0) {
            return Err(invalid("split ratio must lie in (0, 1)"));
        }
    }
    let root = RngStream::new(seed);
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for class in 0..2u8 {
        let mut idx = data.class_indices(class);
        let n = idx.len();
        if n < 2 {
            return Err(Error::Stratification { class, count: n });
        }
        let n_test = match spec {
            SplitSpec::TrainRatio(r) => n - libm::rint(n as f64 * r) as usize,
            SplitSpec::TestCounts(c) => {
                let t = c[class as usize];
                if t > n {
                    return Err(Error::Stratification { class, count: n });
                }
                t
            }
        };
        root.split(class as u64).shuffle(&mut idx);
        test_idx.extend_from_slice(&idx[..n_test]);
        train_idx.extend_from_slice(&idx[n_test..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok(Split {
        train: data.subset(&train_idx),
        test: data.subset(&test_idx),
        train_idx,
        test_idx,
    })
}

/// Rows whose labels were swapped by [`flip_labels`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlipRecord {
    /// Class-0 rows first, each group in draw order.
    pub indices: Vec<usize>,
    pub requested: [usize; 2],
}

/// Swaps the labels of exactly `counts[c]` rows of each class `c`, drawn
/// without replacement.
pub fn flip_labels(
    data: &LabeledDataset,
    counts: [usize; 2],
    seed: u64,
) -> Result<(LabeledDataset, FlipRecord)> {
    let root = RngStream::new(seed);
    let mut indices = Vec::with_capacity(counts[0] + counts[1]);
    for class in 0..2u8 {
        let members = data.class_indices(class);
        let want = counts[class as usize];
        if want > members.len() {
            return Err(Error::FlipCount {
                class,
                requested: want,
                available: members.len(),
            });
        }
        let picks = root
            .split(class as u64)
            .sample_without_replacement(members.len(), want);
        indices.extend(picks.into_iter().map(|p| members[p]));
    }
    let out = apply_flips(data, &indices)?;
    Ok((
        out,
        FlipRecord {
            indices,
            requested: counts,
        },
    ))
}

/// Swaps the labels at `indices`; applying the same list twice restores the
/// original labels.
pub fn apply_flips(data: &LabeledDataset, indices: &[usize]) -> Result<LabeledDataset> {
    let mut out = data.clone();
    for &i in indices {
        if i >= data.len() {
            return Err(invalid("flip index out of range"));
        }
        let l = out.labels()[i];
        out.set_label(i, 1 - l);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use alloc::vec;

    fn round2(v: f64) -> f64 {
        libm::round(v * 100.0) / 100.0
    }

    #[test]
    fn table_rows() {
        let m = metrics(&ConfusionMatrix::new(72350, 2, 56, 67));
        assert_eq!(
            (round2(m.recall), round2(m.precision), round2(m.f1), m.mistakes),
            (0.54, 0.97, 0.70, 58)
        );
        assert!(!m.degenerate);
        let m = metrics(&ConfusionMatrix::new(630, 69, 6, 36));
        assert_eq!(round2(m.recall), 0.86);
    }

    #[test]
    fn degenerate_metrics() {
        let m = metrics(&ConfusionMatrix::new(10, 0, 0, 0));
        assert!(m.degenerate);
        assert_eq!((m.recall, m.precision, m.f1, m.accuracy), (0.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn from_predictions_counts() {
        let cm = ConfusionMatrix::from_predictions(&[0, 0, 1, 1, 1], &[0, 1, 0, 1, 1]).unwrap();
        assert_eq!(cm, ConfusionMatrix::new(1, 1, 1, 2));
        assert!(ConfusionMatrix::from_predictions(&[0], &[2]).is_err());
    }

    #[test]
    fn jsd_bounds() {
        assert_eq!(jsd(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap(), 0.0);
        let v = jsd(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((v - core::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(jsd(&[1.0], &[1.0, 2.0]), Err(Error::GridMismatch(1, 2)));
        let a = jsd(&[0.2, 0.5, 0.3], &[0.4, 0.4, 0.2]).unwrap();
        let b = jsd(&[0.4, 0.4, 0.2], &[0.2, 0.5, 0.3]).unwrap();
        assert_eq!(a, b);
    }

    fn imbalanced() -> LabeledDataset {
        let n = 3000;
        let labels: Vec<u8> = (0..n).map(|i| (i >= 2830) as u8).collect();
        let feats = Matrix::from_vec(n, 1, (0..n).map(|i| i as f64).collect()).unwrap();
        LabeledDataset::new(feats, labels).unwrap()
    }

    #[test]
    fn split_counts() {
        let s = stratified_split(&imbalanced(), SplitSpec::TrainRatio(0.75), 1).unwrap();
        assert_eq!((s.train.class_count(0), s.train.class_count(1)), (2122, 128));
        assert_eq!((s.test.class_count(0), s.test.class_count(1)), (708, 42));
        let s2 = stratified_split(&imbalanced(), SplitSpec::TrainRatio(0.75), 1).unwrap();
        assert_eq!(s.test_idx, s2.test_idx);
        let mut all: Vec<usize> = s.train_idx.iter().chain(&s.test_idx).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..3000).collect::<Vec<_>>());

        let s = stratified_split(&imbalanced(), SplitSpec::TestCounts([529, 42]), 1).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (2429, 571));
        assert_eq!(s.train.class_count(1), 128);
    }

    #[test]
    fn split_small_and_errors() {
        let d = LabeledDataset::new(
            Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap(),
            vec![0, 1, 0, 1],
        )
        .unwrap();
        let s = stratified_split(&d, SplitSpec::TrainRatio(0.5), 3).unwrap();
        assert_eq!((s.train.class_count(0), s.train.class_count(1)), (1, 1));
        let d1 = d.subset(&[0, 1, 2]);
        assert_eq!(
            stratified_split(&d1, SplitSpec::TrainRatio(0.5), 3).unwrap_err(),
            Error::Stratification { class: 1, count: 1 }
        );
    }

    #[test]
    fn flips() {
        let d = imbalanced();
        let (f, rec) = flip_labels(&d, [18, 18], 4).unwrap();
        assert_eq!(rec.indices.len(), 36);
        assert_eq!(f.class_count(1), 170 - 18 + 18);
        let changed = (0..d.len()).filter(|&i| f.labels()[i] != d.labels()[i]).count();
        assert_eq!(changed, 36);
        assert_eq!(apply_flips(&f, &rec.indices).unwrap().labels(), d.labels());
        assert_eq!(flip_labels(&d, [0, 0], 4).unwrap().0.labels(), d.labels());
        assert_eq!(
            flip_labels(&d, [0, 171], 4).unwrap_err(),
            Error::FlipCount {
                class: 1,
                requested: 171,
                available: 170
            }
        );
    }
}
