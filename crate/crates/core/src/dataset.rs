//! Labelled binary datasets and z-score standardisation.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Binary class label.
pub type Label = u8;

/// Feature matrix with binary labels, column names and per-row provenance.
///
/// `synthetic[i]` marks rows added by an oversampler so that evaluation code
/// can keep them out of test sets.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Matrix,
    labels: Vec<Label>,
    column_names: Vec<String>,
    synthetic: Vec<bool>,
    standardization: Option<Standardization>,
}

impl LabeledDataset {
    pub fn new(features: Matrix, labels: Vec<Label>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.rows(),
                found: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidLabel(bad));
        }
        let column_names = (0..features.cols()).map(|j| format!("x{j}")).collect();
        let synthetic = alloc::vec![false; labels.len()];
        Ok(Self {
            features,
            labels,
            column_names,
            synthetic,
            standardization: None,
        })
    }

    pub fn empty(dim: usize) -> Self {
        Self::new(Matrix::zeros(0, dim), Vec::new()).expect("empty dataset is valid")
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: names.len(),
            });
        }
        self.column_names = names;
        Ok(self)
    }

    pub fn with_synthetic_flags(mut self, flags: Vec<bool>) -> Result<Self> {
        if flags.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: flags.len(),
            });
        }
        self.synthetic = flags;
        Ok(self)
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn synthetic(&self) -> &[bool] {
        &self.synthetic
    }

    pub fn standardization(&self) -> Option<&Standardization> {
        self.standardization.as_ref()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    pub fn class_count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn class_indices(&self, label: Label) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == label).collect()
    }

    /// Features of one class as a matrix.
    pub fn class_features(&self, label: Label) -> Matrix {
        self.features.select_rows(&self.class_indices(label))
    }

    /// Label with fewer rows (ties resolve to 1).
    pub fn minority_label(&self) -> Label {
        if self.class_count(1) <= self.class_count(0) {
            1
        } else {
            0
        }
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            column_names: self.column_names.clone(),
            synthetic: idx.iter().map(|&i| self.synthetic[i]).collect(),
            standardization: self.standardization.clone(),
        }
    }

    /// Appends rows of one label, flagged as synthetic.
    pub fn append_synthetic(&self, rows: &Matrix, label: Label) -> Result<Self> {
        if label > 1 {
            return Err(Error::InvalidLabel(label));
        }
        let mut out = self.clone();
        out.features = self.features.vstack(rows)?;
        out.labels.extend(core::iter::repeat(label).take(rows.rows()));
        out.synthetic.extend(core::iter::repeat(true).take(rows.rows()));
        Ok(out)
    }

    pub(crate) fn set_label(&mut self, i: usize, label: Label) {
        self.labels[i] = label;
    }
}

/// Per-column location/scale used by [`zscore`]. Columns with zero spread are
/// flagged `degenerate` and pass through with a scale of 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub degenerate: Vec<bool>,
}

impl Standardization {
    /// Population (1/n) moments of each column.
    pub fn fit(features: &Matrix) -> Self {
        let means = features.column_means();
        let n = features.rows().max(1) as f64;
        let mut vars = alloc::vec![0.0; features.cols()];
        for r in features.iter_rows() {
            for ((v, x), m) in vars.iter_mut().zip(r).zip(&means) {
                *v += (x - m) * (x - m);
            }
        }
        let mut stds = Vec::with_capacity(vars.len());
        let mut degenerate = Vec::with_capacity(vars.len());
        for v in vars {
            let s = libm::sqrt(v / n);
            let bad = !(s > 0.0);
            degenerate.push(bad);
            stds.push(if bad { 1.0 } else { s });
        }
        Self {
            means,
            stds,
            degenerate,
        }
    }

    pub fn apply_point(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.means)
            .zip(&self.stds)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn invert_point(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.means)
            .zip(&self.stds)
            .map(|((v, m), s)| v * s + m)
            .collect()
    }

    pub fn apply(&self, m: &Matrix) -> Matrix {
        self.map_rows(m, |r| self.apply_point(r))
    }

    pub fn invert(&self, m: &Matrix) -> Matrix {
        self.map_rows(m, |r| self.invert_point(r))
    }

    fn map_rows(&self, m: &Matrix, f: impl Fn(&[f64]) -> Vec<f64>) -> Matrix {
        let mut data = Vec::with_capacity(m.rows() * m.cols());
        for r in m.iter_rows() {
            data.extend(f(r));
        }
        Matrix::from_vec(m.rows(), m.cols(), data).expect("shape preserved")
    }
}

/// Standardises every column to zero mean and unit population variance.
/// The fitted parameters are returned and also attached to the output.
pub fn zscore(data: &LabeledDataset) -> (LabeledDataset, Standardization) {
    let params = Standardization::fit(data.features());
    let mut out = data.clone();
    out.features = params.apply(data.features());
    out.standardization = Some(params.clone());
    (out, params)
}

/// Applies previously fitted parameters (e.g. from a training split).
pub fn apply_standardization(data: &LabeledDataset, params: &Standardization) -> LabeledDataset {
    let mut out = data.clone();
    out.features = params.apply(data.features());
    out.standardization = Some(params.clone());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use alloc::vec;

    fn ds(rows: &[&[f64]]) -> LabeledDataset {
        let m = Matrix::from_rows(rows).unwrap();
        let n = m.rows();
        LabeledDataset::new(m, vec![0; n]).unwrap()
    }

    #[test]
    fn constant_column_passes_through() {
        let d = ds(&[&[1.0], &[1.0], &[1.0]]);
        let (scaled, p) = zscore(&d);
        assert!(p.degenerate[0]);
        assert_eq!(p.stds[0], 1.0);
        assert!(scaled.features().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_point_column() {
        let d = ds(&[&[0.0], &[2.0]]);
        let (scaled, p) = zscore(&d);
        assert_eq!(p.means, vec![1.0]);
        assert_eq!(p.stds, vec![1.0]);
        assert_eq!(scaled.features().as_slice(), &[-1.0, 1.0]);
    }

    #[test]
    fn round_trip_random() {
        let mut rng = RngStream::new(11);
        let data: Vec<f64> = (0..50).map(|_| rng.uniform_in(-5.0, 20.0)).collect();
        let m = Matrix::from_vec(10, 5, data).unwrap();
        let d = LabeledDataset::new(m.clone(), vec![1; 10]).unwrap();
        let (scaled, p) = zscore(&d);
        let mean = scaled.features().column_means();
        assert!(mean.iter().all(|v| v.abs() < 1e-9));
        let back = p.invert(scaled.features());
        assert!(back.sub(&m).unwrap().max_abs() < 1e-9);
        let again = Standardization::fit(scaled.features());
        assert!(again.stds.iter().all(|s| (s - 1.0).abs() < 1e-9));
    }

    #[test]
    fn rejects_bad_labels() {
        let m = Matrix::zeros(2, 1);
        assert_eq!(
            LabeledDataset::new(m, vec![0, 2]).unwrap_err(),
            Error::InvalidLabel(2)
        );
    }
}
