//! Density reconstruction from score fields.
//!
//! A score field only fixes `log p` up to a constant; every routine here
//! integrates scores to get log-ratios, and [`construct_density`] pins the
//! constant with a supplied anchor `(x₀, p(x₀))`. Nothing is renormalised.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::gaussian::{estimate_moments, GaussianModel};
use crate::linalg::{dot, sq_dist, Matrix};
use crate::rng::RngStream;
use crate::score_net::ScoreNet;

/// Anything that maps `x ∈ R^d` to a score vector in `R^d`.
pub trait ScoreField {
    fn dim(&self) -> usize;
    fn score(&self, x: &[f64]) -> Vec<f64>;
}

impl ScoreField for GaussianModel {
    fn dim(&self) -> usize {
        GaussianModel::dim(self)
    }

    fn score(&self, x: &[f64]) -> Vec<f64> {
        GaussianModel::score(self, x)
    }
}

impl ScoreField for ScoreNet {
    fn dim(&self) -> usize {
        ScoreNet::dim(self)
    }

    fn score(&self, x: &[f64]) -> Vec<f64> {
        self.mlp().forward(x)
    }
}

impl<T: ScoreField + ?Sized> ScoreField for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn score(&self, x: &[f64]) -> Vec<f64> {
        (**self).score(x)
    }
}

impl<T: ScoreField + ?Sized> ScoreField for alloc::boxed::Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn score(&self, x: &[f64]) -> Vec<f64> {
        (**self).score(x)
    }
}

/// Score field backed by a closure.
#[derive(Clone, Copy)]
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> Vec<f64>> FnField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> Vec<f64>> ScoreField for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn score(&self, x: &[f64]) -> Vec<f64> {
        (self.f)(x)
    }
}

/// One-dimensional integration rule for [`log_ratio_1d`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quadrature1d {
    /// `n` equal cells evaluated at their midpoints.
    Midpoint,
    /// `n` abscissae drawn uniformly on the interval from the given seed.
    Random { seed: u64 },
    /// First-order expansion `s(a)·(b − a)`; ignores `n`.
    Taylor,
}

fn check_dim(field: &impl ScoreField, found: usize) -> Result<()> {
    if field.dim() != found {
        return Err(Error::DimensionMismatch {
            expected: field.dim(),
            found,
        });
    }
    Ok(())
}

/// `log p(b) − log p(a)` for a one-dimensional field.
pub fn log_ratio_1d(
    field: &impl ScoreField,
    a: f64,
    b: f64,
    n: usize,
    method: Quadrature1d,
) -> Result<f64> {
    check_dim(field, 1)?;
    if n == 0 {
        return Err(crate::error::invalid("quadrature needs at least one abscissa"));
    }
    let s = |x: f64| field.score(&[x])[0];
    let width = b - a;
    Ok(match method {
        Quadrature1d::Taylor => s(a) * width,
        Quadrature1d::Midpoint => {
            let h = width / n as f64;
            (0..n).map(|k| s(a + (k as f64 + 0.5) * h)).sum::<f64>() * h
        }
        Quadrature1d::Random { seed } => {
            let mut rng = RngStream::new(seed);
            let total: f64 = (0..n).map(|_| s(a + rng.uniform() * width)).sum();
            total * width / n as f64
        }
    })
}

/// `log p(b) − log p(a)` along the straight segment from `a` to `b`, using
/// `n ≥ 2` equally spaced path points and the trapezoid of endpoint scores
/// dotted with each increment.
pub fn line_integral(field: &impl ScoreField, a: &[f64], b: &[f64], n: usize) -> Result<f64> {
    check_dim(field, a.len())?;
    check_dim(field, b.len())?;
    if n < 2 {
        return Err(crate::error::invalid("line integral needs at least two path points"));
    }
    if a == b {
        return Ok(0.0);
    }
    let d = a.len();
    let steps = (n - 1) as f64;
    let inc: Vec<f64> = a.iter().zip(b).map(|(p, q)| (q - p) / steps).collect();
    let mut x = a.to_vec();
    let mut prev = field.score(&x);
    let mut total = 0.0;
    for k in 1..n {
        let t = k as f64 / steps;
        for i in 0..d {
            x[i] = a[i] + t * (b[i] - a[i]);
        }
        let cur = field.score(&x);
        for i in 0..d {
            total += 0.5 * (prev[i] + cur[i]) * inc[i];
        }
        prev = cur;
    }
    Ok(total)
}

/// Sum of [`line_integral`]s over consecutive vertices of a polyline.
pub fn path_integral(field: &impl ScoreField, vertices: &[Vec<f64>], n: usize) -> Result<f64> {
    vertices
        .windows(2)
        .map(|w| line_integral(field, &w[0], &w[1], n))
        .sum()
}

/// Tensor-product grid; node order is row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    axes: Vec<Vec<f64>>,
}

impl Grid {
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() || axes.iter().any(|a| a.is_empty()) {
            return Err(crate::error::invalid("grid needs at least one node per axis"));
        }
        if axes.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grid"));
        }
        Ok(Self { axes })
    }

    /// `count` equally spaced points from `lo` to `hi` inclusive on each axis.
    pub fn uniform(lo: &[f64], hi: &[f64], count: &[usize]) -> Result<Self> {
        let axes = lo
            .iter()
            .zip(hi)
            .zip(count)
            .map(|((&l, &h), &c)| {
                if c == 1 {
                    vec![l]
                } else {
                    (0..c).map(|k| l + (h - l) * k as f64 / (c - 1) as f64).collect()
                }
            })
            .collect();
        Self::new(axes)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.axes)
            .fold(0, |acc, (&i, a)| acc * a.len() + i)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for (k, a) in self.axes.iter().enumerate().rev() {
            idx[k] = flat % a.len();
            flat /= a.len();
        }
        idx
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .zip(&self.axes)
            .map(|(&i, a)| a[i])
            .collect()
    }

    /// Trapezoid quadrature weight of each node.
    pub fn cell_weights(&self) -> Vec<f64> {
        let per_axis: Vec<Vec<f64>> = self
            .axes
            .iter()
            .map(|a| {
                let m = a.len();
                (0..m)
                    .map(|i| {
                        if m == 1 {
                            1.0
                        } else {
                            let lo = if i == 0 { a[0] } else { 0.5 * (a[i - 1] + a[i]) };
                            let hi = if i == m - 1 { a[m - 1] } else { 0.5 * (a[i] + a[i + 1]) };
                            hi - lo
                        }
                    })
                    .collect()
            })
            .collect();
        (0..self.len())
            .map(|f| {
                self.multi_index(f)
                    .iter()
                    .zip(&per_axis)
                    .map(|(&i, w)| w[i])
                    .product()
            })
            .collect()
    }

    fn nearest_node(&self, x: &[f64]) -> Vec<usize> {
        x.iter()
            .zip(&self.axes)
            .map(|(v, a)| {
                let mut best = 0;
                for (i, g) in a.iter().enumerate() {
                    if (g - v).abs() < (a[best] - v).abs() {
                        best = i;
                    }
                }
                best
            })
            .collect()
    }
}

/// Settings for [`construct_density`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionSettings {
    /// Path points per segment between neighbouring nodes (and from the
    /// anchor to its nearest node).
    pub steps: usize,
}

impl Default for ReconstructionSettings {
    fn default() -> Self {
        Self { steps: 16 }
    }
}

/// Densities on a grid, anchored at `(x₀, p₀)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub anchor: Vec<f64>,
    pub anchor_density: f64,
    pub grid: Grid,
    /// `log p(g) − log p(x₀)` per node.
    pub log_ratio: Vec<f64>,
    pub density: Vec<f64>,
    pub settings: ReconstructionSettings,
    /// Nodes whose density overflowed and were clamped to `f64::MAX`.
    pub clamped_high: usize,
    /// Nodes whose density underflowed and were clamped to the smallest
    /// positive normal.
    pub clamped_low: usize,
}

impl DensityField {
    /// Trapezoid-weighted grid sum of the densities.
    pub fn mass(&self) -> f64 {
        self.grid
            .cell_weights()
            .iter()
            .zip(&self.density)
            .map(|(w, p)| w * p)
            .sum()
    }

    pub fn points(&self) -> impl Iterator<Item = (Vec<f64>, f64)> + '_ {
        (0..self.grid.len()).map(|f| (self.grid.point(f), self.density[f]))
    }
}

/// Walks the grid from the anchor, accumulating straight-segment line
/// integrals between neighbouring nodes: anchor to its nearest node, then
/// outward along axis 0, then each further axis from every node reached so
/// far.
pub fn construct_density(
    field: &impl ScoreField,
    anchor: (&[f64], f64),
    grid: &Grid,
    settings: ReconstructionSettings,
) -> Result<DensityField> {
    let (x0, p0) = anchor;
    check_dim(field, x0.len())?;
    check_dim(field, grid.dim())?;
    if !(p0 > 0.0) || !p0.is_finite() {
        return Err(crate::error::invalid("anchor density must be positive and finite"));
    }
    let shape = grid.shape();
    let n = grid.len();
    let mut lr = vec![f64::NAN; n];
    let start = grid.nearest_node(x0);
    let s_flat = grid.flat_index(&start);
    lr[s_flat] = line_integral(field, x0, &grid.point(s_flat), settings.steps)?;

    let mut known = vec![start];
    for axis in 0..grid.dim() {
        let mut next = Vec::with_capacity(known.len() * shape[axis]);
        for base in &known {
            let origin = grid.flat_index(base);
            let mut idx = base.clone();
            // walk up then down the axis from the known node
            for dir in [1isize, -1] {
                let mut prev_flat = origin;
                let mut i = base[axis] as isize + dir;
                while i >= 0 && (i as usize) < shape[axis] {
                    idx[axis] = i as usize;
                    let f = grid.flat_index(&idx);
                    let step = line_integral(field, &grid.point(prev_flat), &grid.point(f), settings.steps)?;
                    lr[f] = lr[prev_flat] + step;
                    prev_flat = f;
                    i += dir;
                }
            }
            for i in 0..shape[axis] {
                idx[axis] = i;
                next.push(idx.clone());
            }
        }
        known = next;
    }

    let mut clamped_high = 0;
    let mut clamped_low = 0;
    let density = lr
        .iter()
        .map(|&l| {
            let p = p0 * libm::exp(l);
            if !p.is_finite() {
                clamped_high += 1;
                f64::MAX
            } else if p < f64::MIN_POSITIVE {
                clamped_low += 1;
                f64::MIN_POSITIVE
            } else {
                p
            }
        })
        .collect();
    Ok(DensityField {
        anchor: x0.to_vec(),
        anchor_density: p0,
        grid: grid.clone(),
        log_ratio: lr,
        density,
        settings,
        clamped_high,
        clamped_low,
    })
}

/// Density at a single point, `p₀·exp(∫ s)` along the straight path from the
/// anchor. Returns the log-density to stay usable where `p` underflows.
pub fn log_density_at(
    field: &impl ScoreField,
    anchor: (&[f64], f64),
    x: &[f64],
    steps: usize,
) -> Result<f64> {
    Ok(libm::log(anchor.1) + line_integral(field, anchor.0, x, steps)?)
}

fn ball_point(rng: &mut RngStream, d: usize, radius: f64, out: &mut [f64]) {
    loop {
        rng.fill_standard_normal(out);
        let r2 = dot(out, out);
        if r2 > 0.0 {
            let scale = radius * libm::pow(rng.uniform(), 1.0 / d as f64) / libm::sqrt(r2);
            out.iter_mut().for_each(|v| *v *= scale);
            return;
        }
    }
}

/// Average of the field at `n` points drawn uniformly from the ball of
/// radius `radius` around `x`. A zero radius returns `field(x)`.
pub fn smooth_scores(
    field: &impl ScoreField,
    x: &[f64],
    radius: f64,
    n: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    check_dim(field, x.len())?;
    if !(radius >= 0.0) || n == 0 {
        return Err(crate::error::invalid("smoothing needs radius >= 0 and n >= 1"));
    }
    if radius == 0.0 {
        return Ok(field.score(x));
    }
    let d = x.len();
    let mut acc = vec![0.0; d];
    let mut offset = vec![0.0; d];
    let mut p = vec![0.0; d];
    for _ in 0..n {
        ball_point(rng, d, radius, &mut offset);
        for i in 0..d {
            p[i] = x[i] + offset[i];
        }
        for (a, s) in acc.iter_mut().zip(field.score(&p)) {
            *a += s;
        }
    }
    acc.iter_mut().for_each(|v| *v /= n as f64);
    Ok(acc)
}

/// Volume of the `d`-ball of radius `r`.
pub fn ball_volume(d: usize, r: f64) -> f64 {
    let h = d as f64 / 2.0;
    libm::pow(PI, h) * libm::pow(r, d as f64) / libm::tgamma(h + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialDensity {
    /// Gaussian peak `1/((2π)^{d/2}|Σ̂|^{1/2})` at the sample mean.
    GaussianCentral,
    /// Fraction of samples within `radius` of the sample mean, divided by
    /// the ball volume.
    NeighbourCount { radius: f64 },
}

/// Anchor `(μ̂, p̂(μ̂))` for one class.
pub fn initial_density(samples: &Matrix, method: InitialDensity) -> Result<(Vec<f64>, f64)> {
    let n = samples.rows();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, found: n });
    }
    match method {
        InitialDensity::GaussianCentral => {
            let m = estimate_moments(samples)?;
            let p = m.peak_density();
            Ok((m.mean().to_vec(), p))
        }
        InitialDensity::NeighbourCount { radius } => {
            if !(radius > 0.0) {
                return Err(crate::error::invalid("neighbourhood radius must be positive"));
            }
            let mean = samples.column_means();
            let r2 = radius * radius;
            let count = samples.iter_rows().filter(|r| sq_dist(r, &mean) <= r2).count();
            if count == 0 {
                return Err(Error::EmptyNeighbourhood { radius });
            }
            let p = count as f64 / (n as f64 * ball_volume(samples.cols(), radius));
            Ok((mean, p))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::pair_2d_models;

    fn neg_identity(d: usize) -> FnField<impl Fn(&[f64]) -> Vec<f64>> {
        FnField::new(d, |x: &[f64]| x.iter().map(|v| -v).collect())
    }

    #[test]
    fn one_dimensional_rules() {
        let f = neg_identity(1);
        assert_eq!(log_ratio_1d(&f, 0.3, 0.3, 10, Quadrature1d::Midpoint).unwrap(), 0.0);
        let mid = log_ratio_1d(&f, 0.0, 1.0, 1000, Quadrature1d::Midpoint).unwrap();
        assert!((mid + 0.5).abs() < 1e-3);
        let rnd = log_ratio_1d(&f, 0.0, 1.0, 100_000, Quadrature1d::Random { seed: 1 }).unwrap();
        assert!((rnd + 0.5).abs() < 1e-2);
        assert_eq!(log_ratio_1d(&f, 0.0, 0.01, 1, Quadrature1d::Taylor).unwrap(), 0.0);
        let mc = log_ratio_1d(&f, 0.0, 0.01, 100, Quadrature1d::Midpoint).unwrap();
        assert!((mc + 5e-5).abs() < 1e-9);
    }

    #[test]
    fn midpoint_is_antisymmetric() {
        let g = GaussianModel::univariate(0.7, 1.3).unwrap();
        let ab = log_ratio_1d(&g, -1.0, 2.5, 37, Quadrature1d::Midpoint).unwrap();
        let ba = log_ratio_1d(&g, 2.5, -1.0, 37, Quadrature1d::Midpoint).unwrap();
        assert!((ab + ba).abs() < 1e-12);
    }

    #[test]
    fn line_integral_of_quadratic_potential() {
        let f = neg_identity(2);
        assert_eq!(line_integral(&f, &[1.0, 2.0], &[1.0, 2.0], 10).unwrap(), 0.0);
        let v = line_integral(&f, &[0.0, 0.0], &[1.0, 1.0], 10_000).unwrap();
        assert!((v + 1.0).abs() < 1e-4);
    }

    #[test]
    fn additivity_and_path_independence() {
        let (m0, _) = pair_2d_models();
        let (a, b, c) = ([0.5, -1.0], [2.0, 1.5], [-1.0, 0.3]);
        let direct = line_integral(&m0, &a, &c, 10_000).unwrap();
        let via = path_integral(&m0, &[a.to_vec(), b.to_vec(), c.to_vec()], 10_000).unwrap();
        assert!((direct - via).abs() < 1e-6);
        let exact = m0.log_pdf(&c) - m0.log_pdf(&a);
        assert!((direct - exact).abs() < 1e-6);
    }

    #[test]
    fn standard_normal_reconstruction() {
        let g = GaussianModel::standard(1);
        let grid = Grid::uniform(&[-4.0], &[4.0], &[801]).unwrap();
        let p0 = g.pdf(&[0.0]);
        let df = construct_density(&g, (&[0.0], p0), &grid, Default::default()).unwrap();
        for (x, p) in df.points() {
            assert!((p / g.pdf(&x) - 1.0).abs() < 1e-6);
        }
        assert!((df.mass() - 1.0).abs() < 1e-3);
        let scaled = construct_density(&g, (&[0.0], 3.0 * p0), &grid, Default::default()).unwrap();
        for (a, b) in df.density.iter().zip(&scaled.density) {
            assert!((b / a - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_dimensional_reconstruction_off_grid_anchor() {
        let (m0, _) = pair_2d_models();
        let grid = Grid::uniform(&[-3.0, -3.0], &[3.0, 3.0], &[61, 61]).unwrap();
        let x0 = [0.07, -0.12];
        let df = construct_density(&m0, (&x0, m0.pdf(&x0)), &grid, Default::default()).unwrap();
        for (x, p) in df.points() {
            assert!((p / m0.pdf(&x) - 1.0).abs() < 0.05);
        }
        assert_eq!(df.anchor_density, m0.pdf(&x0));
    }

    #[test]
    fn overflow_is_clamped() {
        let f = FnField::new(1, |_: &[f64]| vec![1000.0]);
        let grid = Grid::uniform(&[0.0], &[2.0], &[3]).unwrap();
        let df = construct_density(&f, (&[0.0], 1.0), &grid, Default::default()).unwrap();
        assert_eq!(df.clamped_high, 2);
        assert!(df.density.iter().all(|p| p.is_finite() && *p > 0.0));
    }

    #[test]
    fn smoothing() {
        let f = FnField::new(2, |x: &[f64]| vec![2.0 * x[0] - x[1] + 1.0, x[1]]);
        let mut rng = RngStream::new(4);
        let x = [0.3, -0.8];
        assert_eq!(smooth_scores(&f, &x, 0.0, 5, &mut rng).unwrap(), f.score(&x));
        let s = smooth_scores(&f, &x, 1.0, 10_000, &mut rng).unwrap();
        let exact = f.score(&x);
        assert!((s[0] - exact[0]).abs() < 0.02 && (s[1] - exact[1]).abs() < 0.01);

        let step = FnField::new(1, |x: &[f64]| vec![if x[0] < 0.0 { -1.0 } else { 3.0 }]);
        let s = smooth_scores(&step, &[0.0], 0.5, 20_000, &mut rng).unwrap();
        assert!((s[0] - 1.0).abs() < 0.05);
    }

    #[test]
    fn ball_volumes() {
        assert!((ball_volume(1, 2.0) - 4.0).abs() < 1e-12);
        assert!((ball_volume(2, 1.0) - PI).abs() < 1e-12);
        assert!((ball_volume(3, 1.0) - 4.0 * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_counting_estimate() {
        let mut rng = RngStream::new(6);
        let data: Vec<f64> = (0..20_000).map(|_| rng.uniform()).collect();
        let m = Matrix::from_vec(20_000, 1, data).unwrap();
        let (_, p) = initial_density(&m, InitialDensity::NeighbourCount { radius: 0.2 }).unwrap();
        assert!((p - 1.0).abs() < 0.1);
        assert!(matches!(
            initial_density(&m, InitialDensity::NeighbourCount { radius: 1e-12 }),
            Err(Error::EmptyNeighbourhood { .. })
        ));
    }
}
