//! Gaussian densities, scores and simulators, plus the closed-form
//! quadratic boundary between two Gaussian classes.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use crate::dataset::{Label, LabeledDataset};
use crate::error::{invalid, Error, Result};
use crate::linalg::{back_substitute_t, cholesky, dot, forward_substitute, Matrix};
use crate::rng::RngStream;

/// `N(μ, Σ)` with its Cholesky factor, inverse and determinant cached.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    mean: Vec<f64>,
    cov: Matrix,
    chol: Matrix,
    inv: Matrix,
    log_det: f64,
}

impl GaussianModel {
    pub fn new(mean: Vec<f64>, cov: Matrix) -> Result<Self> {
        if cov.rows() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                found: cov.rows(),
            });
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mean"));
        }
        let chol = cholesky(&cov)?;
        let d = mean.len();
        let log_det = 2.0 * (0..d).map(|i| libm::log(chol[(i, i)])).sum::<f64>();
        let mut inv = Matrix::zeros(d, d);
        let mut e = vec![0.0; d];
        for j in 0..d {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = back_substitute_t(&chol, &forward_substitute(&chol, &e));
            for i in 0..d {
                inv[(i, j)] = col[i];
            }
        }
        for i in 0..d {
            for j in (i + 1)..d {
                let m = 0.5 * (inv[(i, j)] + inv[(j, i)]);
                inv[(i, j)] = m;
                inv[(j, i)] = m;
            }
        }
        Ok(Self {
            mean,
            cov,
            chol,
            inv,
            log_det,
        })
    }

    pub fn univariate(mean: f64, sd: f64) -> Result<Self> {
        Self::new(vec![mean], Matrix::from_diag(&[sd * sd]))
    }

    pub fn standard(d: usize) -> Self {
        Self::new(vec![0.0; d], Matrix::identity(d)).expect("identity is SPD")
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix {
        &self.cov
    }

    pub fn chol(&self) -> &Matrix {
        &self.chol
    }

    pub fn inverse(&self) -> &Matrix {
        &self.inv
    }

    pub fn det(&self) -> f64 {
        libm::exp(self.log_det)
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `log Z = (d/2) log 2π + ½ log|Σ|`.
    pub fn log_normaliser(&self) -> f64 {
        0.5 * self.dim() as f64 * libm::log(2.0 * PI) + 0.5 * self.log_det
    }

    /// Density at the mean, `1 / Z`.
    pub fn peak_density(&self) -> f64 {
        libm::exp(-self.log_normaliser())
    }

    /// `(x − μ)ᵀ Σ⁻¹ (x − μ)`
    pub fn mahalanobis_sq(&self, x: &[f64]) -> f64 {
        let diff: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        let y = forward_substitute(&self.chol, &diff);
        dot(&y, &y)
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        -0.5 * self.mahalanobis_sq(x) - self.log_normaliser()
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        libm::exp(self.log_pdf(x))
    }

    /// `Σ⁻¹(μ − x)`
    pub fn score(&self, x: &[f64]) -> Vec<f64> {
        let diff: Vec<f64> = self.mean.iter().zip(x).map(|(m, a)| m - a).collect();
        self.inv.matvec(&diff)
    }

    pub fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        let d = self.dim();
        let mut z = vec![0.0; d];
        rng.fill_standard_normal(&mut z);
        let mut x = self.chol.matvec(&z);
        x.iter_mut().zip(&self.mean).for_each(|(v, m)| *v += m);
        x
    }

    pub fn sample_n(&self, rng: &mut RngStream, n: usize) -> Matrix {
        let mut data = Vec::with_capacity(n * self.dim());
        for _ in 0..n {
            data.extend(self.sample(rng));
        }
        Matrix::from_vec(n, self.dim(), data).expect("finite draws")
    }
}

/// Initial diagonal jitter added to a singular sample covariance.
pub const COV_JITTER: f64 = 1e-9;

/// Sample mean and population (1/n) covariance. A singular covariance gets
/// `1e-9·I` added, growing tenfold until the factorisation succeeds.
pub fn estimate_moments(samples: &Matrix) -> Result<GaussianModel> {
    let n = samples.rows();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, found: n });
    }
    let d = samples.cols();
    let mean = samples.column_means();
    let mut cov = Matrix::zeros(d, d);
    for r in samples.iter_rows() {
        for i in 0..d {
            let di = r[i] - mean[i];
            for j in i..d {
                cov[(i, j)] += di * (r[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / n as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    let mut jitter = 0.0;
    loop {
        let mut c = cov.clone();
        for i in 0..d {
            c[(i, i)] += jitter;
        }
        match GaussianModel::new(mean.clone(), c) {
            Ok(m) => return Ok(m),
            Err(Error::NotPositiveDefinite { .. }) if jitter < 1.0 => {
                jitter = if jitter == 0.0 {
                    COV_JITTER
                } else {
                    jitter * 10.0
                };
            }
            Err(e) => return Err(e),
        }
    }
}

/// Class-conditional distribution for [`DgpSpec`].
#[derive(Debug, Clone, PartialEq)]
pub enum ClassDistribution {
    Gaussian(GaussianModel),
    /// Weighted mixture; weights need not be normalised.
    Mixture(Vec<(f64, GaussianModel)>),
}

impl ClassDistribution {
    pub fn dim(&self) -> usize {
        match self {
            Self::Gaussian(g) => g.dim(),
            Self::Mixture(c) => c.first().map_or(0, |(_, g)| g.dim()),
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        match self {
            Self::Gaussian(g) => g.sample(rng),
            Self::Mixture(c) => {
                let w: Vec<f64> = c.iter().map(|(w, _)| *w).collect();
                c[rng.choose_weighted(&w)].1.sample(rng)
            }
        }
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        match self {
            Self::Gaussian(g) => g.pdf(x),
            Self::Mixture(c) => {
                let total: f64 = c.iter().map(|(w, _)| w).sum();
                c.iter().map(|(w, g)| w * g.pdf(x)).sum::<f64>() / total
            }
        }
    }
}

/// Which rows label noise may hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LabelNoise {
    None,
    /// `round(rate·n)` rows drawn from the whole dataset.
    Overall(f64),
    /// `round(rate_c·n_c)` rows drawn from each class separately.
    PerClass([f64; 2]),
}

/// Two-class simulation recipe.
#[derive(Debug, Clone, PartialEq)]
pub struct DgpSpec {
    pub classes: [ClassDistribution; 2],
    pub counts: [usize; 2],
    pub label_noise: LabelNoise,
    pub seed: u64,
}

/// Simulated dataset and the rows whose labels were flipped.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub data: LabeledDataset,
    pub flipped: Vec<usize>,
}

impl DgpSpec {
    fn validate(&self) -> Result<()> {
        let d = self.classes[0].dim();
        if self.classes[1].dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: self.classes[1].dim(),
            });
        }
        for c in &self.classes {
            if let ClassDistribution::Mixture(parts) = c {
                if parts.is_empty() || parts.iter().any(|(w, g)| !(*w >= 0.0) || g.dim() != d) {
                    return Err(invalid("mixture needs components of one dimension with non-negative weights"));
                }
                if !(parts.iter().map(|(w, _)| w).sum::<f64>() > 0.0) {
                    return Err(invalid("mixture weights sum to zero"));
                }
            }
        }
        let rates: &[f64] = match &self.label_noise {
            LabelNoise::None => &[],
            LabelNoise::Overall(r) => core::slice::from_ref(r),
            LabelNoise::PerClass(r) => r,
        };
        if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(invalid("label noise rate outside [0, 1]"));
        }
        Ok(())
    }

    /// Class 0 rows first, then class 1, then label noise.
    pub fn simulate(&self) -> Result<Simulation> {
        self.validate()?;
        let root = RngStream::new(self.seed);
        let d = self.classes[0].dim();
        let n = self.counts[0] + self.counts[1];
        let mut data = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for (c, dist) in self.classes.iter().enumerate() {
            let mut rng = root.split(c as u64);
            for _ in 0..self.counts[c] {
                data.extend(dist.sample(&mut rng));
                labels.push(c as Label);
            }
        }
        let mut ds = LabeledDataset::new(Matrix::from_vec(n, d, data)?, labels)?;
        let mut noise_rng = root.split(2);
        let mut flipped = Vec::new();
        let flip_among = |pool: &[usize], rate: f64, rng: &mut RngStream| {
            let k = libm::round(rate * pool.len() as f64) as usize;
            rng.sample_without_replacement(pool.len(), k.min(pool.len()))
                .into_iter()
                .map(|i| pool[i])
                .collect::<Vec<_>>()
        };
        match self.label_noise {
            LabelNoise::None => {}
            LabelNoise::Overall(rate) => {
                let all: Vec<usize> = (0..n).collect();
                flipped = flip_among(&all, rate, &mut noise_rng);
            }
            LabelNoise::PerClass(rates) => {
                for c in 0..2u8 {
                    let pool = ds.class_indices(c);
                    flipped.extend(flip_among(&pool, rates[c as usize], &mut noise_rng));
                }
            }
        }
        for &i in &flipped {
            let l = ds.labels()[i];
            ds.set_label(i, 1 - l);
        }
        flipped.sort_unstable();
        Ok(Simulation { data: ds, flipped })
    }

    /// 1000 draws each from `N(−2, 1)` and `N(2, 1)`.
    pub fn pair_1d(seed: u64) -> Self {
        Self {
            classes: [
                ClassDistribution::Gaussian(GaussianModel::univariate(-2.0, 1.0).unwrap()),
                ClassDistribution::Gaussian(GaussianModel::univariate(2.0, 1.0).unwrap()),
            ],
            counts: [1000, 1000],
            label_noise: LabelNoise::None,
            seed,
        }
    }

    /// 200 draws each from `N((0,0), [[1,−½],[−½,1]])` and
    /// `N((4,4), [[1,½],[½,1]])`.
    pub fn pair_2d(seed: u64) -> Self {
        let (m0, m1) = pair_2d_models();
        Self {
            classes: [ClassDistribution::Gaussian(m0), ClassDistribution::Gaussian(m1)],
            counts: [200, 200],
            label_noise: LabelNoise::None,
            seed,
        }
    }

    /// Stand-in for the unpublished ten-dimensional imbalanced data: 2830
    /// negatives and 170 positives from two overlapping Gaussians, with
    /// 0.01% of all labels flipped.
    ///
    /// Negatives: mean 0, unit variances, equicorrelation 0.3.
    /// Positives: mean 1.25 in the first five coordinates and 0.625 in the
    /// rest, identity covariance.
    ///
    /// The overlap is set so that unaugmented classifiers recover roughly a
    /// fifth to a third of the positives, the range reported for the
    /// original data.
    pub fn imbalanced_10d(seed: u64) -> Self {
        let (m0, m1) = imbalanced_10d_models();
        Self {
            classes: [ClassDistribution::Gaussian(m0), ClassDistribution::Gaussian(m1)],
            counts: [2830, 170],
            label_noise: LabelNoise::Overall(0.0001),
            seed,
        }
    }
}

pub fn pair_2d_models() -> (GaussianModel, GaussianModel) {
    let m0 = GaussianModel::new(
        vec![0.0, 0.0],
        Matrix::from_rows(&[[1.0, -0.5], [-0.5, 1.0]]).unwrap(),
    )
    .unwrap();
    let m1 = GaussianModel::new(
        vec![4.0, 4.0],
        Matrix::from_rows(&[[1.0, 0.5], [0.5, 1.0]]).unwrap(),
    )
    .unwrap();
    (m0, m1)
}

fn equicorrelated(sds: &[f64], rho: f64) -> Matrix {
    let d = sds.len();
    let mut c = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let r = if i == j { 1.0 } else { rho };
            c[(i, j)] = r * sds[i] * sds[j];
        }
    }
    c
}

pub fn imbalanced_10d_models() -> (GaussianModel, GaussianModel) {
    let d = 10;
    let mu1: Vec<f64> = (0..d).map(|i| if i < 5 { 1.25 } else { 0.625 }).collect();
    let m0 = GaussianModel::new(vec![0.0; d], equicorrelated(&[1.0; 10], 0.3)).unwrap();
    let m1 = GaussianModel::new(mu1, Matrix::identity(d)).unwrap();
    (m0, m1)
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// `log C = ½ log(|Σ₀|/|Σ₁|) + ½(μ₀ᵀΣ₀⁻¹μ₀ − μ₁ᵀΣ₁⁻¹μ₁)`, the constant of the
/// pdf ratio `p₁/p₀` once the quadratic and linear terms in `x` are factored
/// out. Swapping the models negates it.
pub fn log_ratio_constant(m0: &GaussianModel, m1: &GaussianModel) -> f64 {
    let q = |m: &GaussianModel| dot(m.mean(), &m.inverse().matvec(m.mean()));
    0.5 * (m0.log_det() - m1.log_det()) + 0.5 * (q(m0) - q(m1))
}

/// Boundary equation `BE(x) = log p₁(x) − log p₀(x)` in expanded quadratic
/// form, and its gradient `(Σ₀⁻¹ − Σ₁⁻¹)x + Σ₁⁻¹μ₁ − Σ₀⁻¹μ₀`.
pub fn qda_boundary(m0: &GaussianModel, m1: &GaussianModel, x: &[f64]) -> (f64, Vec<f64>) {
    let p0x = m0.inverse().matvec(x);
    let p1x = m1.inverse().matvec(x);
    let p0m = m0.inverse().matvec(m0.mean());
    let p1m = m1.inverse().matvec(m1.mean());
    let quad = -0.5 * (dot(x, &p1x) - dot(x, &p0x));
    let lin = dot(&p1m, x) - dot(&p0m, x);
    let be = quad + lin + log_ratio_constant(m0, m1);
    let grad = (0..x.len())
        .map(|i| p0x[i] - p1x[i] + p1m[i] - p0m[i])
        .collect();
    (be, grad)
}

/// Real roots of the one-dimensional boundary equation, ascending.
///
/// With equal variances this is the single linear root (the midpoint of the
/// means); identical models have no isolated root and give an empty result.
pub fn boundary_roots_1d(m0: &GaussianModel, m1: &GaussianModel) -> Result<Vec<f64>> {
    if m0.dim() != 1 || m1.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: m0.dim().max(m1.dim()),
        });
    }
    let (mu0, mu1) = (m0.mean()[0], m1.mean()[0]);
    let (v0, v1) = (m0.cov()[(0, 0)], m1.cov()[(0, 0)]);
    // a x² + b x + c = 0 from BE(x) = 0
    let a = 0.5 * (1.0 / v0 - 1.0 / v1);
    let b = mu1 / v1 - mu0 / v0;
    let c = 0.5 * libm::log(v0 / v1) + 0.5 * (mu0 * mu0 / v0 - mu1 * mu1 / v1);
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return Ok(Vec::new());
    }
    if a.abs() <= 1e-14 * scale {
        if b == 0.0 {
            return Ok(Vec::new());
        }
        return Ok(vec![-c / b]);
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Ok(Vec::new());
    }
    let sq = libm::sqrt(disc);
    let q = -0.5 * (b + libm::copysign(sq, b));
    let mut roots = if q == 0.0 {
        vec![0.0, 0.0]
    } else {
        vec![q / a, c / q]
    };
    roots.sort_by(f64::total_cmp);
    if disc == 0.0 {
        roots.truncate(1);
    }
    Ok(roots)
}

/// Probability that a draw from `m` lands beyond `boundary`.
///
/// In one dimension this is exact: `1 − Φ((x* − μ)/σ)` when the mean lies
/// below `x*` and `Φ((x* − μ)/σ)` otherwise. In higher dimensions the
/// boundary is the hyperplane through `x*` orthogonal to `x* − μ`, and the
/// probability is estimated from `n_mc` draws `μ + Lz`.
pub fn misclass_prob(
    m: &GaussianModel,
    boundary: &[f64],
    n_mc: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    if boundary.len() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            found: boundary.len(),
        });
    }
    if m.dim() == 1 {
        let z = (boundary[0] - m.mean()[0]) / libm::sqrt(m.cov()[(0, 0)]);
        return Ok(if m.mean()[0] <= boundary[0] {
            1.0 - normal_cdf(z)
        } else {
            normal_cdf(z)
        });
    }
    let normal: Vec<f64> = boundary.iter().zip(m.mean()).map(|(b, mu)| b - mu).collect();
    let offset = dot(&normal, &normal);
    if offset == 0.0 {
        return Ok(0.5);
    }
    misclass_prob_mc(m, n_mc, rng, |x| {
        let proj: f64 = x.iter().zip(m.mean()).zip(&normal).map(|((a, mu), n)| (a - mu) * n).sum();
        proj > offset
    })
}

/// Fraction of `n` draws from `m` for which `wrong_side` holds.
pub fn misclass_prob_mc(
    m: &GaussianModel,
    n: usize,
    rng: &mut RngStream,
    mut wrong_side: impl FnMut(&[f64]) -> bool,
) -> Result<f64> {
    if n == 0 {
        return Err(invalid("Monte-Carlo estimate needs at least one draw"));
    }
    let mut hits = 0usize;
    for _ in 0..n {
        if wrong_side(&m.sample(rng)) {
            hits += 1;
        }
    }
    Ok(hits as f64 / n as f64)
}
