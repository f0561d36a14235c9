//! Unadjusted Langevin sampling, `x ← x + (ε/2)s(x) + √ε z`.
//!
//! There is no Metropolis correction, so samples carry an `O(ε)` bias
//! relative to the target.

use alloc::vec;
use alloc::vec::Vec;

use crate::density::ScoreField;
use crate::error::{invalid, Error, Result};
use crate::linalg::{norm, Matrix};
use crate::rng::RngStream;

/// How many leading states of each chain are thrown away.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Discard {
    /// Fraction `γ ∈ [0, 1)` of the chain: `floor(l·γ)` states.
    Rate(f64),
    /// A fixed number of states.
    First(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LangevinConfig {
    pub step_size: f64,
    pub chain_length: usize,
    pub discard: Discard,
    pub n_chains: usize,
    /// Kept samples wanted from [`generate`]; `None` runs exactly
    /// `n_chains` chains.
    pub target_count: Option<usize>,
    pub seed: u64,
}

impl LangevinConfig {
    pub fn new(step_size: f64, chain_length: usize, discard_rate: f64, seed: u64) -> Self {
        Self {
            step_size,
            chain_length,
            discard: Discard::Rate(discard_rate),
            n_chains: 1,
            target_count: None,
            seed,
        }
    }

    /// Discards the first `k` states instead of a fraction.
    pub fn discard_first(mut self, k: usize) -> Self {
        self.discard = Discard::First(k);
        self
    }

    pub fn with_chains(mut self, n: usize) -> Self {
        self.n_chains = n;
        self
    }

    pub fn with_target(mut self, n: usize) -> Self {
        self.target_count = Some(n);
        self
    }

    pub fn discarded_per_chain(&self) -> usize {
        match self.discard {
            // the nudge keeps products such as 100·0.29 from landing just
            // below an integer
            Discard::Rate(g) => libm::floor(self.chain_length as f64 * g + 1e-9) as usize,
            Discard::First(k) => k,
        }
    }

    /// `l − floor(l·γ)`
    pub fn kept_per_chain(&self) -> usize {
        self.chain_length.saturating_sub(self.discarded_per_chain())
    }

    pub fn target(&self) -> usize {
        self.target_count
            .unwrap_or(self.n_chains * self.kept_per_chain())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(invalid("Langevin step size must be positive"));
        }
        if self.chain_length == 0 {
            return Err(invalid("chain length must be at least 1"));
        }
        if let Discard::Rate(g) = self.discard {
            if !(0.0..1.0).contains(&g) {
                return Err(invalid("discard rate must lie in [0, 1)"));
            }
        }
        if self.kept_per_chain() == 0 {
            return Err(invalid("chain keeps no samples"));
        }
        Ok(())
    }
}

/// Runs one chain of `chain_length` steps from `x0` and returns the kept
/// (trailing) states as rows.
pub fn chain(
    field: &impl ScoreField,
    x0: &[f64],
    cfg: &LangevinConfig,
    rng: &mut RngStream,
) -> Result<Matrix> {
    cfg.validate()?;
    if field.dim() != x0.len() {
        return Err(Error::DimensionMismatch {
            expected: field.dim(),
            found: x0.len(),
        });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("chain start"));
    }
    let d = x0.len();
    let skip = cfg.discarded_per_chain();
    let half = 0.5 * cfg.step_size;
    let root = libm::sqrt(cfg.step_size);
    let mut x = x0.to_vec();
    let mut z = vec![0.0; d];
    let mut kept = Vec::with_capacity(cfg.kept_per_chain() * d);
    for step in 0..cfg.chain_length {
        let s = field.score(&x);
        rng.fill_standard_normal(&mut z);
        for i in 0..d {
            x[i] += half * s[i] + root * z[i];
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::DivergedSampling { step });
        }
        if step >= skip {
            kept.extend_from_slice(&x);
        }
    }
    Matrix::from_vec(kept.len() / d, d, kept)
}

/// Start probabilities `∝ 1/(‖s(x_i)‖ + η)` with `η = 10⁻⁶ × median ‖s‖`
/// (or `10⁻⁶` when the median norm is zero).
pub fn start_weights(field: &impl ScoreField, seeds: &Matrix) -> Result<Vec<f64>> {
    if seeds.rows() == 0 {
        return Err(Error::InsufficientSamples { needed: 1, found: 0 });
    }
    let norms: Vec<f64> = seeds.iter_rows().map(|x| norm(&field.score(x))).collect();
    let eta = inverse_norm_floor(&norms);
    let inv: Vec<f64> = norms.iter().map(|n| 1.0 / (n + eta)).collect();
    let total: f64 = inv.iter().sum();
    Ok(inv.iter().map(|w| w / total).collect())
}

/// Floor added to score norms before inverting them.
pub fn inverse_norm_floor(norms: &[f64]) -> f64 {
    let mut sorted = norms.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    let median = if m == 0 {
        0.0
    } else if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    };
    if median > 0.0 && median.is_finite() {
        1e-6 * median
    } else {
        1e-6
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    /// Kept states ordered by chain index, then step.
    pub samples: Matrix,
    pub chains_run: usize,
    /// `(chain index, step)` of every chain dropped for diverging.
    pub diverged: Vec<(usize, usize)>,
}

/// Runs chains from weighted seed starts until `cfg.target()` samples are
/// kept; the final chain is truncated. Chain `c` draws its start and its
/// noise from stream `c` split off the seed, so the output does not depend
/// on how many chains diverged before it.
pub fn generate(field: &impl ScoreField, seeds: &Matrix, cfg: &LangevinConfig) -> Result<Generated> {
    cfg.validate()?;
    let d = field.dim();
    let target = cfg.target();
    if target == 0 {
        return Ok(Generated {
            samples: Matrix::zeros(0, d),
            chains_run: 0,
            diverged: Vec::new(),
        });
    }
    if seeds.cols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: seeds.cols(),
        });
    }
    let weights = start_weights(field, seeds)?;
    let kept = cfg.kept_per_chain();
    let needed = target.div_ceil(kept);
    let max_chains = 2 * needed + 10;
    let root = RngStream::new(cfg.seed);
    let mut flat: Vec<f64> = Vec::with_capacity(target * d);
    let mut diverged = Vec::new();
    let mut c = 0;
    while flat.len() < target * d && c < max_chains {
        let mut rng = root.split(c as u64);
        let start = seeds.row(rng.choose_weighted(&weights)).to_vec();
        match chain(field, &start, cfg, &mut rng) {
            Ok(states) => {
                let take = (target * d - flat.len()).min(states.as_slice().len());
                flat.extend_from_slice(&states.as_slice()[..take]);
            }
            Err(Error::DivergedSampling { step }) => diverged.push((c, step)),
            Err(e) => return Err(e),
        }
        c += 1;
    }
    let out = Matrix::from_vec(flat.len() / d, d, flat)?;
    if out.rows() < target {
        if diverged.len() == c {
            return Err(Error::AllChainsDiverged { attempted: c });
        }
        return Err(Error::InsufficientSamples {
            needed: target,
            found: out.rows(),
        });
    }
    Ok(Generated {
        samples: out,
        chains_run: c,
        diverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::FnField;
    use crate::gaussian::{estimate_moments, pair_2d_models, GaussianModel};

    fn zero_field(d: usize) -> FnField<impl Fn(&[f64]) -> Vec<f64>> {
        FnField::new(d, move |_: &[f64]| vec![0.0; d])
    }

    #[test]
    fn discard_arithmetic() {
        for (l, g, kept) in [
            (10, 0.2, 8),
            (20, 0.9, 2),
            (40, 0.9, 4),
            (300, 0.1, 270),
            (100, 0.3, 70),
            (10, 0.1, 9),
        ] {
            assert_eq!(LangevinConfig::new(0.01, l, g, 0).kept_per_chain(), kept);
        }
        let c = LangevinConfig::new(0.003, 1000, 0.0, 0).discard_first(200);
        assert_eq!(c.kept_per_chain(), 800);
    }

    #[test]
    fn random_walk_variance() {
        let f = zero_field(1);
        let cfg = LangevinConfig::new(0.01, 100, 0.0, 0);
        let root = RngStream::new(3);
        let n = 4000;
        let mut ss = 0.0;
        for c in 0..n {
            let s = chain(&f, &[0.0], &cfg, &mut root.split(c)).unwrap();
            let last = s.row(s.rows() - 1)[0];
            ss += last * last;
        }
        let var = ss / n as f64;
        assert!((var - 1.0).abs() < 0.07, "{var}");
    }

    #[test]
    fn frozen_dynamics() {
        let g = GaussianModel::standard(2);
        let cfg = LangevinConfig::new(1e-12, 50, 0.0, 0);
        let s = chain(&g, &[1.0, -1.0], &cfg, &mut RngStream::new(1)).unwrap();
        for r in s.iter_rows() {
            assert!((r[0] - 1.0).abs() < 1e-5 && (r[1] + 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn long_chain_is_standard_normal() {
        let g = GaussianModel::standard(1);
        let cfg = LangevinConfig::new(0.003, 2_000_000, 0.01, 0);
        let s = chain(&g, &[0.0], &cfg, &mut RngStream::new(11)).unwrap();
        let m = estimate_moments(&s).unwrap();
        assert!(m.mean()[0].abs() < 0.05, "{}", m.mean()[0]);
        assert!((m.cov()[(0, 0)] - 1.0).abs() < 0.1);
    }

    #[test]
    fn divergence_carries_step() {
        let f = FnField::new(1, |x: &[f64]| vec![1e300 * (1.0 + x[0].abs())]);
        let cfg = LangevinConfig::new(1.0, 10, 0.0, 0);
        assert!(matches!(
            chain(&f, &[1.0], &cfg, &mut RngStream::new(0)),
            Err(Error::DivergedSampling { .. })
        ));
        let seeds = Matrix::from_rows(&[[0.0]]).unwrap();
        assert!(matches!(
            generate(&f, &seeds, &cfg.with_chains(3)),
            Err(Error::AllChainsDiverged { .. })
        ));
    }

    #[test]
    fn weights() {
        let f = FnField::new(1, |x: &[f64]| vec![-x[0]]);
        let seeds = Matrix::from_rows(&[[1.0], [-1.0], [1.0]]).unwrap();
        let w = start_weights(&f, &seeds).unwrap();
        assert!(w.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        let seeds = Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let w = start_weights(&f, &seeds).unwrap();
        assert!(w.iter().all(|v| v.is_finite()));
        assert!(w[0] > 0.99);
    }

    #[test]
    fn weights_rank_with_pdf() {
        let g = GaussianModel::standard(1);
        let seeds = g.sample_n(&mut RngStream::new(5), 200);
        let w = start_weights(&g, &seeds).unwrap();
        let pdf: Vec<f64> = seeds.iter_rows().map(|x| g.pdf(x)).collect();
        let rank = |v: &[f64]| {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
            let mut r = vec![0.0; v.len()];
            for (k, &i) in idx.iter().enumerate() {
                r[i] = k as f64;
            }
            r
        };
        let (rw, rp) = (rank(&w), rank(&pdf));
        let n = w.len() as f64;
        let d2: f64 = rw.iter().zip(&rp).map(|(a, b)| (a - b) * (a - b)).sum();
        let rho = 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
        assert!(rho > 0.9, "{rho}");
    }

    #[test]
    fn generate_counts_and_determinism() {
        let (m0, _) = pair_2d_models();
        let seeds = m0.sample_n(&mut RngStream::new(1), 20);
        let cfg = LangevinConfig::new(0.01, 30, 0.2, 9).with_target(100);
        let a = generate(&m0, &seeds, &cfg).unwrap();
        assert_eq!(a.samples.rows(), 100);
        assert_eq!(a.chains_run, 5);
        let b = generate(&m0, &seeds, &cfg).unwrap();
        assert_eq!(a.samples, b.samples);
        let empty = generate(&m0, &seeds, &cfg.clone().with_target(0)).unwrap();
        assert_eq!(empty.samples.rows(), 0);
        let proto = LangevinConfig::new(0.003, 1000, 0.0, 1)
            .discard_first(200)
            .with_chains(100);
        assert_eq!(proto.target(), 80_000);
    }
}
