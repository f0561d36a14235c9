//! Minority oversampling: SMOTE, ADASYN and Langevin sampling from a score
//! network trained on the minority class.
//!
//! Neighbour searches run on z-scored copies of the inputs; interpolation
//! happens in the original coordinates.

use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::{Label, LabeledDataset, Standardization};
use crate::error::{invalid, Error, Result};
use crate::langevin::{generate, LangevinConfig};
use crate::linalg::{sq_dist, Matrix};
use crate::rng::RngStream;
use crate::score_net::{train, ScoreNet, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum AugmentMethod {
    Smote { k: usize },
    Adasyn { k: usize },
    /// Trains on the minority rows, then samples with Langevin dynamics.
    /// The configs carry their own seeds.
    Score {
        train: TrainConfig,
        langevin: LangevinConfig,
        /// Fit the network and run the chains on z-scored minority rows.
        standardize: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentPlan {
    pub method: AugmentMethod,
    pub n_new: usize,
    /// Seed for SMOTE and ADASYN.
    pub seed: u64,
}

impl AugmentPlan {
    /// Plan that brings the minority class up to the majority count.
    pub fn balancing(data: &LabeledDataset, method: AugmentMethod, seed: u64) -> Self {
        let minority = data.minority_label();
        let n_new = data
            .class_count(1 - minority)
            .saturating_sub(data.class_count(minority));
        Self {
            method,
            n_new,
            seed,
        }
    }
}

/// Result of [`augment`].
#[derive(Debug, Clone)]
pub struct Augmented {
    /// Input rows followed by the synthetic rows, which are flagged.
    pub data: LabeledDataset,
    pub label: Label,
    pub generated: Matrix,
    /// Set for the score method.
    pub score_run: Option<ScoreOversample>,
}

/// Oversamples the minority class of `data` per `plan`.
pub fn augment(data: &LabeledDataset, plan: &AugmentPlan) -> Result<Augmented> {
    let label = data.minority_label();
    let minority = data.class_features(label);
    let mut rng = RngStream::new(plan.seed);
    let (generated, score_run) = match &plan.method {
        AugmentMethod::Smote { k } => (smote(&minority, *k, plan.n_new, &mut rng)?, None),
        AugmentMethod::Adasyn { k } => {
            let majority = data.class_features(1 - label);
            (adasyn(&minority, &majority, *k, plan.n_new, &mut rng)?, None)
        }
        AugmentMethod::Score {
            train,
            langevin,
            standardize,
        } => {
            let run = score_oversample(&minority, train, langevin, plan.n_new, *standardize)?;
            (run.samples.clone(), Some(run))
        }
    };
    Ok(Augmented {
        data: data.append_synthetic(&generated, label)?,
        label,
        generated,
        score_run,
    })
}

/// Indices of the `k` nearest rows of `pool` to `x`, nearest first,
/// skipping `exclude`. Ties break by index.
fn nearest(pool: &Matrix, x: &[f64], k: usize, exclude: Option<usize>) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = pool
        .iter_rows()
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude)
        .map(|(i, r)| (sq_dist(r, x), i))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    let k = k.min(d.len());
    if k < d.len() && k > 0 {
        d.select_nth_unstable_by(k - 1, cmp);
        d.truncate(k);
    }
    d.sort_by(cmp);
    d.into_iter().map(|(_, i)| i).collect()
}

fn check_minority(minority: &Matrix) -> Result<()> {
    if minority.rows() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            found: minority.rows(),
        });
    }
    Ok(())
}

/// For each minority row, draws `allocation[i]` points `x_i + u(x_nn − x_i)`
/// with `x_nn` uniform among its `k` nearest minority neighbours.
fn interpolate(
    minority: &Matrix,
    k: usize,
    allocation: &[usize],
    rng: &mut RngStream,
) -> Result<Matrix> {
    let z = Standardization::fit(minority).apply(minority);
    let d = minority.cols();
    let total: usize = allocation.iter().sum();
    let mut out = Vec::with_capacity(total * d);
    for (i, &count) in allocation.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let nbrs = nearest(&z, z.row(i), k, Some(i));
        let xi = minority.row(i);
        for _ in 0..count {
            let xn = minority.row(nbrs[rng.below(nbrs.len())]);
            let u = rng.uniform();
            out.extend(xi.iter().zip(xn).map(|(a, b)| a + u * (b - a)));
        }
    }
    Matrix::from_vec(total, d, out)
}

/// SMOTE. Synthetic points are spread over the minority rows as evenly as
/// possible (the first `n_new mod n` rows get one extra).
pub fn smote(minority: &Matrix, k: usize, n_new: usize, rng: &mut RngStream) -> Result<Matrix> {
    check_minority(minority)?;
    if k == 0 || k > minority.rows() - 1 {
        return Err(invalid("SMOTE needs 1 <= k <= minority size - 1"));
    }
    let allocation = largest_remainder(&vec![1.0; minority.rows()], n_new);
    interpolate(minority, k, &allocation, rng)
}

/// Splits `total` into integer parts proportional to `weights`, handing the
/// leftover units to the largest fractional remainders (lower index first
/// on ties). The parts always sum to `total`.
pub fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() || !(sum > 0.0) {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut parts: Vec<usize> = quotas.iter().map(|q| libm::floor(*q) as usize).collect();
    let assigned: usize = parts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - parts[a] as f64;
        let rb = quotas[b] - parts[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        parts[i] += 1;
    }
    parts
}

/// ADASYN difficulty of each minority row: the majority fraction among its
/// `k` nearest neighbours in the pooled data.
pub fn adasyn_difficulty(minority: &Matrix, majority: &Matrix, k: usize) -> Result<Vec<f64>> {
    let pool = minority.vstack(majority)?;
    let z = Standardization::fit(&pool).apply(&pool);
    let n_min = minority.rows();
    Ok((0..n_min)
        .map(|i| {
            let nbrs = nearest(&z, z.row(i), k, Some(i));
            nbrs.iter().filter(|&&j| j >= n_min).count() as f64 / nbrs.len().max(1) as f64
        })
        .collect())
}

/// Allocation of `n_new` points proportional to `difficulty`; uniform when
/// every difficulty is zero. The second value reports that fallback.
pub fn adasyn_allocation(difficulty: &[f64], n_new: usize) -> (Vec<usize>, bool) {
    if difficulty.iter().sum::<f64>() > 0.0 {
        (largest_remainder(difficulty, n_new), false)
    } else {
        (largest_remainder(&vec![1.0; difficulty.len()], n_new), true)
    }
}

/// ADASYN: SMOTE interpolation with per-row counts weighted by difficulty.
pub fn adasyn(
    minority: &Matrix,
    majority: &Matrix,
    k: usize,
    n_new: usize,
    rng: &mut RngStream,
) -> Result<Matrix> {
    check_minority(minority)?;
    if majority.rows() == 0 {
        return Err(Error::InsufficientSamples { needed: 1, found: 0 });
    }
    if k == 0 {
        return Err(invalid("ADASYN needs k >= 1"));
    }
    let difficulty = adasyn_difficulty(minority, majority, k)?;
    let (allocation, _) = adasyn_allocation(&difficulty, n_new);
    interpolate(minority, k.min(minority.rows() - 1), &allocation, rng)
}

/// Output of [`score_oversample`].
#[derive(Debug, Clone)]
pub struct ScoreOversample {
    /// Generated rows in the input coordinates.
    pub samples: Matrix,
    pub net: ScoreNet,
    /// Present when the network works on z-scored rows.
    pub standardization: Option<Standardization>,
    pub loss_history: Vec<f64>,
    /// `(chain, step)` of dropped chains.
    pub diverged: Vec<(usize, usize)>,
}

/// Fits a score network to the minority rows and draws `n_new` points with
/// Langevin chains started from them.
pub fn score_oversample(
    minority: &Matrix,
    train_cfg: &TrainConfig,
    langevin: &LangevinConfig,
    n_new: usize,
    standardize: bool,
) -> Result<ScoreOversample> {
    check_minority(minority)?;
    let standardization = standardize.then(|| Standardization::fit(minority));
    let work = match &standardization {
        Some(s) => s.apply(minority),
        None => minority.clone(),
    };
    let trained = train(&work, train_cfg)?;
    let gen = generate(&trained.net, &work, &langevin.clone().with_target(n_new))?;
    let samples = match &standardization {
        Some(s) => s.invert(&gen.samples),
        None => gen.samples,
    };
    Ok(ScoreOversample {
        samples,
        net: trained.net,
        standardization,
        loss_history: trained.loss_history,
        diverged: gen.diverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::GaussianModel;

    fn cloud(n: usize, seed: u64) -> Matrix {
        GaussianModel::standard(2).sample_n(&mut RngStream::new(seed), n)
    }

    #[test]
    fn smote_on_two_points_stays_on_segment() {
        let m = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let out = smote(&m, 1, 50, &mut RngStream::new(1)).unwrap();
        assert_eq!(out.rows(), 50);
        for r in out.iter_rows() {
            assert_eq!(r[0], r[1]);
            assert!((0.0..=1.0).contains(&r[0]));
        }
        assert_eq!(smote(&m, 1, 0, &mut RngStream::new(1)).unwrap().rows(), 0);
    }

    #[test]
    fn smote_errors() {
        let one = Matrix::from_rows(&[[0.0, 0.0]]).unwrap();
        assert_eq!(
            smote(&one, 1, 5, &mut RngStream::new(1)).unwrap_err(),
            Error::InsufficientSamples { needed: 2, found: 1 }
        );
        assert!(smote(&cloud(3, 1), 3, 5, &mut RngStream::new(1)).is_err());
    }

    #[test]
    fn allocation_examples() {
        assert_eq!(adasyn_allocation(&[0.2, 0.8], 10), (vec![2, 8], false));
        assert_eq!(adasyn_allocation(&[0.0, 0.0, 0.0], 7), (vec![3, 2, 2], true));
        assert_eq!(largest_remainder(&[1.0, 1.0, 1.0], 7), vec![3, 2, 2]);
    }

    #[test]
    fn isolated_minority_point_gets_nothing() {
        let minority = Matrix::from_rows(&[[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [10.0, 10.0]]).unwrap();
        let majority = Matrix::from_rows(&[[10.1, 10.0], [10.0, 10.1], [9.9, 10.0]]).unwrap();
        let diff = adasyn_difficulty(&minority, &majority, 2).unwrap();
        assert_eq!(&diff[..3], &[0.0, 0.0, 0.0]);
        assert_eq!(diff[3], 1.0);
        let (alloc, _) = adasyn_allocation(&diff, 9);
        assert_eq!(alloc, vec![0, 0, 0, 9]);
    }

    #[test]
    fn uniform_adasyn_matches_smote() {
        let m = cloud(20, 3);
        let a = adasyn_allocation(&[0.5; 20], 45).0;
        let s = largest_remainder(&[1.0; 20], 45);
        assert_eq!(a, s);
        let far = Matrix::from_rows(&[[100.0, 100.0], [101.0, 100.0]]).unwrap();
        let x = adasyn(&m, &far, 5, 45, &mut RngStream::new(9)).unwrap();
        let y = smote(&m, 5, 45, &mut RngStream::new(9)).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn seeded_methods_are_deterministic() {
        let m = cloud(30, 5);
        let a = smote(&m, 5, 40, &mut RngStream::new(2)).unwrap();
        let b = smote(&m, 5, 40, &mut RngStream::new(2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn augment_flags_and_balances() {
        let feats = cloud(40, 6);
        let labels: Vec<u8> = (0..40).map(|i| (i < 8) as u8).collect();
        let data = LabeledDataset::new(feats, labels).unwrap();
        let plan = AugmentPlan::balancing(&data, AugmentMethod::Smote { k: 3 }, 1);
        assert_eq!(plan.n_new, 24);
        let out = augment(&data, &plan).unwrap();
        assert_eq!(out.data.class_count(1), 32);
        assert_eq!(out.data.synthetic().iter().filter(|s| **s).count(), 24);
        assert!(out.data.synthetic()[..40].iter().all(|s| !s));
    }

    #[test]
    fn score_oversample_produces_requested_count() {
        let m = GaussianModel::univariate(-2.0, 1.0)
            .unwrap()
            .sample_n(&mut RngStream::new(4), 200);
        let tc = TrainConfig {
            epochs: 300,
            ..Default::default()
        };
        let lc = LangevinConfig::new(0.01, 20, 0.5, 7);
        let run = score_oversample(&m, &tc, &lc, 555, true).unwrap();
        assert_eq!(run.samples.rows(), 555);
        assert!(run.samples.as_slice().iter().all(|v| v.is_finite()));
        let again = score_oversample(&m, &tc, &lc, 555, true).unwrap();
        assert_eq!(run.samples, again.samples);
    }
}
