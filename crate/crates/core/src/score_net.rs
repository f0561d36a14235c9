//! Score networks `s_θ: R^d → R^d` trained by explicit or sliced score
//! matching.
//!
//! Both objectives drop the data-dependent constant, so loss values can be
//! (and usually are) negative. Gradients are exact: the Jacobian terms are
//! differentiated by pushing input tangents through the network with the
//! ReLU pattern frozen, which is exact away from the measure-zero kinks.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::mlp::Mlp;
use crate::rng::RngStream;

/// A square MLP used as a score field.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreNet {
    mlp: Mlp,
}

impl ScoreNet {
    pub fn new(mlp: Mlp) -> Result<Self> {
        if mlp.input_dim() != mlp.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: mlp.input_dim(),
                found: mlp.output_dim(),
            });
        }
        Ok(Self { mlp })
    }

    pub fn glorot(sizes: &[usize], rng: &mut RngStream) -> Result<Self> {
        Self::new(Mlp::glorot(sizes, rng)?)
    }

    /// Single affine layer `s(x) = A x + b`.
    pub fn linear(a: Matrix, b: Vec<f64>) -> Result<Self> {
        Self::new(Mlp::from_layers(&[(a, b)])?)
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp {
        &mut self.mlp
    }

    pub fn into_mlp(self) -> Mlp {
        self.mlp
    }

    pub fn dim(&self) -> usize {
        self.mlp.input_dim()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(self.mlp.forward(x))
    }

    /// Jacobian `∂s/∂x` and its trace.
    pub fn input_jacobian(&self, x: &[f64]) -> (Matrix, f64) {
        let j = self.mlp.input_jacobian(x);
        let tr = j.trace();
        (j, tr)
    }

    /// `(A, b)` when the network is a single affine layer.
    pub fn as_linear(&self) -> Option<(Matrix, Vec<f64>)> {
        (self.mlp.n_layers() == 1)
            .then(|| (self.mlp.weight_matrix(0), self.mlp.biases(0).to_vec()))
    }
}

/// Distribution of projection vectors for sliced score matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceDistribution {
    Gaussian,
    Rademacher,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    /// `½‖s‖² + tr(∇ₓ s)`
    ScoreMatching,
    /// `½‖s‖² + vᵀ(∇ₓ s)v`, averaged over `n_slices` fresh projections per
    /// sample.
    Sliced {
        n_slices: usize,
        distribution: SliceDistribution,
    },
}

fn draw_slice(rng: &mut RngStream, dist: SliceDistribution, out: &mut [f64]) {
    match dist {
        SliceDistribution::Gaussian => rng.fill_standard_normal(out),
        SliceDistribution::Rademacher => out.iter_mut().for_each(|v| *v = rng.rademacher()),
    }
}

/// Loss contribution of one sample; adds its parameter gradient (scaled by
/// `scale`) into `grad` when given.
fn sample_loss(
    net: &ScoreNet,
    x: &[f64],
    objective: Objective,
    rng: &mut RngStream,
    scale: f64,
    mut grad: Option<&mut [f64]>,
) -> f64 {
    let mlp = &net.mlp;
    let d = net.dim();
    let cache = mlp.forward_cache(x);
    let s = cache.output();
    let mut loss = 0.5 * s.iter().map(|v| v * v).sum::<f64>();
    if let Some(g) = grad.as_deref_mut() {
        mlp.backprop_output(&cache, s, scale, g);
    }
    match objective {
        Objective::ScoreMatching => {
            let mut e = vec![0.0; d];
            for j in 0..d {
                e[j] = 1.0;
                let ts = mlp.jvp(&cache, &e);
                loss += ts.last().unwrap()[j];
                if let Some(g) = grad.as_deref_mut() {
                    mlp.backprop_tangent(&cache, &ts, &e, scale, g);
                }
                e[j] = 0.0;
            }
        }
        Objective::Sliced {
            n_slices,
            distribution,
        } => {
            let m = n_slices.max(1);
            let w = 1.0 / m as f64;
            let mut v = vec![0.0; d];
            for _ in 0..m {
                draw_slice(rng, distribution, &mut v);
                let ts = mlp.jvp(&cache, &v);
                let jv = ts.last().unwrap();
                loss += w * v.iter().zip(jv).map(|(a, b)| a * b).sum::<f64>();
                if let Some(g) = grad.as_deref_mut() {
                    mlp.backprop_tangent(&cache, &ts, &v, scale * w, g);
                }
            }
        }
    }
    loss
}

fn check_batch(net: &ScoreNet, batch: &Matrix) -> Result<()> {
    if batch.rows() == 0 {
        return Err(Error::InsufficientSamples {
            needed: 1,
            found: 0,
        });
    }
    if batch.cols() != net.dim() {
        return Err(Error::DimensionMismatch {
            expected: net.dim(),
            found: batch.cols(),
        });
    }
    Ok(())
}

/// Batch mean of `½‖s(x)‖² + tr(∇ₓ s(x))`.
pub fn sm_loss(net: &ScoreNet, batch: &Matrix) -> Result<f64> {
    check_batch(net, batch)?;
    // the exact objective never touches the rng
    let mut rng = RngStream::new(0);
    let n = batch.rows() as f64;
    Ok(batch
        .iter_rows()
        .map(|x| sample_loss(net, x, Objective::ScoreMatching, &mut rng, 0.0, None))
        .sum::<f64>()
        / n)
}

/// Batch and slice mean of `vᵀ(∇ₓ s(x))v + ½‖s(x)‖²`.
pub fn ssm_loss(
    net: &ScoreNet,
    batch: &Matrix,
    n_slices: usize,
    distribution: SliceDistribution,
    rng: &mut RngStream,
) -> Result<f64> {
    check_batch(net, batch)?;
    if n_slices == 0 {
        return Err(invalid("sliced score matching needs at least one slice"));
    }
    let objective = Objective::Sliced {
        n_slices,
        distribution,
    };
    let n = batch.rows() as f64;
    Ok(batch
        .iter_rows()
        .map(|x| sample_loss(net, x, objective, rng, 0.0, None))
        .sum::<f64>()
        / n)
}

/// Batch-mean loss and its gradient with respect to every parameter, in the
/// flat layout of [`Mlp::params`].
pub fn param_gradients(
    net: &ScoreNet,
    batch: &Matrix,
    objective: Objective,
    rng: &mut RngStream,
) -> Result<(f64, Vec<f64>)> {
    check_batch(net, batch)?;
    let mut grad = vec![0.0; net.mlp.n_params()];
    let scale = 1.0 / batch.rows() as f64;
    let mut loss = 0.0;
    for x in batch.iter_rows() {
        loss += sample_loss(net, x, objective, rng, scale, Some(&mut grad));
    }
    Ok((loss * scale, grad))
}

/// Score-network training settings.
///
/// Defaults: no hidden layers, SGD step 0.01, 2000 epochs, full batch when
/// the data has at most 2000 rows (otherwise batches of 128), exact score
/// matching, no early stopping.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Hidden layer widths; empty gives a linear score `Ax + b`.
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    /// `None` means full batch.
    pub batch_size: Option<usize>,
    pub objective: Objective,
    pub seed: u64,
    /// Stop when the epoch loss has not improved for this many epochs.
    pub patience: Option<usize>,
    /// Rescale each step's gradient to at most this Euclidean norm.
    pub max_grad_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: Vec::new(),
            learning_rate: 0.01,
            epochs: 2000,
            batch_size: None,
            objective: Objective::ScoreMatching,
            seed: 0,
            patience: None,
            max_grad_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn layer_sizes(&self, dim: usize) -> Vec<usize> {
        let mut s = Vec::with_capacity(self.hidden.len() + 2);
        s.push(dim);
        s.extend_from_slice(&self.hidden);
        s.push(dim);
        s
    }

    fn effective_batch(&self, n: usize) -> usize {
        match self.batch_size {
            Some(b) => b.clamp(1, n),
            None if n <= 2000 => n,
            None => 128.min(n),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(invalid("learning rate must be positive"));
        }
        if let Objective::Sliced { n_slices: 0, .. } = self.objective {
            return Err(invalid("sliced score matching needs at least one slice"));
        }
        Ok(())
    }
}

/// A trained network with its per-epoch mean loss.
#[derive(Debug, Clone)]
pub struct TrainedScoreNet {
    pub net: ScoreNet,
    pub loss_history: Vec<f64>,
    pub stopped_early: bool,
}

/// Trains a freshly initialised network on the rows of `data`.
pub fn train(data: &Matrix, cfg: &TrainConfig) -> Result<TrainedScoreNet> {
    let root = RngStream::new(cfg.seed);
    let net = ScoreNet::glorot(&cfg.layer_sizes(data.cols()), &mut root.split(0))?;
    train_from(net, data, cfg)
}

/// Continues training from an existing network.
pub fn train_from(mut net: ScoreNet, data: &Matrix, cfg: &TrainConfig) -> Result<TrainedScoreNet> {
    cfg.validate()?;
    let n = data.rows();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, found: n });
    }
    if data.cols() != net.dim() {
        return Err(Error::DimensionMismatch {
            expected: net.dim(),
            found: data.cols(),
        });
    }
    let root = RngStream::new(cfg.seed);
    let mut shuffle_rng = root.split(1);
    let mut slice_rng = root.split(2);
    let batch = cfg.effective_batch(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    let mut stopped_early = false;

    for epoch in 0..cfg.epochs {
        if batch < n {
            shuffle_rng.shuffle(&mut order);
        }
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let rows = data.select_rows(chunk);
            let (loss, mut grad) = param_gradients(&net, &rows, cfg.objective, &mut slice_rng)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::DivergedTraining { epoch });
            }
            if let Some(max) = cfg.max_grad_norm {
                let norm = libm::sqrt(grad.iter().map(|g| g * g).sum::<f64>());
                if norm > max {
                    grad.iter_mut().for_each(|g| *g *= max / norm);
                }
            }
            for (p, g) in net.mlp.params_mut().iter_mut().zip(&grad) {
                *p -= cfg.learning_rate * g;
            }
            epoch_loss += loss * chunk.len() as f64;
        }
        epoch_loss /= n as f64;
        if !epoch_loss.is_finite() || net.mlp.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::DivergedTraining { epoch });
        }
        history.push(epoch_loss);
        if let Some(patience) = cfg.patience {
            if epoch_loss < best - 1e-9 * best.abs().max(1.0) {
                best = epoch_loss;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= patience {
                    stopped_early = true;
                    break;
                }
            }
        }
    }
    Ok(TrainedScoreNet {
        net,
        loss_history: history,
        stopped_early,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::spd_inverse_det;

    fn linear_1d(a: f64, b: f64) -> ScoreNet {
        ScoreNet::linear(Matrix::from_rows(&[[a]]).unwrap(), vec![b]).unwrap()
    }

    #[test]
    fn zero_net_outputs_zero() {
        let net = ScoreNet::new(Mlp::zeros(&[3, 5, 3]).unwrap()).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0; 3]);
        let batch = Matrix::from_rows(&[[1.0, 2.0, 3.0], [0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(sm_loss(&net, &batch).unwrap(), 0.0);
        let mut rng = RngStream::new(1);
        let l = ssm_loss(&net, &batch, 4, SliceDistribution::Gaussian, &mut rng).unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn score_vanishes_at_mode() {
        // N(2, 1): s(x) = 2 - x
        let net = linear_1d(-1.0, 2.0);
        assert_eq!(net.forward(&[2.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let net = linear_1d(-1.0, 0.0);
        assert!(matches!(
            net.forward(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(ScoreNet::new(Mlp::zeros(&[2, 3]).unwrap()).is_err());
    }

    #[test]
    fn linear_jacobian_is_exact() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, -4.0]]).unwrap();
        let net = ScoreNet::linear(a.clone(), vec![0.5, -0.5]).unwrap();
        let (j, tr) = net.input_jacobian(&[0.3, 0.7]);
        assert_eq!(j, a);
        assert_eq!(tr, -3.0);
    }

    #[test]
    fn gaussian_score_trace() {
        let cov = Matrix::from_rows(&[[1.0, -0.5], [-0.5, 1.0]]).unwrap();
        let (inv, _) = spd_inverse_det(&cov).unwrap();
        let net = ScoreNet::linear(inv.scaled(-1.0), vec![0.0, 0.0]).unwrap();
        let (_, tr) = net.input_jacobian(&[1.0, 2.0]);
        assert!((tr + 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_point_sm_loss() {
        let net = linear_1d(-1.0, 0.0);
        let batch = Matrix::from_rows(&[[0.0]]).unwrap();
        assert_eq!(sm_loss(&net, &batch).unwrap(), -1.0);
    }

    #[test]
    fn hand_gradient_one_layer() {
        // loss = ½(a x + b)² + a  ⇒  ∂a = x(ax+b) + 1, ∂b = ax + b
        let (a, b, x) = (0.7, -0.3, 1.9);
        let net = linear_1d(a, b);
        let batch = Matrix::from_rows(&[[x]]).unwrap();
        let mut rng = RngStream::new(0);
        let (loss, g) = param_gradients(&net, &batch, Objective::ScoreMatching, &mut rng).unwrap();
        let s = a * x + b;
        assert!((loss - (0.5 * s * s + a)).abs() < 1e-14);
        assert!((g[0] - (x * s + 1.0)).abs() < 1e-14);
        assert!((g[1] - s).abs() < 1e-14);
    }

    #[test]
    fn rademacher_slices_exact_on_diagonal() {
        let a = Matrix::from_diag(&[-1.5, 0.5, -2.0]);
        let net = ScoreNet::linear(a, vec![0.0; 3]).unwrap();
        let batch = Matrix::zeros(1, 3);
        let mut rng = RngStream::new(9);
        let l = ssm_loss(&net, &batch, 1, SliceDistribution::Rademacher, &mut rng).unwrap();
        assert!((l - (-3.0)).abs() < 1e-15);
    }

    #[test]
    fn degenerate_data_trains() {
        let data = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        let cfg = TrainConfig {
            hidden: vec![8],
            epochs: 50,
            ..TrainConfig::default()
        };
        let out = train(&data, &cfg).unwrap();
        assert!(out.loss_history.iter().all(|l| l.is_finite()));
    }

    #[test]
    fn too_few_samples() {
        let data = Matrix::from_rows(&[[1.0]]).unwrap();
        assert!(matches!(
            train(&data, &TrainConfig::default()),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn divergence_is_reported_with_epoch() {
        let data = Matrix::from_rows(&[[0.0], [10.0], [-10.0]]).unwrap();
        let cfg = TrainConfig {
            learning_rate: 50.0,
            epochs: 500,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(&data, &cfg),
            Err(Error::DivergedTraining { .. })
        ));
    }

    fn random_batch(rng: &mut RngStream, n: usize, d: usize) -> Matrix {
        let data = (0..n * d).map(|_| rng.standard_normal()).collect();
        Matrix::from_vec(n, d, data).unwrap()
    }

    fn fd_check(objective: Objective, seed: u64) {
        let mut rng = RngStream::new(seed);
        let net = ScoreNet::glorot(&[3, 6, 5, 3], &mut rng).unwrap();
        let batch = random_batch(&mut rng, 4, 3);
        let slice_seed = seed + 1000;
        let loss_at = |n: &ScoreNet| {
            let mut r = RngStream::new(slice_seed);
            param_gradients(n, &batch, objective, &mut r).unwrap().0
        };
        let (_, g) = param_gradients(&net, &batch, objective, &mut RngStream::new(slice_seed)).unwrap();
        let h = 1e-5;
        for k in 0..g.len() {
            let mut plus = net.clone();
            plus.mlp_mut().params_mut()[k] += h;
            let mut minus = net.clone();
            minus.mlp_mut().params_mut()[k] -= h;
            let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
            let err = (fd - g[k]).abs() / fd.abs().max(g[k].abs()).max(1e-6);
            assert!(err < 1e-4, "param {k}: analytic {} vs fd {fd}", g[k]);
        }
    }

    #[test]
    fn sm_gradients_match_finite_differences() {
        for seed in 0..3 {
            fd_check(Objective::ScoreMatching, seed);
        }
    }

    #[test]
    fn ssm_gradients_match_finite_differences() {
        for seed in 0..3 {
            fd_check(
                Objective::Sliced {
                    n_slices: 3,
                    distribution: SliceDistribution::Gaussian,
                },
                seed,
            );
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = RngStream::new(77);
        let net = ScoreNet::glorot(&[4, 8, 4], &mut rng).unwrap();
        let x: Vec<f64> = (0..4).map(|_| rng.standard_normal()).collect();
        let (j, _) = net.input_jacobian(&x);
        let h = 1e-6;
        for c in 0..4 {
            let mut xp = x.clone();
            xp[c] += h;
            let mut xm = x.clone();
            xm[c] -= h;
            let (fp, fm) = (net.forward(&xp).unwrap(), net.forward(&xm).unwrap());
            for r in 0..4 {
                let fd = (fp[r] - fm[r]) / (2.0 * h);
                assert!((fd - j[(r, c)]).abs() <= 1e-5 * fd.abs().max(1e-3));
            }
        }
    }

    #[test]
    fn many_gaussian_slices_approach_trace() {
        let mut rng = RngStream::new(5);
        let net = ScoreNet::glorot(&[3, 10, 3], &mut rng).unwrap();
        let batch = random_batch(&mut rng, 5, 3);
        let sm = sm_loss(&net, &batch).unwrap();
        let ssm = ssm_loss(&net, &batch, 10_000, SliceDistribution::Gaussian, &mut rng).unwrap();
        assert!((ssm - sm).abs() / (sm.abs() + 1e-9) < 0.05, "{ssm} vs {sm}");
    }

    #[test]
    fn standard_normal_sm_loss_expectation() {
        let mut rng = RngStream::new(3);
        let batch = random_batch(&mut rng, 20_000, 1);
        let l = sm_loss(&linear_1d(-1.0, 0.0), &batch).unwrap();
        assert!((l + 0.5).abs() < 0.02, "{l}");
    }

    #[test]
    fn training_is_deterministic() {
        let mut rng = RngStream::new(8);
        let data = random_batch(&mut rng, 40, 2);
        let cfg = TrainConfig {
            hidden: vec![6],
            epochs: 20,
            batch_size: Some(8),
            seed: 4,
            ..TrainConfig::default()
        };
        let a = train(&data, &cfg).unwrap();
        let b = train(&data, &cfg).unwrap();
        assert_eq!(a.net, b.net);
        assert_eq!(a.loss_history, b.loss_history);
    }

    #[test]
    fn linear_fit_recovers_shifted_normal() {
        let mut rng = RngStream::new(42);
        let data: Vec<f64> = (0..1000).map(|_| rng.standard_normal() - 2.0).collect();
        let data = Matrix::from_vec(1000, 1, data).unwrap();
        let out = train(&data, &TrainConfig::default()).unwrap();
        let (a, b) = out.net.as_linear().unwrap();
        assert!((-1.1..=-0.9).contains(&a[(0, 0)]), "slope {}", a[(0, 0)]);
        assert!((-2.2..=-1.8).contains(&b[0]), "intercept {}", b[0]);
    }
}
