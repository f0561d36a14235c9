//! Binary decision rules and classifiers: Bayes posteriors from class
//! densities, soft-margin rules, Newton-Raphson boundary search, logistic
//! regression and its score fields, neighbourhood voting, score-norm
//! contrast, anchored generative classification and a small MLP.

use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::{Label, LabeledDataset};
use crate::density::{line_integral, ScoreField};
use crate::error::{invalid, Error, Result};
use crate::gaussian::{estimate_moments, GaussianModel};
use crate::langevin::inverse_norm_floor;
use crate::linalg::{dot, norm, sq_dist, Matrix};
use crate::mlp::Mlp;
use crate::rng::RngStream;
use crate::score_net::ScoreNet;

/// Logistic function without overflow for large `|z|`.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// Bayes posterior `p(x|y_j)p(y_j) / Σ_k p(x|y_k)p(y_k)`.
pub fn generative_posterior(densities: [f64; 2], priors: [f64; 2]) -> Result<[f64; 2]> {
    if densities.iter().chain(&priors).any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(invalid("densities and priors must be finite and non-negative"));
    }
    let w = [densities[0] * priors[0], densities[1] * priors[1]];
    let total = w[0] + w[1];
    if total == 0.0 {
        return Err(Error::UndefinedPosterior);
    }
    Ok([w[0] / total, w[1] / total])
}

/// [`generative_posterior`] from log-densities, safe where the densities
/// themselves underflow.
pub fn posterior_from_log(log_densities: [f64; 2], priors: [f64; 2]) -> Result<[f64; 2]> {
    if priors.iter().any(|p| !(*p >= 0.0)) {
        return Err(invalid("priors must be non-negative"));
    }
    let l = [
        log_densities[0] + libm::log(priors[0]),
        log_densities[1] + libm::log(priors[1]),
    ];
    if l.iter().any(|v| v.is_nan()) || l.iter().all(|v| *v == f64::NEG_INFINITY) {
        return Err(Error::UndefinedPosterior);
    }
    let p1 = sigmoid(l[1] - l[0]);
    Ok([1.0 - p1, p1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionRule {
    /// 1 iff `p₁ − p₀ ≥ γ₀`.
    AbsoluteGap,
    /// 1 iff `log(p₁/p₀) ≥ γ₀`.
    LogRatio,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Priors {
    Fixed([f64; 2]),
    /// Class frequencies of the training data.
    Empirical,
}

impl Priors {
    pub fn resolve(&self, data: &LabeledDataset) -> Result<[f64; 2]> {
        match *self {
            Priors::Fixed(p) => {
                if p.iter().any(|v| !(*v > 0.0)) || (p[0] + p[1] - 1.0).abs() > 1e-12 {
                    return Err(invalid("priors must be positive and sum to 1"));
                }
                Ok(p)
            }
            Priors::Empirical => {
                let n = data.len() as f64;
                let n1 = data.class_count(1) as f64;
                if n1 == 0.0 || n1 == n {
                    return Err(invalid("empirical priors need both classes"));
                }
                Ok([1.0 - n1 / n, n1 / n])
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionConfig {
    pub margin: f64,
    pub rule: DecisionRule,
    pub priors: Priors,
}

impl Default for DecisionConfig {
    fn default() -> Self {
        Self {
            margin: 0.0,
            rule: DecisionRule::LogRatio,
            priors: Priors::Fixed([0.5, 0.5]),
        }
    }
}

/// Soft-margin binary rule. Equality satisfies the rule, so `p₁ = p₀` with
/// `γ₀ = 0` gives label 1. Under `LogRatio`, `p₀ = 0` gives 1 when `p₁ > 0`
/// and 0 when both vanish.
pub fn decide_binary(p1: f64, p0: f64, margin: f64, rule: DecisionRule) -> Label {
    let hit = match rule {
        DecisionRule::AbsoluteGap => p1 - p0 >= margin,
        DecisionRule::LogRatio => {
            if p0 == 0.0 {
                p1 > 0.0
            } else {
                libm::log(p1 / p0) >= margin
            }
        }
    };
    hit as Label
}

/// Boundary point found by [`newton_raphson_boundary`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Root of `γ(x) = 0` by Newton-Raphson. In more than one dimension each
/// step is scalar Newton along the current gradient,
/// `x ← x − γ(x) ∇γ / ‖∇γ‖²`.
pub fn newton_raphson_boundary(
    gamma: impl Fn(&[f64]) -> f64,
    grad: impl Fn(&[f64]) -> Vec<f64>,
    x_init: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<BoundaryPoint> {
    let mut x = x_init.to_vec();
    let mut residual = gamma(&x);
    for it in 0..=max_iter {
        if !residual.is_finite() {
            return Err(Error::NonFinite("boundary residual"));
        }
        if residual.abs() < tol {
            return Ok(BoundaryPoint {
                x,
                residual,
                iterations: it,
            });
        }
        if it == max_iter {
            break;
        }
        let g = grad(&x);
        let g2 = dot(&g, &g);
        if !(g2 > 0.0) || !g2.is_finite() {
            return Err(Error::StationaryGradient { iteration: it });
        }
        let step = residual / g2;
        x.iter_mut().zip(&g).for_each(|(xi, gi)| *xi -= step * gi);
        residual = gamma(&x);
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual,
    })
}

/// Logistic regression `p(y=1|x) = σ(θᵀ[1, x])`, intercept first.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub theta: Vec<f64>,
}

/// Bound on `‖θ‖` that stops the MLE running away on separable data.
pub const LOGISTIC_NORM_CAP: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Ridge weight on the non-intercept coefficients, applied to the mean
    /// log-likelihood. `1/(C·n)` matches a per-sample-sum penalty with
    /// inverse strength `C`.
    pub l2: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 5000,
            l2: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub model: LogisticModel,
    /// The norm cap was hit, or the training data are perfectly separated
    /// and the coefficients were pushed out to the cap.
    pub capped: bool,
}

impl LogisticModel {
    pub fn dim(&self) -> usize {
        self.theta.len() - 1
    }

    /// `θᵀ[1, x]`
    pub fn logit(&self, x: &[f64]) -> f64 {
        self.theta[0] + dot(&self.theta[1..], x)
    }

    /// Coefficients without the intercept.
    pub fn theta_prime(&self) -> &[f64] {
        &self.theta[1..]
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        let p1 = self.predict_proba(x);
        decide_binary(p1, 1.0 - p1, 0.0, DecisionRule::AbsoluteGap)
    }

    /// `−θ₀/θ₁` for a one-feature model.
    pub fn boundary_1d(&self) -> Option<f64> {
        (self.theta.len() == 2 && self.theta[1] != 0.0).then(|| -self.theta[0] / self.theta[1])
    }

    /// Discriminative score fields in the `f₀ = θᵀx, f₁ = 0` form.
    pub fn score_fields(&self, x: &[f64]) -> DiscriminativeScores {
        let tp = self.theta_prime();
        let zero = vec![0.0; tp.len()];
        discriminative_score_fields(self.logit(x), tp, 0.0, &zero)
    }
}

/// Full-batch gradient ascent on the mean log-likelihood.
pub fn logistic_fit(data: &LabeledDataset, cfg: &LogisticConfig) -> Result<LogisticFit> {
    let n1 = data.class_count(1);
    if n1 == 0 || n1 == data.len() {
        return Err(invalid("logistic regression needs both labels present"));
    }
    let d = data.dim();
    let n = data.len() as f64;
    let mut theta = vec![0.0; d + 1];
    let mut capped = false;
    let mut grad = vec![0.0; d + 1];
    for _ in 0..cfg.epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (x, &y) in data.features().iter_rows().zip(data.labels()) {
            let r = y as f64 - sigmoid(theta[0] + dot(&theta[1..], x));
            grad[0] += r;
            for j in 0..d {
                grad[j + 1] += r * x[j];
            }
        }
        for j in 0..=d {
            let penalty = if j == 0 { 0.0 } else { cfg.l2 * theta[j] };
            theta[j] += cfg.learning_rate * (grad[j] / n - penalty);
        }
        let nt = norm(&theta);
        if nt > LOGISTIC_NORM_CAP {
            capped = true;
            theta.iter_mut().for_each(|t| *t *= LOGISTIC_NORM_CAP / nt);
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("logistic coefficients"));
        }
    }
    // Under perfect separation the unpenalised MLE lies at infinity along
    // the separating direction, so report the capped point on that ray.
    if cfg.l2 == 0.0 && !capped && separates(data, &theta) {
        let nt = norm(&theta);
        theta.iter_mut().for_each(|t| *t *= LOGISTIC_NORM_CAP / nt);
        capped = true;
    }
    Ok(LogisticFit {
        model: LogisticModel { theta },
        capped,
    })
}

fn separates(data: &LabeledDataset, theta: &[f64]) -> bool {
    data.features()
        .iter_rows()
        .zip(data.labels())
        .all(|(x, &y)| {
            let z = theta[0] + dot(&theta[1..], x);
            if y == 1 { z > 0.0 } else { z < 0.0 }
        })
}

/// Score fields of the discriminative densities `p(y=j|x) ∝ e^{−f_j(x)}`
/// and the gradient of `p(y=0|x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminativeScores {
    pub s0: Vec<f64>,
    pub s1: Vec<f64>,
    pub grad_p0: Vec<f64>,
}

impl DiscriminativeScores {
    pub fn grad_p1(&self) -> Vec<f64> {
        self.grad_p0.iter().map(|v| -v).collect()
    }
}

/// `s₀ = (f₁′ − f₀′)σ(f₀ − f₁)`, `s₁ = (f₀′ − f₁′)σ(f₁ − f₀)` and
/// `∇p₀ = (f₁′ − f₀′)σ(f₀ − f₁)σ(f₁ − f₀)`.
pub fn discriminative_score_fields(
    f0: f64,
    f0_grad: &[f64],
    f1: f64,
    f1_grad: &[f64],
) -> DiscriminativeScores {
    let a = sigmoid(f0 - f1);
    let b = sigmoid(f1 - f0);
    let diff: Vec<f64> = f1_grad.iter().zip(f0_grad).map(|(p, q)| p - q).collect();
    DiscriminativeScores {
        s0: diff.iter().map(|v| v * a).collect(),
        s1: diff.iter().map(|v| -v * b).collect(),
        grad_p0: diff.iter().map(|v| v * a * b).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VoteMode {
    /// Every training point within this Euclidean radius votes.
    FixedRadius(f64),
    /// The `k` nearest training points vote.
    FixedK(usize),
}

/// Outcome of a vote. Equal counts go to label 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Vote {
    Decided { label: Label, confidence: f64 },
    /// No training point inside the radius.
    Abstain,
}

impl Vote {
    pub fn label(&self) -> Option<Label> {
        match self {
            Vote::Decided { label, .. } => Some(*label),
            Vote::Abstain => None,
        }
    }

    /// Fraction of voters carrying label 1 (0.5 for an abstention).
    pub fn positive_fraction(&self) -> f64 {
        match *self {
            Vote::Decided { label: 1, confidence } => confidence,
            Vote::Decided { confidence, .. } => 1.0 - confidence,
            Vote::Abstain => 0.5,
        }
    }
}

fn tally(ones: usize, total: usize) -> Vote {
    if total == 0 {
        return Vote::Abstain;
    }
    let zeros = total - ones;
    if ones > zeros {
        Vote::Decided {
            label: 1,
            confidence: ones as f64 / total as f64,
        }
    } else {
        Vote::Decided {
            label: 0,
            confidence: zeros as f64 / total as f64,
        }
    }
}

/// Majority vote of the training points around `x`.
pub fn vote_classify(train: &LabeledDataset, x: &[f64], mode: VoteMode) -> Result<Vote> {
    if train.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, found: 0 });
    }
    if x.len() != train.dim() {
        return Err(Error::DimensionMismatch {
            expected: train.dim(),
            found: x.len(),
        });
    }
    let feats = train.features();
    let labels = train.labels();
    match mode {
        VoteMode::FixedRadius(r) => {
            if !(r >= 0.0) {
                return Err(invalid("voting radius must be non-negative"));
            }
            let r2 = r * r;
            let (mut ones, mut total) = (0, 0);
            for (row, &l) in feats.iter_rows().zip(labels) {
                if sq_dist(row, x) <= r2 {
                    total += 1;
                    ones += l as usize;
                }
            }
            Ok(tally(ones, total))
        }
        VoteMode::FixedK(k) => {
            if k == 0 {
                return Err(invalid("k must be at least 1"));
            }
            let k = k.min(train.len());
            let mut d: Vec<(f64, usize)> = feats
                .iter_rows()
                .enumerate()
                .map(|(i, row)| (sq_dist(row, x), i))
                .collect();
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < d.len() {
                d.select_nth_unstable_by(k - 1, cmp);
            }
            let ones = d[..k].iter().map(|&(_, i)| labels[i] as usize).sum();
            Ok(tally(ones, k))
        }
    }
}

/// Nearest-neighbour voting classifier holding its training set.
#[derive(Debug, Clone)]
pub struct KnnClassifier {
    pub train: LabeledDataset,
    pub mode: VoteMode,
}

impl KnnClassifier {
    pub fn predict(&self, x: &[f64]) -> Result<Vote> {
        vote_classify(&self.train, x, self.mode)
    }
}

/// Labels `x` by the class whose score norm is smaller, i.e. whose inverse
/// norm `1/(‖s_c(x)‖ + η)` is larger. A crude heuristic: small scores mark
/// modes of either class, not necessarily high density. Ties go to 0.
pub fn pseudo_pdf_contrast(
    field0: &impl ScoreField,
    field1: &impl ScoreField,
    x: &[f64],
) -> (Label, f64) {
    let norms = [norm(&field0.score(x)), norm(&field1.score(x))];
    let eta = inverse_norm_floor(&norms);
    let w = [1.0 / (norms[0] + eta), 1.0 / (norms[1] + eta)];
    let total = w[0] + w[1];
    if w[1] > w[0] {
        (1, w[1] / total)
    } else {
        (0, w[0] / total)
    }
}

/// Generative classifier: per-class densities from a score field integrated
/// along the straight line from an anchor `(x₀, p₀)`, combined with priors.
#[derive(Debug, Clone)]
pub struct GenerativeClassifier<F> {
    pub fields: [F; 2],
    pub anchors: [(Vec<f64>, f64); 2],
    pub priors: [f64; 2],
    /// Path points per line integral.
    pub steps: usize,
}

/// Label, posteriors and class log-densities at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerativeDecision {
    pub label: Label,
    pub posteriors: [f64; 2],
    pub log_densities: [f64; 2],
}

impl<F: ScoreField> GenerativeClassifier<F> {
    pub fn new(fields: [F; 2], anchors: [(Vec<f64>, f64); 2], priors: [f64; 2]) -> Result<Self> {
        for (f, (x0, p0)) in fields.iter().zip(&anchors) {
            if f.dim() != x0.len() {
                return Err(Error::DimensionMismatch {
                    expected: f.dim(),
                    found: x0.len(),
                });
            }
            if !(*p0 > 0.0) || !p0.is_finite() {
                return Err(invalid("anchor densities must be positive"));
            }
        }
        Ok(Self {
            fields,
            anchors,
            priors,
            steps: 200,
        })
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn log_density(&self, class: usize, x: &[f64]) -> Result<f64> {
        let (x0, p0) = &self.anchors[class];
        Ok(libm::log(*p0) + line_integral(&self.fields[class], x0, x, self.steps)?)
    }

    pub fn classify(&self, x: &[f64]) -> Result<GenerativeDecision> {
        let log_densities = [self.log_density(0, x)?, self.log_density(1, x)?];
        if log_densities.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::NonFinite("reconstructed log-density"));
        }
        let posteriors = posterior_from_log(log_densities, self.priors)?;
        let label = decide_binary(posteriors[1], posteriors[0], 0.0, DecisionRule::AbsoluteGap);
        Ok(GenerativeDecision {
            label,
            posteriors,
            log_densities,
        })
    }
}

/// Density implied by a learned linear score `s(x) = Ax + b` under a
/// Gaussian assumption: `f(x) = −½xᵀAx − bᵀx + ½μ̂ᵀAμ̂ + bᵀμ̂` (so that
/// `f(μ̂) = 0`) and `Z = (2π)^{d/2}|Σ̂|^{1/2}` from the sample covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianDensity {
    pub a: Matrix,
    pub b: Vec<f64>,
    pub mean: Vec<f64>,
    pub log_z: f64,
}

impl LinearGaussianDensity {
    pub fn new(a: Matrix, b: Vec<f64>, samples: &Matrix) -> Result<Self> {
        let m = estimate_moments(samples)?;
        if a.rows() != m.dim() || a.cols() != m.dim() || b.len() != m.dim() {
            return Err(Error::DimensionMismatch {
                expected: m.dim(),
                found: a.rows(),
            });
        }
        Ok(Self {
            a,
            b,
            mean: m.mean().to_vec(),
            log_z: m.log_normaliser(),
        })
    }

    /// From a single-layer score network and the samples it was trained on.
    pub fn from_net(net: &ScoreNet, samples: &Matrix) -> Result<Self> {
        let (a, b) = net
            .as_linear()
            .ok_or_else(|| invalid("network is not a single affine layer"))?;
        Self::new(a, b, samples)
    }

    pub fn energy(&self, x: &[f64]) -> f64 {
        let q = |v: &[f64]| -0.5 * dot(v, &self.a.matvec(v)) - dot(&self.b, v);
        q(x) - q(&self.mean)
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        -self.energy(x) - self.log_z
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        libm::exp(self.log_pdf(x))
    }

    pub fn score(&self, x: &[f64]) -> Vec<f64> {
        let mut s = self.a.matvec(x);
        s.iter_mut().zip(&self.b).for_each(|(v, b)| *v += b);
        s
    }
}

impl ScoreField for LinearGaussianDensity {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn score(&self, x: &[f64]) -> Vec<f64> {
        LinearGaussianDensity::score(self, x)
    }
}

/// `γ(x) = f₀(x) − f₁(x) + log Z₀ − log Z₁ = log p₁(x) − log p₀(x)` and its
/// gradient `s₁(x) − s₀(x)`.
pub fn generative_boundary(
    d0: &LinearGaussianDensity,
    d1: &LinearGaussianDensity,
    x: &[f64],
) -> (f64, Vec<f64>) {
    let gamma = d0.energy(x) - d1.energy(x) + d0.log_z - d1.log_z;
    let (s0, s1) = (d0.score(x), d1.score(x));
    (gamma, s1.iter().zip(&s0).map(|(a, b)| a - b).collect())
}

/// Boundary search between two analytic Gaussians.
pub fn gaussian_boundary_point(
    m0: &GaussianModel,
    m1: &GaussianModel,
    x_init: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<BoundaryPoint> {
    newton_raphson_boundary(
        |x| crate::gaussian::qda_boundary(m0, m1, x).0,
        |x| crate::gaussian::qda_boundary(m0, m1, x).1,
        x_init,
        tol,
        max_iter,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpClassifierConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpClassifierConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 16],
            learning_rate: 0.05,
            epochs: 200,
            batch_size: 64,
            seed: 0,
        }
    }
}

/// Feed-forward network with one logit output, trained with binary
/// cross-entropy by minibatch SGD.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpClassifier {
    pub net: Mlp,
}

impl MlpClassifier {
    pub fn fit(data: &LabeledDataset, cfg: &MlpClassifierConfig) -> Result<Self> {
        if data.len() < 2 {
            return Err(Error::InsufficientSamples {
                needed: 2,
                found: data.len(),
            });
        }
        if !(cfg.learning_rate > 0.0) || cfg.batch_size == 0 {
            return Err(invalid("MLP classifier needs a positive learning rate and batch size"));
        }
        let mut sizes = vec![data.dim()];
        sizes.extend_from_slice(&cfg.hidden);
        sizes.push(1);
        let root = RngStream::new(cfg.seed);
        let mut net = Mlp::glorot(&sizes, &mut root.split(0))?;
        let mut shuffle = root.split(1);
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut grad = vec![0.0; net.n_params()];
        for epoch in 0..cfg.epochs {
            shuffle.shuffle(&mut order);
            for chunk in order.chunks(cfg.batch_size) {
                grad.iter_mut().for_each(|g| *g = 0.0);
                let scale = 1.0 / chunk.len() as f64;
                for &i in chunk {
                    let cache = net.forward_cache(data.row(i));
                    let p = sigmoid(cache.output()[0]);
                    let adj = [p - data.labels()[i] as f64];
                    net.backprop_output(&cache, &adj, scale, &mut grad);
                }
                for (p, g) in net.params_mut().iter_mut().zip(&grad) {
                    *p -= cfg.learning_rate * g;
                }
            }
            if net.params().iter().any(|p| !p.is_finite()) {
                return Err(Error::DivergedTraining { epoch });
            }
        }
        Ok(Self { net })
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.net.forward(x)[0])
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        let p1 = self.predict_proba(x);
        decide_binary(p1, 1.0 - p1, 0.0, DecisionRule::AbsoluteGap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::FnField;
    use crate::gaussian::{pair_2d_models, qda_boundary, DgpSpec};

    #[test]
    fn posterior_examples() {
        assert_eq!(generative_posterior([0.2, 0.2], [0.5, 0.5]).unwrap(), [0.5, 0.5]);
        let p = generative_posterior([0.1, 0.3], [0.943, 0.057]).unwrap();
        assert!((p[0] - 0.0943 / 0.1114).abs() < 1e-12);
        assert!((p[0] - 0.8465).abs() < 1e-4 && (p[1] - 0.1535).abs() < 1e-4);
        assert_eq!(generative_posterior([0.0, 0.3], [0.5, 0.5]).unwrap()[0], 0.0);
        assert_eq!(
            generative_posterior([0.0, 0.0], [0.5, 0.5]),
            Err(Error::UndefinedPosterior)
        );
        let l = posterior_from_log([libm::log(0.1), libm::log(0.3)], [0.943, 0.057]).unwrap();
        assert!((l[0] - p[0]).abs() < 1e-12 && (l[0] + l[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decision_examples() {
        assert_eq!(decide_binary(0.4, 0.4, 0.0, DecisionRule::AbsoluteGap), 1);
        assert_eq!(decide_binary(0.4, 0.4, 0.0, DecisionRule::LogRatio), 1);
        assert_eq!(decide_binary(0.6, 0.5, 0.2, DecisionRule::AbsoluteGap), 0);
        assert_eq!(decide_binary(0.1, 0.0, 5.0, DecisionRule::LogRatio), 1);
        assert_eq!(decide_binary(0.0, 0.0, 0.0, DecisionRule::LogRatio), 0);
    }

    #[test]
    fn newton_midpoint_and_errors() {
        let m0 = GaussianModel::univariate(-2.0, 1.0).unwrap();
        let m1 = GaussianModel::univariate(2.0, 1.0).unwrap();
        let p = gaussian_boundary_point(&m0, &m1, &[1.3], 1e-12, 50).unwrap();
        assert!(p.x[0].abs() < 1e-9);
        let flat = newton_raphson_boundary(|_| 1.0, |_| vec![0.0], &[0.0], 1e-9, 10);
        assert_eq!(flat, Err(Error::StationaryGradient { iteration: 0 }));
        // x² + 1 has no real root
        let r = newton_raphson_boundary(|x| x[0] * x[0] + 1.0, |x| vec![2.0 * x[0]], &[0.3], 1e-9, 20);
        assert!(matches!(r, Err(Error::NonConvergence { iterations: 20, .. })));
    }

    #[test]
    fn newton_2d_points_lie_on_quadratic_boundary() {
        let (m0, m1) = pair_2d_models();
        let mut rng = RngStream::new(12);
        for _ in 0..20 {
            let x0 = [rng.uniform_in(-2.0, 6.0), rng.uniform_in(-2.0, 6.0)];
            let p = gaussian_boundary_point(&m0, &m1, &x0, 1e-9, 100).unwrap();
            assert!(qda_boundary(&m0, &m1, &p.x).0.abs() < 1e-6);
        }
    }

    #[test]
    fn logistic_examples() {
        let sim = DgpSpec::pair_1d(42).simulate().unwrap();
        let fit = logistic_fit(&sim.data, &LogisticConfig::default()).unwrap();
        let b = fit.model.boundary_1d().unwrap();
        assert!(b.abs() <= 0.15, "boundary {b}");
        assert!(!fit.capped);

        let mut rng = RngStream::new(1);
        let x: Vec<f64> = (0..2000).map(|_| rng.standard_normal()).collect();
        let y: Vec<u8> = (0..2000).map(|_| (rng.uniform() < 0.5) as u8).collect();
        let ds = LabeledDataset::new(Matrix::from_vec(2000, 1, x).unwrap(), y).unwrap();
        let fit = logistic_fit(&ds, &LogisticConfig::default()).unwrap();
        assert!(fit.model.theta[1].abs() < 0.05);
    }

    #[test]
    fn separable_data_hits_cap() {
        let ds = LabeledDataset::new(
            Matrix::from_rows(&[[-1.0], [-2.0], [1.0], [2.0]]).unwrap(),
            vec![0, 0, 1, 1],
        )
        .unwrap();
        let cfg = LogisticConfig {
            learning_rate: 100.0,
            epochs: 2000,
            l2: 0.0,
        };
        let fit = logistic_fit(&ds, &cfg).unwrap();
        assert!(fit.capped);
        assert!(norm(&fit.model.theta) <= LOGISTIC_NORM_CAP * (1.0 + 1e-12));
    }

    #[test]
    fn logistic_scores_at_boundary() {
        let m = LogisticModel {
            theta: vec![-0.1, 3.5],
        };
        let x = [0.1 / 3.5];
        let s = m.score_fields(&x);
        assert!((s.s0[0] + 1.75).abs() < 1e-12 && (s.s1[0] - 1.75).abs() < 1e-12);
        let same = discriminative_score_fields(0.7, &[1.0, 2.0], 0.7, &[1.0, 2.0]);
        assert!(same.s0.iter().chain(&same.s1).chain(&same.grad_p0).all(|v| *v == 0.0));
    }

    #[test]
    fn appendix_identities_and_gradient() {
        let mut rng = RngStream::new(8);
        for _ in 0..50 {
            let c: Vec<f64> = (0..6).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
            let f0 = |x: &[f64]| c[0] * x[0] * x[0] + c[1] * x[1] + libm::sin(c[2] * x[0]);
            let f0g = |x: &[f64]| vec![2.0 * c[0] * x[0] + c[2] * libm::cos(c[2] * x[0]), c[1]];
            let f1 = |x: &[f64]| c[3] * x[1] * x[1] + c[4] * x[0] * x[1] + c[5];
            let f1g = |x: &[f64]| vec![c[4] * x[1], 2.0 * c[3] * x[1] + c[4] * x[0]];
            let x = [rng.uniform_in(-2.0, 2.0), rng.uniform_in(-2.0, 2.0)];
            let s = discriminative_score_fields(f0(&x), &f0g(&x), f1(&x), &f1g(&x));
            let (g0, g1) = (f0g(&x), f1g(&x));
            for i in 0..2 {
                assert!((s.s0[i] - s.s1[i] - (g1[i] - g0[i])).abs() < 1e-9);
                if s.s1[i].abs() > 1e-8 {
                    let ratio = s.s0[i] / s.s1[i];
                    let expected = -libm::exp(f0(&x) - f1(&x));
                    assert!((ratio - expected).abs() < 1e-9 * expected.abs().max(1.0));
                }
            }
            let p0 = |x: &[f64]| sigmoid(f1(x) - f0(x));
            let h = 1e-6;
            for i in 0..2 {
                let mut a = x;
                a[i] += h;
                let mut b = x;
                b[i] -= h;
                let fd = (p0(&a) - p0(&b)) / (2.0 * h);
                assert!((fd - s.grad_p0[i]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn voting_examples() {
        let ds = LabeledDataset::new(
            Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [5.0, 5.0]]).unwrap(),
            vec![1, 0, 1, 0],
        )
        .unwrap();
        let v = vote_classify(&ds, &[5.0, 5.0], VoteMode::FixedK(1)).unwrap();
        assert_eq!(v, Vote::Decided { label: 0, confidence: 1.0 });
        let v = vote_classify(&ds, &[0.0, 0.0], VoteMode::FixedK(1)).unwrap();
        assert_eq!(v.label(), Some(1));
        let v = vote_classify(&ds, &[0.5, 0.0], VoteMode::FixedRadius(0.5)).unwrap();
        assert_eq!(v, Vote::Decided { label: 0, confidence: 0.5 });
        let v = vote_classify(&ds, &[20.0, 20.0], VoteMode::FixedRadius(1.0)).unwrap();
        assert_eq!(v, Vote::Abstain);
    }

    #[test]
    fn pseudo_pdf_examples() {
        let (m0, m1) = pair_2d_models();
        assert_eq!(pseudo_pdf_contrast(&m0, &m1, &[4.0, 4.0]).0, 1);
        let f = FnField::new(1, |x: &[f64]| vec![x[0]]);
        let g = FnField::new(1, |x: &[f64]| vec![-x[0]]);
        assert_eq!(pseudo_pdf_contrast(&f, &g, &[1.0]), (0, 0.5));
    }

    #[test]
    fn generative_matches_quadratic_boundary() {
        let (m0, m1) = pair_2d_models();
        let anchors = [(m0.mean().to_vec(), 0.18), (m1.mean().to_vec(), 0.18)];
        let clf = GenerativeClassifier::new([&m0, &m1], anchors, [0.5, 0.5]).unwrap();
        let mut rng = RngStream::new(2);
        for _ in 0..200 {
            let x = [rng.uniform_in(-2.0, 6.0), rng.uniform_in(-2.0, 6.0)];
            let be = qda_boundary(&m0, &m1, &x).0;
            if be.abs() > 1e-3 {
                assert_eq!(clf.classify(&x).unwrap().label, (be > 0.0) as u8);
            }
        }
    }

    #[test]
    fn linear_gaussian_density_integrates_analytically() {
        let m = GaussianModel::univariate(-2.0, 1.0).unwrap();
        let samples = m.sample_n(&mut RngStream::new(3), 5000);
        let est = estimate_moments(&samples).unwrap();
        let inv = est.inverse().clone();
        let b = inv.matvec(est.mean());
        let d = LinearGaussianDensity::new(inv.scaled(-1.0), b, &samples).unwrap();
        for x in [-4.0, -2.0, 0.5] {
            assert!((d.log_pdf(&[x]) - est.log_pdf(&[x])).abs() < 1e-9);
        }
    }

    #[test]
    fn mlp_classifier_learns_separated_blobs() {
        let sim = DgpSpec::pair_2d(3).simulate().unwrap();
        let cfg = MlpClassifierConfig {
            epochs: 30,
            ..Default::default()
        };
        let clf = MlpClassifier::fit(&sim.data, &cfg).unwrap();
        let correct = (0..sim.data.len())
            .filter(|&i| clf.predict(sim.data.row(i)) == sim.data.labels()[i])
            .count();
        assert!(correct as f64 / sim.data.len() as f64 > 0.97);
    }
}
