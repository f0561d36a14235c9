//! Experiment specification, read from and written to TOML.
//!
//! See the README for the field-by-field schema.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use scoregen_core::classify::{DecisionRule, LogisticConfig, MlpClassifierConfig, Priors};
use scoregen_core::density::InitialDensity;
use scoregen_core::eval::SplitSpec;
use scoregen_core::gaussian::DgpSpec;
use scoregen_core::langevin::{Discard, LangevinConfig};
use scoregen_core::{Objective, SliceDistribution, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub task: Task,
    /// Z-score features with statistics of the training split.
    #[serde(default)]
    pub standardize: bool,
    pub data: DataSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitSection>,
    #[serde(default)]
    pub flip: FlipSection,
    #[serde(default)]
    pub augment: AugmentSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classifier: Option<ClassifierSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensitySection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    /// load, split, flip, augment, fit, evaluate
    #[default]
    Classify,
    /// per-class score fit and density reconstruction on a 1D grid
    Density,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DgpPreset {
    Pair1d,
    Pair2d,
    Imbalanced10d,
}

impl DgpPreset {
    pub fn spec(self, seed: u64) -> DgpSpec {
        match self {
            Self::Pair1d => DgpSpec::pair_1d(seed),
            Self::Pair2d => DgpSpec::pair_2d(seed),
            Self::Imbalanced10d => DgpSpec::imbalanced_10d(seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSpec {
    Simulate {
        preset: DgpPreset,
        /// Defaults to the experiment seed.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Csv {
        path: PathBuf,
        #[serde(default = "default_label_column")]
        label_column: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        columns: Option<Vec<String>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        first_n_features: Option<usize>,
    },
}

fn default_label_column() -> String {
    crate::csv_io::DEFAULT_LABEL_COLUMN.into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_ratio: Option<f64>,
    /// Test rows of class 0 and class 1; overrides `train_ratio`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_counts: Option<[usize; 2]>,
}

impl SplitSection {
    pub fn to_core(&self) -> SplitSpec {
        match (self.test_counts, self.train_ratio) {
            (Some(c), _) => SplitSpec::TestCounts(c),
            (None, Some(r)) => SplitSpec::TrainRatio(r),
            (None, None) => SplitSpec::TrainRatio(0.75),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlipSection {
    /// Training labels to swap in class 0 and class 1.
    pub counts: [usize; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AugmentKind {
    #[default]
    None,
    Smote,
    Adasyn,
    Score,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentSection {
    #[serde(default)]
    pub method: AugmentKind,
    #[serde(default = "default_k")]
    pub k: usize,
    /// Defaults to balancing the classes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_new: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<ScoreSection>,
}

impl Default for AugmentSection {
    fn default() -> Self {
        Self {
            method: AugmentKind::None,
            k: default_k(),
            n_new: None,
            score: None,
        }
    }
}

fn default_k() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreSection {
    pub train: TrainSection,
    pub langevin: LangevinSection,
    /// Fit and sample on z-scored minority rows.
    #[serde(default = "yes")]
    pub standardize: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    #[default]
    Sm,
    Ssm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SliceKind {
    #[default]
    Gaussian,
    Rademacher,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default)]
    pub hidden: Vec<usize>,
    #[serde(default = "default_score_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_score_epochs")]
    pub epochs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub objective: ObjectiveKind,
    #[serde(default = "one")]
    pub slices: usize,
    #[serde(default)]
    pub slice_distribution: SliceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patience: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_grad_norm: Option<f64>,
    /// Defaults to a seed derived from the experiment seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_score_lr() -> f64 {
    0.01
}
fn default_score_epochs() -> usize {
    2000
}
fn one() -> usize {
    1
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            hidden: Vec::new(),
            learning_rate: default_score_lr(),
            epochs: default_score_epochs(),
            batch_size: None,
            objective: ObjectiveKind::Sm,
            slices: 1,
            slice_distribution: SliceKind::Gaussian,
            patience: None,
            max_grad_norm: None,
            seed: None,
        }
    }
}

impl TrainSection {
    pub fn to_core(&self, fallback_seed: u64) -> TrainConfig {
        let objective = match self.objective {
            ObjectiveKind::Sm => Objective::ScoreMatching,
            ObjectiveKind::Ssm => Objective::Sliced {
                n_slices: self.slices,
                distribution: match self.slice_distribution {
                    SliceKind::Gaussian => SliceDistribution::Gaussian,
                    SliceKind::Rademacher => SliceDistribution::Rademacher,
                },
            },
        };
        TrainConfig {
            hidden: self.hidden.clone(),
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            objective,
            seed: self.seed.unwrap_or(fallback_seed),
            patience: self.patience,
            max_grad_norm: self.max_grad_norm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LangevinSection {
    pub step_size: f64,
    pub chain_length: usize,
    /// Fraction of each chain to drop; ignored when `discard_first` is set.
    #[serde(default)]
    pub discard_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discard_first: Option<usize>,
    #[serde(default = "one")]
    pub n_chains: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl LangevinSection {
    pub fn to_core(&self, fallback_seed: u64) -> LangevinConfig {
        let mut cfg = LangevinConfig::new(
            self.step_size,
            self.chain_length,
            self.discard_rate,
            self.seed.unwrap_or(fallback_seed),
        )
        .with_chains(self.n_chains);
        if let Some(k) = self.discard_first {
            cfg.discard = Discard::First(k);
        }
        cfg.target_count = self.target_count;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriorsSpec {
    Named(NamedPriors),
    Fixed([f64; 2]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NamedPriors {
    Equal,
    Empirical,
}

impl Default for PriorsSpec {
    fn default() -> Self {
        Self::Named(NamedPriors::Equal)
    }
}

impl PriorsSpec {
    pub fn to_core(&self) -> Priors {
        match self {
            Self::Named(NamedPriors::Equal) => Priors::Fixed([0.5, 0.5]),
            Self::Named(NamedPriors::Empirical) => Priors::Empirical,
            Self::Fixed(p) => Priors::Fixed(*p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialDensitySpec {
    /// Gaussian density at the sample mean.
    Gaussian,
    /// Class frequency in a ball around the sample mean.
    Neighbour { radius: f64 },
}

impl Default for InitialDensitySpec {
    fn default() -> Self {
        Self::Gaussian
    }
}

impl InitialDensitySpec {
    pub fn to_core(self) -> InitialDensity {
        match self {
            Self::Gaussian => InitialDensity::GaussianCentral,
            Self::Neighbour { radius } => InitialDensity::NeighbourCount { radius },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleSpec {
    AbsoluteGap,
    #[default]
    LogRatio,
}

impl RuleSpec {
    pub fn to_core(self) -> DecisionRule {
        match self {
            Self::AbsoluteGap => DecisionRule::AbsoluteGap,
            Self::LogRatio => DecisionRule::LogRatio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ClassifierSpec {
    Knn {
        #[serde(default = "default_k")]
        k: usize,
    },
    Radius {
        radius: f64,
    },
    Mlp {
        #[serde(default = "default_mlp_hidden")]
        hidden: Vec<usize>,
        #[serde(default = "default_mlp_lr")]
        learning_rate: f64,
        #[serde(default = "default_mlp_epochs")]
        epochs: usize,
        #[serde(default = "default_mlp_batch")]
        batch_size: usize,
    },
    Logistic {
        #[serde(default = "default_logistic_lr")]
        learning_rate: f64,
        #[serde(default = "default_logistic_epochs")]
        epochs: usize,
        #[serde(default)]
        l2: f64,
    },
    /// One score network per class, anchored line integrals, Bayes rule.
    Generative {
        train: TrainSection,
        /// Per-class learning rates overriding `train.learning_rate`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        learning_rates: Option<[f64; 2]>,
        #[serde(default)]
        priors: PriorsSpec,
        #[serde(default)]
        initial_density: InitialDensitySpec,
        #[serde(default = "default_steps")]
        steps: usize,
        #[serde(default)]
        margin: f64,
        #[serde(default)]
        rule: RuleSpec,
    },
    /// Larger inverse score norm wins.
    PseudoPdf {
        train: TrainSection,
    },
}

fn default_mlp_hidden() -> Vec<usize> {
    MlpClassifierConfig::default().hidden
}
fn default_mlp_lr() -> f64 {
    MlpClassifierConfig::default().learning_rate
}
fn default_mlp_epochs() -> usize {
    MlpClassifierConfig::default().epochs
}
fn default_mlp_batch() -> usize {
    MlpClassifierConfig::default().batch_size
}
fn default_logistic_lr() -> f64 {
    LogisticConfig::default().learning_rate
}
fn default_logistic_epochs() -> usize {
    LogisticConfig::default().epochs
}
fn default_steps() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySection {
    pub train: TrainSection,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_points: usize,
    /// Integration points per unit path in the grid walk.
    #[serde(default = "default_recon_steps")]
    pub steps: usize,
    #[serde(default)]
    pub initial_density: InitialDensitySpec,
}

fn default_recon_steps() -> usize {
    16
}

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid experiment spec: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid experiment spec: {0}")]
    Invalid(String),
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self, SpecError> {
        let spec: Self = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, SpecError> {
        let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("spec serialises")
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        let bad = |m: &str| Err(SpecError::Invalid(m.into()));
        if let Some(SplitSection {
            train_ratio: Some(r),
            ..
        }) = &self.split
        {
            if !(*r > 0.0 && *r < 1.0) {
                return bad("split.train_ratio must lie in (0, 1)");
            }
        }
        if self.augment.k == 0 {
            return bad("augment.k must be at least 1");
        }
        if self.augment.method == AugmentKind::Score && self.augment.score.is_none() {
            return bad("augment.method = \"score\" needs an [augment.score] section");
        }
        match self.task {
            Task::Classify if self.classifier.is_none() => bad("classify task needs a [classifier] section"),
            Task::Density if self.density.is_none() => bad("density task needs a [density] section"),
            _ => Ok(()),
        }
    }
}
