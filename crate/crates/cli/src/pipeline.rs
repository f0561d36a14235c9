//! Experiment runner: load, split, flip, augment, fit, evaluate, write.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use scoregen_core::augment::{augment, AugmentMethod, AugmentPlan};
use scoregen_core::classify::{
    decide_binary, generative_boundary, logistic_fit, newton_raphson_boundary, pseudo_pdf_contrast,
    vote_classify, GenerativeClassifier, LinearGaussianDensity, LogisticConfig, MlpClassifier,
    MlpClassifierConfig, Vote, VoteMode,
};
use scoregen_core::codec;
use scoregen_core::dataset::{apply_standardization, zscore};
use scoregen_core::density::{construct_density, initial_density, log_density_at, Grid, ReconstructionSettings, ScoreField};
use scoregen_core::eval::{flip_labels, jsd_weighted, metrics, stratified_split, ConfusionMatrix};
use scoregen_core::gaussian::{ClassDistribution, DgpSpec};
use scoregen_core::score_net::{train, ScoreNet};
use scoregen_core::{LabeledDataset, Matrix, RngStream};

use crate::csv_io::{self, CsvOptions};
use crate::spec::{AugmentKind, ClassifierSpec, DataSpec, ExperimentSpec, Task, TrainSection};

/// Pipeline stage, named in errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Load,
    Split,
    Flip,
    Augment,
    Fit,
    Evaluate,
    Write,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Load => "load",
            Stage::Split => "split",
            Stage::Flip => "flip",
            Stage::Augment => "augment",
            Stage::Fit => "fit",
            Stage::Evaluate => "evaluate",
            Stage::Write => "write",
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("stage `{}` failed: {source}", stage.name())]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Box<dyn std::error::Error + Send + Sync>,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, StageError>;
}

impl<T, E: Into<Box<dyn std::error::Error + Send + Sync>>> AtStage<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, StageError> {
        self.map_err(|e| StageError {
            stage,
            source: e.into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    /// Rows per class after loading.
    pub total: [usize; 2],
    pub train: [usize; 2],
    pub test: [usize; 2],
    pub flipped: usize,
    pub synthetic: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tp: u64,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub mistakes: u64,
    pub degenerate: bool,
}

impl MetricsRecord {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Self {
        let m = metrics(cm);
        Self {
            tn: cm.tn,
            fp: cm.fp,
            fn_: cm.fn_,
            tp: cm.tp,
            recall: m.recall,
            precision: m.precision,
            f1: m.f1,
            accuracy: m.accuracy,
            mistakes: m.mistakes,
            degenerate: m.degenerate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRecord {
    pub class: u8,
    pub anchor: Vec<f64>,
    pub anchor_density: f64,
    /// Against the generating density; absent for CSV data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jsd: Option<f64>,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub name: String,
    pub counts: Counts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub density: Vec<DensityRecord>,
    /// Points where the two class densities are equal.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub boundary: Vec<Vec<f64>>,
    /// Hash of the test features as split, checked again before scoring.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_features_sha256: Option<String>,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default)]
    pub artifacts: Vec<Artifact>,
}

/// Seed indices for [`RngStream::derive_seed`].
mod seeds {
    pub const SIMULATE: u64 = 0;
    pub const SPLIT: u64 = 1;
    pub const FLIP: u64 = 2;
    pub const AUGMENT: u64 = 3;
    pub const SCORE_TRAIN: u64 = 4;
    pub const LANGEVIN: u64 = 5;
    pub const CLASSIFIER: u64 = 6;
}

fn derive(spec: &ExperimentSpec, index: u64) -> u64 {
    RngStream::derive_seed(spec.seed, index)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn hash_features(m: &Matrix) -> String {
    let mut h = Sha256::new();
    h.update((m.rows() as u64).to_le_bytes());
    h.update((m.cols() as u64).to_le_bytes());
    for v in m.as_slice() {
        h.update(v.to_le_bytes());
    }
    format!("{:x}", h.finalize())
}

struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    fn path(&mut self, name: &str) -> PathBuf {
        self.written.push(name.into());
        self.dir.join(name)
    }

    fn artifacts(&self) -> Result<Vec<Artifact>, std::io::Error> {
        self.written
            .iter()
            .map(|p| {
                Ok(Artifact {
                    path: p.clone(),
                    sha256: sha256_hex(&std::fs::read(self.dir.join(p))?),
                })
            })
            .collect()
    }
}

/// Resolves a relative CSV path against `base` (the spec's directory).
fn resolve(base: Option<&Path>, p: &Path) -> PathBuf {
    match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p.to_path_buf(),
    }
}

pub struct Loaded {
    pub data: LabeledDataset,
    pub dgp: Option<DgpSpec>,
    pub label_column: String,
}

pub fn load_data(spec: &ExperimentSpec, base: Option<&Path>) -> Result<Loaded, StageError> {
    match &spec.data {
        DataSpec::Simulate { preset, seed } => {
            let dgp = preset.spec(seed.unwrap_or_else(|| derive(spec, seeds::SIMULATE)));
            let sim = dgp.simulate().at(Stage::Load)?;
            Ok(Loaded {
                data: sim.data,
                dgp: Some(dgp),
                label_column: csv_io::DEFAULT_LABEL_COLUMN.into(),
            })
        }
        DataSpec::Csv {
            path,
            label_column,
            columns,
            first_n_features,
        } => {
            let opts = CsvOptions {
                label_column: label_column.clone(),
                columns: columns.clone(),
                first_n: *first_n_features,
            };
            let data = csv_io::load_csv(&resolve(base, path), &opts).at(Stage::Load)?;
            Ok(Loaded {
                data,
                dgp: None,
                label_column: label_column.clone(),
            })
        }
    }
}

/// Runs `spec`, writing outputs and `manifest.toml` into its output
/// directory. Relative CSV paths resolve against `base`.
pub fn run_experiment(spec: &ExperimentSpec, base: Option<&Path>) -> Result<ExperimentResult, StageError> {
    spec.validate().at(Stage::Load)?;
    let mut out = Outputs {
        dir: resolve(base, &spec.output_dir),
        written: Vec::new(),
    };
    std::fs::create_dir_all(&out.dir).at(Stage::Write)?;
    let loaded = load_data(spec, base)?;
    let mut result = match spec.task {
        Task::Classify => run_classify(spec, loaded, &mut out)?,
        Task::Density => run_density(spec, loaded, &mut out)?,
    };
    result.artifacts = out.artifacts().at(Stage::Write)?;
    crate::manifest::write_manifest(&out.dir, spec, &result).at(Stage::Write)?;
    Ok(result)
}

fn class_counts(d: &LabeledDataset) -> [usize; 2] {
    [d.class_count(0), d.class_count(1)]
}

fn run_classify(spec: &ExperimentSpec, loaded: Loaded, out: &mut Outputs) -> Result<ExperimentResult, StageError> {
    let Loaded {
        data, label_column, ..
    } = loaded;
    let total = class_counts(&data);
    let split_spec = spec.split.clone().unwrap_or(crate::spec::SplitSection {
        train_ratio: None,
        test_counts: None,
    });
    let split = stratified_split(&data, split_spec.to_core(), derive(spec, seeds::SPLIT)).at(Stage::Split)?;
    let (mut train_set, mut test_set) = (split.train, split.test);
    if spec.standardize {
        let (z, params) = zscore(&train_set);
        test_set = apply_standardization(&test_set, &params);
        train_set = z;
    }
    let test_hash = hash_features(test_set.features());
    let counts_train = class_counts(&train_set);
    let counts_test = class_counts(&test_set);
    let mut warnings = Vec::new();

    let (train_set, flip_record) =
        flip_labels(&train_set, spec.flip.counts, derive(spec, seeds::FLIP)).at(Stage::Flip)?;

    let (train_set, generated) = augment_stage(spec, &train_set, out, &mut warnings)?;
    let synthetic = generated.as_ref().map_or(0, |m| m.rows());

    let classifier = spec.classifier.as_ref().expect("validated");
    let fitted = fit_classifier(classifier, &train_set, derive(spec, seeds::CLASSIFIER), out, &mut warnings)?;

    if hash_features(test_set.features()) != test_hash {
        return Err(StageError {
            stage: Stage::Evaluate,
            source: "test features changed between split and evaluation".into(),
        });
    }
    let mut predicted = Vec::with_capacity(test_set.len());
    let mut confidence = Vec::with_capacity(test_set.len());
    for i in 0..test_set.len() {
        let (l, p1) = fitted.predict(test_set.row(i)).at(Stage::Evaluate)?;
        predicted.push(l);
        confidence.push(p1);
    }
    if let Fitted::Vote { abstained, .. } = &fitted {
        let n = abstained.get();
        if n > 0 {
            warnings.push(format!("{n} test points had no neighbour in the radius and were labelled 0"));
        }
    }
    let cm = ConfusionMatrix::from_predictions(test_set.labels(), &predicted).at(Stage::Evaluate)?;
    let record = MetricsRecord::from_confusion(&cm);

    csv_io::write_dataset(&out.path("train.csv"), &train_set, &label_column).at(Stage::Write)?;
    csv_io::write_dataset(&out.path("test.csv"), &test_set, &label_column).at(Stage::Write)?;
    write_predictions(&out.path("predictions.csv"), &test_set, &label_column, &predicted, &confidence)
        .at(Stage::Write)?;
    write_metrics(out, &record).at(Stage::Write)?;
    if !flip_record.indices.is_empty() {
        let rows: Vec<Vec<f64>> = flip_record.indices.iter().map(|&i| vec![i as f64]).collect();
        csv_io::write_table(&out.path("flipped.csv"), &["train_row".into()], &rows).at(Stage::Write)?;
    }

    Ok(ExperimentResult {
        name: spec.name.clone(),
        counts: Counts {
            total,
            train: counts_train,
            test: counts_test,
            flipped: flip_record.indices.len(),
            synthetic,
        },
        metrics: Some(record),
        density: Vec::new(),
        boundary: Vec::new(),
        test_features_sha256: Some(test_hash),
        warnings,
        artifacts: Vec::new(),
    })
}

fn augment_stage(
    spec: &ExperimentSpec,
    train_set: &LabeledDataset,
    out: &mut Outputs,
    warnings: &mut Vec<String>,
) -> Result<(LabeledDataset, Option<Matrix>), StageError> {
    let sec = &spec.augment;
    let method = match sec.method {
        AugmentKind::None => return Ok((train_set.clone(), None)),
        AugmentKind::Smote => AugmentMethod::Smote { k: sec.k },
        AugmentKind::Adasyn => AugmentMethod::Adasyn { k: sec.k },
        AugmentKind::Score => {
            let s = sec.score.as_ref().expect("validated");
            AugmentMethod::Score {
                train: s.train.to_core(derive(spec, seeds::SCORE_TRAIN)),
                langevin: s.langevin.to_core(derive(spec, seeds::LANGEVIN)),
                standardize: s.standardize,
            }
        }
    };
    let seed = derive(spec, seeds::AUGMENT);
    let mut plan = AugmentPlan::balancing(train_set, method, seed);
    if let Some(n) = sec.n_new {
        plan.n_new = n;
    }
    let aug = augment(train_set, &plan).at(Stage::Augment)?;
    if let Some(run) = &aug.score_run {
        if !run.diverged.is_empty() {
            warnings.push(format!("{} Langevin chains diverged and were dropped", run.diverged.len()));
        }
        std::fs::write(out.path("minority_score.sgnn"), codec::encode(&run.net)).at(Stage::Write)?;
    }
    let header = csv_io::feature_names(train_set);
    csv_io::write_matrix(&out.path("generated.csv"), &header, &aug.generated).at(Stage::Write)?;
    Ok((aug.data, Some(aug.generated)))
}

/// A fitted classifier ready for prediction.
pub enum Fitted {
    Vote {
        train: LabeledDataset,
        mode: VoteMode,
        abstained: std::cell::Cell<usize>,
    },
    Mlp(MlpClassifier),
    Logistic(scoregen_core::LogisticModel),
    Generative {
        clf: GenerativeClassifier<ScoreNet>,
        margin: f64,
        rule: scoregen_core::DecisionRule,
    },
    PseudoPdf([ScoreNet; 2]),
}

impl Fitted {
    /// Label and a confidence in label 1.
    pub fn predict(&self, x: &[f64]) -> scoregen_core::Result<(u8, f64)> {
        match self {
            Fitted::Vote {
                train,
                mode,
                abstained,
            } => {
                let v = vote_classify(train, x, *mode)?;
                if v == Vote::Abstain {
                    abstained.set(abstained.get() + 1);
                }
                Ok((v.label().unwrap_or(0), v.positive_fraction()))
            }
            Fitted::Mlp(m) => Ok((m.predict(x), m.predict_proba(x))),
            Fitted::Logistic(m) => Ok((m.predict(x), m.predict_proba(x))),
            Fitted::Generative { clf, margin, rule } => {
                let d = clf.classify(x)?;
                let label = decide_binary(d.posteriors[1], d.posteriors[0], *margin, *rule);
                Ok((label, d.posteriors[1]))
            }
            Fitted::PseudoPdf(nets) => {
                let (label, conf) = pseudo_pdf_contrast(&nets[0], &nets[1], x);
                Ok((label, if label == 1 { conf } else { 1.0 - conf }))
            }
        }
    }
}

fn train_per_class(
    train_set: &LabeledDataset,
    section: &TrainSection,
    rates: Option<[f64; 2]>,
    seed: u64,
    out: &mut Outputs,
) -> Result<[ScoreNet; 2], StageError> {
    let mut nets = Vec::with_capacity(2);
    for c in 0..2u8 {
        let mut cfg = section.to_core(RngStream::derive_seed(seed, c as u64));
        if let Some(r) = rates {
            cfg.learning_rate = r[c as usize];
        }
        let trained = train(&train_set.class_features(c), &cfg).at(Stage::Fit)?;
        std::fs::write(out.path(&format!("score_class{c}.sgnn")), codec::encode(&trained.net)).at(Stage::Write)?;
        nets.push(trained.net);
    }
    let b = nets.pop().unwrap();
    let a = nets.pop().unwrap();
    Ok([a, b])
}

fn fit_classifier(
    spec: &ClassifierSpec,
    train_set: &LabeledDataset,
    seed: u64,
    out: &mut Outputs,
    warnings: &mut Vec<String>,
) -> Result<Fitted, StageError> {
    Ok(match spec {
        ClassifierSpec::Knn { k } => Fitted::Vote {
            train: train_set.clone(),
            mode: VoteMode::FixedK(*k),
            abstained: Default::default(),
        },
        ClassifierSpec::Radius { radius } => Fitted::Vote {
            train: train_set.clone(),
            mode: VoteMode::FixedRadius(*radius),
            abstained: Default::default(),
        },
        ClassifierSpec::Mlp {
            hidden,
            learning_rate,
            epochs,
            batch_size,
        } => {
            let cfg = MlpClassifierConfig {
                hidden: hidden.clone(),
                learning_rate: *learning_rate,
                epochs: *epochs,
                batch_size: *batch_size,
                seed,
            };
            let m = MlpClassifier::fit(train_set, &cfg).at(Stage::Fit)?;
            std::fs::write(out.path("classifier.sgnn"), codec::encode_mlp(&m.net)).at(Stage::Write)?;
            Fitted::Mlp(m)
        }
        ClassifierSpec::Logistic {
            learning_rate,
            epochs,
            l2,
        } => {
            let cfg = LogisticConfig {
                learning_rate: *learning_rate,
                epochs: *epochs,
                l2: *l2,
            };
            let fit = logistic_fit(train_set, &cfg).at(Stage::Fit)?;
            if fit.capped {
                warnings.push(format!(
                    "training data look separable; logistic coefficients capped at norm {}",
                    scoregen_core::classify::LOGISTIC_NORM_CAP
                ));
            }
            let rows = vec![fit.model.theta.clone()];
            let header: Vec<String> = (0..fit.model.theta.len()).map(|i| format!("theta{i}")).collect();
            csv_io::write_table(&out.path("logistic.csv"), &header, &rows).at(Stage::Write)?;
            Fitted::Logistic(fit.model)
        }
        ClassifierSpec::Generative {
            train: section,
            learning_rates,
            priors,
            initial_density: init,
            steps,
            margin,
            rule,
        } => {
            let nets = train_per_class(train_set, section, *learning_rates, seed, out)?;
            let mut anchors = Vec::with_capacity(2);
            for c in 0..2u8 {
                anchors.push(initial_density(&train_set.class_features(c), init.to_core()).at(Stage::Fit)?);
            }
            let a1 = anchors.pop().unwrap();
            let a0 = anchors.pop().unwrap();
            let priors = priors.to_core().resolve(train_set).at(Stage::Fit)?;
            let clf = GenerativeClassifier::new(nets, [a0, a1], priors)
                .at(Stage::Fit)?
                .with_steps(*steps);
            Fitted::Generative {
                clf,
                margin: *margin,
                rule: rule.to_core(),
            }
        }
        ClassifierSpec::PseudoPdf { train: section } => {
            Fitted::PseudoPdf(train_per_class(train_set, section, None, seed, out)?)
        }
    })
}

/// Fits `spec` on `train_set`, writing any model files into `dir`. Returns
/// the classifier, the files written and any warnings.
pub fn fit_standalone(
    spec: &ClassifierSpec,
    train_set: &LabeledDataset,
    seed: u64,
    dir: &Path,
) -> Result<(Fitted, Vec<String>, Vec<String>), StageError> {
    std::fs::create_dir_all(dir).at(Stage::Write)?;
    let mut out = Outputs {
        dir: dir.to_path_buf(),
        written: Vec::new(),
    };
    let mut warnings = Vec::new();
    let f = fit_classifier(spec, train_set, seed, &mut out, &mut warnings)?;
    Ok((f, out.written, warnings))
}

pub fn write_predictions(
    path: &Path,
    test: &LabeledDataset,
    label_column: &str,
    predicted: &[u8],
    p1: &[f64],
) -> Result<(), csv_io::CsvError> {
    let mut header = csv_io::feature_names(test);
    header.extend([label_column.to_string(), "predicted".into(), "confidence".into()]);
    let rows: Vec<Vec<f64>> = (0..test.len())
        .map(|i| {
            let mut r = test.row(i).to_vec();
            r.extend([test.labels()[i] as f64, predicted[i] as f64, p1[i]]);
            r
        })
        .collect();
    csv_io::write_table(path, &header, &rows)
}

fn write_metrics(out: &mut Outputs, m: &MetricsRecord) -> Result<(), csv_io::CsvError> {
    let mut w = csv::Writer::from_path(out.path("metrics.csv"))?;
    w.write_record(["metric", "value"])?;
    for (k, v) in [
        ("recall", m.recall),
        ("precision", m.precision),
        ("f1", m.f1),
        ("accuracy", m.accuracy),
    ] {
        w.write_record([k, &csv_io::fmt_f64(v)])?;
    }
    w.write_record(["mistakes", &m.mistakes.to_string()])?;
    w.write_record(["degenerate", &m.degenerate.to_string()])?;
    w.flush().map_err(|e| csv_io::CsvError::Csv(e.into()))?;
    let mut w = csv::Writer::from_path(out.path("confusion.csv"))?;
    w.write_record(["actual", "predicted_0", "predicted_1"])?;
    w.write_record(["0", &m.tn.to_string(), &m.fp.to_string()])?;
    w.write_record(["1", &m.fn_.to_string(), &m.tp.to_string()])?;
    w.flush().map_err(|e| csv_io::CsvError::Csv(e.into()))?;
    Ok(())
}

/// Per-class log-density evaluator for the boundary search: the Gaussian
/// closed form for linear nets, anchored integration otherwise.
enum ClassDensity {
    Linear(LinearGaussianDensity),
    Anchored { net: ScoreNet, anchor: (Vec<f64>, f64) },
}

impl ClassDensity {
    fn log_pdf(&self, x: &[f64]) -> f64 {
        match self {
            Self::Linear(d) => d.log_pdf(x),
            Self::Anchored { net, anchor } => {
                log_density_at(net, (&anchor.0, anchor.1), x, 200).unwrap_or(f64::NAN)
            }
        }
    }

    fn score(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Self::Linear(d) => d.score(x),
            Self::Anchored { net, .. } => ScoreField::score(net, x),
        }
    }
}

fn run_density(spec: &ExperimentSpec, loaded: Loaded, out: &mut Outputs) -> Result<ExperimentResult, StageError> {
    let sec = spec.density.as_ref().expect("validated");
    let data = loaded.data;
    if data.dim() != 1 {
        return Err(StageError {
            stage: Stage::Load,
            source: format!("density task needs one feature, found {}", data.dim()).into(),
        });
    }
    let grid = Grid::uniform(&[sec.grid_lo], &[sec.grid_hi], &[sec.grid_points]).at(Stage::Fit)?;
    let weights = grid.cell_weights();
    let seed = derive(spec, seeds::SCORE_TRAIN);
    let mut records = Vec::new();
    let mut class_densities = Vec::new();
    let mut rows: Vec<Vec<f64>> = (0..grid.len()).map(|f| grid.point(f)).collect();
    let mut header = vec!["x".to_string()];
    for c in 0..2u8 {
        let samples = data.class_features(c);
        let cfg = sec.train.to_core(RngStream::derive_seed(seed, c as u64));
        let net = train(&samples, &cfg).at(Stage::Fit)?.net;
        std::fs::write(out.path(&format!("score_class{c}.sgnn")), codec::encode(&net)).at(Stage::Write)?;
        let anchor = initial_density(&samples, sec.initial_density.to_core()).at(Stage::Fit)?;
        let field = construct_density(
            &net,
            (&anchor.0, anchor.1),
            &grid,
            ReconstructionSettings { steps: sec.steps },
        )
        .at(Stage::Fit)?;
        let truth: Option<Vec<f64>> = loaded.dgp.as_ref().map(|dgp| {
            let dist: &ClassDistribution = &dgp.classes[c as usize];
            (0..grid.len()).map(|f| dist.pdf(&grid.point(f))).collect()
        });
        let jsd = match &truth {
            Some(t) => Some(jsd_weighted(&field.density, t, &weights).at(Stage::Evaluate)?),
            None => None,
        };
        header.push(format!("density_class{c}"));
        for (r, p) in rows.iter_mut().zip(&field.density) {
            r.push(*p);
        }
        if let Some(t) = &truth {
            header.push(format!("true_class{c}"));
            for (r, p) in rows.iter_mut().zip(t) {
                r.push(*p);
            }
        }
        records.push(DensityRecord {
            class: c,
            anchor: anchor.0.clone(),
            anchor_density: anchor.1,
            jsd,
            mass: field.mass(),
        });
        class_densities.push(match LinearGaussianDensity::from_net(&net, &samples) {
            Ok(d) => ClassDensity::Linear(d),
            Err(_) => ClassDensity::Anchored { net, anchor },
        });
    }
    csv_io::write_table(&out.path("density.csv"), &header, &rows).at(Stage::Write)?;

    let mut boundary = Vec::new();
    let mut warnings = Vec::new();
    let mid = [(records[0].anchor[0] + records[1].anchor[0]) / 2.0];
    let found = match (&class_densities[0], &class_densities[1]) {
        (ClassDensity::Linear(a), ClassDensity::Linear(b)) => newton_raphson_boundary(
            |x| generative_boundary(a, b, x).0,
            |x| generative_boundary(a, b, x).1,
            &mid,
            1e-10,
            100,
        ),
        (a, b) => newton_raphson_boundary(
            |x| b.log_pdf(x) - a.log_pdf(x),
            |x| {
                let (s0, s1) = (a.score(x), b.score(x));
                s1.iter().zip(&s0).map(|(p, q)| p - q).collect()
            },
            &mid,
            1e-8,
            100,
        ),
    };
    match found {
        Ok(p) => boundary.push(p.x),
        Err(e) => warnings.push(format!("boundary search failed: {e}")),
    }
    Ok(ExperimentResult {
        name: spec.name.clone(),
        counts: Counts {
            total: class_counts(&data),
            train: class_counts(&data),
            test: [0, 0],
            flipped: 0,
            synthetic: 0,
        },
        metrics: None,
        density: records,
        boundary,
        test_features_sha256: None,
        warnings,
        artifacts: Vec::new(),
    })
}
