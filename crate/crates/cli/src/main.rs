use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use scoregen_cli::csv_io::{self, CsvOptions};
use scoregen_cli::manifest::{read_manifest, rerun};
use scoregen_cli::pipeline::{self, run_experiment, ExperimentResult, MetricsRecord};
use scoregen_cli::presets;
use scoregen_cli::spec::{
    ClassifierSpec, DataSpec, DgpPreset, ExperimentSpec, InitialDensitySpec, ObjectiveKind, RuleSpec, SliceKind,
    TrainSection,
};
use scoregen_core::augment::{adasyn, score_oversample, smote};
use scoregen_core::classify::{generative_boundary, newton_raphson_boundary, LinearGaussianDensity};
use scoregen_core::codec;
use scoregen_core::density::{construct_density, initial_density, log_density_at, Grid, ReconstructionSettings};
use scoregen_core::eval::{jsd, ConfusionMatrix};
use scoregen_core::langevin::{generate, LangevinConfig};
use scoregen_core::score_net::train;
use scoregen_core::{LabeledDataset, Matrix, RngStream, ScoreField, ScoreNet};

#[derive(Parser)]
#[command(name = "scoregen", version, about = "Score-based density estimation, sampling and classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a labelled dataset from a built-in generating process.
    Simulate {
        #[arg(long, value_enum)]
        preset: DgpArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a score network to the rows of a CSV file.
    TrainScore {
        #[command(flatten)]
        data: DataArgs,
        /// Keep only rows with this label.
        #[arg(long)]
        class: Option<u8>,
        #[command(flatten)]
        train: TrainArgs,
        /// Also write the per-epoch loss to this CSV file.
        #[arg(long)]
        loss_out: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw Langevin samples from a score network, starting at data rows.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        class: Option<u8>,
        #[arg(long)]
        step_size: f64,
        #[arg(long)]
        chain_length: usize,
        #[arg(long, default_value_t = 0.0)]
        discard_rate: f64,
        /// Number of samples to keep.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct a density on a grid from a score network.
    Density {
        #[arg(long)]
        model: PathBuf,
        /// Samples used to place the anchor.
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        class: Option<u8>,
        /// Grid bounds and node counts, one value per dimension.
        #[arg(long, num_args = 1.., required = true, allow_negative_numbers = true)]
        lo: Vec<f64>,
        #[arg(long, num_args = 1.., required = true, allow_negative_numbers = true)]
        hi: Vec<f64>,
        #[arg(long, num_args = 1.., required = true)]
        points: Vec<usize>,
        #[arg(long, default_value_t = 16)]
        steps: usize,
        /// Anchor by neighbour count in this radius instead of a Gaussian fit.
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Find a point where two class densities are equal.
    Boundary {
        #[arg(long)]
        model0: PathBuf,
        #[arg(long)]
        model1: PathBuf,
        /// Labelled samples for the anchors (or, for linear nets, the means).
        #[command(flatten)]
        data: DataArgs,
        /// Starting point; defaults to the midpoint of the class means.
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        init: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
    },
    /// Fit a classifier on one CSV file and label the rows of another.
    Classify {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, default_value = csv_io::DEFAULT_LABEL_COLUMN)]
        label_column: String,
        #[arg(long, value_enum)]
        method: ClassifierArg,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        margin: f64,
        #[arg(long, value_enum, default_value_t = RuleArg::LogRatio)]
        rule: RuleArg,
        #[command(flatten)]
        score: TrainArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Oversample the minority class of a CSV dataset.
    Augment {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum)]
        method: AugmentArg,
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Defaults to balancing the classes.
        #[arg(long)]
        n_new: Option<usize>,
        #[command(flatten)]
        score: TrainArgs,
        #[arg(long, default_value_t = 0.01)]
        step_size: f64,
        #[arg(long, default_value_t = 20)]
        chain_length: usize,
        #[arg(long, default_value_t = 0.9)]
        discard_rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Metrics from a predictions file, or the JSD between two table columns.
    Eval {
        #[arg(long, conflicts_with = "table")]
        predictions: Option<PathBuf>,
        #[arg(long, default_value = csv_io::DEFAULT_LABEL_COLUMN)]
        label_column: String,
        #[arg(long, requires_all = ["p", "q"])]
        table: Option<PathBuf>,
        #[arg(long)]
        p: Option<String>,
        #[arg(long)]
        q: Option<String>,
    },
    /// Run an experiment from a spec file, a preset or a manifest.
    Run {
        #[arg(long, group = "source")]
        spec: Option<PathBuf>,
        #[arg(long, group = "source")]
        preset: Option<String>,
        /// Repeat a recorded run and check that it reproduces.
        #[arg(long, group = "source")]
        manifest: Option<PathBuf>,
        /// Output directory, overriding the spec's.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print a preset's spec as TOML instead of running it.
        #[arg(long, requires = "preset")]
        print: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DgpArg {
    Pair1d,
    Pair2d,
    Imbalanced10d,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassifierArg {
    Knn,
    Radius,
    Mlp,
    Logistic,
    Generative,
    PseudoPdf,
}

#[derive(Clone, Copy, ValueEnum)]
enum AugmentArg {
    Smote,
    Adasyn,
    Score,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    AbsoluteGap,
    LogRatio,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = csv_io::DEFAULT_LABEL_COLUMN)]
    label_column: String,
    /// Feature columns to read; defaults to all others.
    #[arg(long, value_delimiter = ',')]
    columns: Option<Vec<String>>,
    #[arg(long)]
    first_n_features: Option<usize>,
}

impl DataArgs {
    fn load(&self) -> Result<LabeledDataset> {
        let opts = CsvOptions {
            label_column: self.label_column.clone(),
            columns: self.columns.clone(),
            first_n: self.first_n_features,
        };
        csv_io::load_csv(&self.data, &opts).with_context(|| format!("loading {}", self.data.display()))
    }

    fn rows(&self, class: Option<u8>) -> Result<Matrix> {
        let d = self.load()?;
        Ok(match class {
            Some(c) => d.class_features(c),
            None => d.features().clone(),
        })
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Hidden layer widths, comma separated; empty for a linear net.
    #[arg(long, value_delimiter = ',')]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 0.01)]
    learning_rate: f64,
    #[arg(long, default_value_t = 2000)]
    epochs: usize,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    ssm: bool,
    #[arg(long, default_value_t = 1)]
    slices: usize,
    #[arg(long)]
    rademacher: bool,
    #[arg(long)]
    train_seed: Option<u64>,
}

impl TrainArgs {
    fn section(&self) -> TrainSection {
        TrainSection {
            hidden: self.hidden.clone(),
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            objective: if self.ssm { ObjectiveKind::Ssm } else { ObjectiveKind::Sm },
            slices: self.slices,
            slice_distribution: if self.rademacher {
                SliceKind::Rademacher
            } else {
                SliceKind::Gaussian
            },
            patience: None,
            max_grad_norm: None,
            seed: self.train_seed,
        }
    }
}

fn read_model(path: &Path) -> Result<ScoreNet> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    codec::decode(&bytes).with_context(|| format!("decoding {}", path.display()))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn anchor_method(radius: Option<f64>) -> InitialDensitySpec {
    match radius {
        Some(radius) => InitialDensitySpec::Neighbour { radius },
        None => InitialDensitySpec::Gaussian,
    }
}

fn print_result(r: &ExperimentResult) {
    println!("experiment {}", r.name);
    println!("  counts: total {:?}, train {:?}, test {:?}", r.counts.total, r.counts.train, r.counts.test);
    if r.counts.flipped + r.counts.synthetic > 0 {
        println!("  flipped {}, synthetic {}", r.counts.flipped, r.counts.synthetic);
    }
    if let Some(m) = &r.metrics {
        print_metrics(m);
    }
    for d in &r.density {
        match d.jsd {
            Some(j) => println!("  class {}: mass {:.4}, JSD {:.4}", d.class, d.mass, j),
            None => println!("  class {}: mass {:.4}", d.class, d.mass),
        }
    }
    for b in &r.boundary {
        println!("  boundary at {b:?}");
    }
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
}

fn print_metrics(m: &MetricsRecord) {
    println!("  tn {} fp {} fn {} tp {}", m.tn, m.fp, m.fn_, m.tp);
    println!(
        "  recall {:.4} precision {:.4} f1 {:.4} accuracy {:.4} mistakes {}{}",
        m.recall,
        m.precision,
        m.f1,
        m.accuracy,
        m.mistakes,
        if m.degenerate { " (degenerate)" } else { "" }
    );
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate { preset, seed, out } => {
            let p = match preset {
                DgpArg::Pair1d => DgpPreset::Pair1d,
                DgpArg::Pair2d => DgpPreset::Pair2d,
                DgpArg::Imbalanced10d => DgpPreset::Imbalanced10d,
            };
            let sim = p.spec(seed).simulate()?;
            csv_io::write_dataset(&out, &sim.data, csv_io::DEFAULT_LABEL_COLUMN)?;
            println!(
                "wrote {} rows ({} / {}) to {}",
                sim.data.len(),
                sim.data.class_count(0),
                sim.data.class_count(1),
                out.display()
            );
        }
        Command::TrainScore {
            data,
            class,
            train: t,
            loss_out,
            out,
        } => {
            let rows = data.rows(class)?;
            let cfg = t.section().to_core(0);
            let trained = train(&rows, &cfg)?;
            write_bytes(&out, &codec::encode(&trained.net))?;
            if let Some(p) = loss_out {
                let hist: Vec<Vec<f64>> = trained
                    .loss_history
                    .iter()
                    .enumerate()
                    .map(|(i, l)| vec![i as f64, *l])
                    .collect();
                csv_io::write_table(&p, &["epoch".into(), "loss".into()], &hist)?;
            }
            let last = trained.loss_history.last().copied().unwrap_or(f64::NAN);
            println!("trained on {} rows, final loss {last:.6}", rows.rows());
            if let Some((a, b)) = trained.net.as_linear() {
                println!("  linear score: A = {:?}, b = {:?}", a.as_slice(), b);
            }
        }
        Command::Sample {
            model,
            data,
            class,
            step_size,
            chain_length,
            discard_rate,
            n,
            seed,
            out,
        } => {
            let net = read_model(&model)?;
            let seeds = data.rows(class)?;
            let cfg = LangevinConfig::new(step_size, chain_length, discard_rate, seed).with_target(n);
            let gen = generate(&net, &seeds, &cfg)?;
            let header: Vec<String> = (0..net.dim()).map(|i| format!("x{i}")).collect();
            csv_io::write_matrix(&out, &header, &gen.samples)?;
            println!("{} samples from {} chains", gen.samples.rows(), gen.chains_run);
            if !gen.diverged.is_empty() {
                eprintln!("warning: {} chains diverged", gen.diverged.len());
            }
        }
        Command::Density {
            model,
            data,
            class,
            lo,
            hi,
            points,
            steps,
            radius,
            out,
        } => {
            let net = read_model(&model)?;
            let rows = data.rows(class)?;
            let anchor = initial_density(&rows, anchor_method(radius).to_core())?;
            let grid = Grid::uniform(&lo, &hi, &points)?;
            let field = construct_density(&net, (&anchor.0, anchor.1), &grid, ReconstructionSettings { steps })?;
            let mut header: Vec<String> = (0..grid.dim()).map(|i| format!("x{i}")).collect();
            header.push("density".into());
            let table: Vec<Vec<f64>> = field
                .points()
                .map(|(mut x, p)| {
                    x.push(p);
                    x
                })
                .collect();
            csv_io::write_table(&out, &header, &table)?;
            println!("anchor {:?} density {:.6}; grid mass {:.6}", anchor.0, anchor.1, field.mass());
        }
        Command::Boundary {
            model0,
            model1,
            data,
            init,
            tol,
            max_iter,
        } => {
            let d = data.load()?;
            let nets = [read_model(&model0)?, read_model(&model1)?];
            let rows = [d.class_features(0), d.class_features(1)];
            let linear = [
                LinearGaussianDensity::from_net(&nets[0], &rows[0]),
                LinearGaussianDensity::from_net(&nets[1], &rows[1]),
            ];
            let anchors = [
                initial_density(&rows[0], InitialDensitySpec::Gaussian.to_core())?,
                initial_density(&rows[1], InitialDensitySpec::Gaussian.to_core())?,
            ];
            let x0 = init.unwrap_or_else(|| {
                anchors[0].0.iter().zip(&anchors[1].0).map(|(a, b)| (a + b) / 2.0).collect()
            });
            let point = match linear {
                [Ok(a), Ok(b)] => newton_raphson_boundary(
                    |x| generative_boundary(&a, &b, x).0,
                    |x| generative_boundary(&a, &b, x).1,
                    &x0,
                    tol,
                    max_iter,
                )?,
                _ => {
                    let logp = |c: usize, x: &[f64]| {
                        log_density_at(&nets[c], (&anchors[c].0, anchors[c].1), x, 200).unwrap_or(f64::NAN)
                    };
                    newton_raphson_boundary(
                        |x| logp(1, x) - logp(0, x),
                        |x| {
                            let (s0, s1) = (nets[0].score(x), nets[1].score(x));
                            s1.iter().zip(&s0).map(|(p, q)| p - q).collect()
                        },
                        &x0,
                        tol,
                        max_iter,
                    )?
                }
            };
            println!(
                "boundary at {:?} (residual {:.3e}, {} iterations)",
                point.x, point.residual, point.iterations
            );
        }
        Command::Classify {
            train: train_path,
            test,
            label_column,
            method,
            k,
            radius,
            margin,
            rule,
            score,
            seed,
            out,
        } => {
            let opts = CsvOptions {
                label_column: label_column.clone(),
                ..Default::default()
            };
            let train_set = csv_io::load_csv(&train_path, &opts)?;
            let test_set = csv_io::load_csv(&test, &opts)?;
            let spec = match method {
                ClassifierArg::Knn => ClassifierSpec::Knn { k },
                ClassifierArg::Radius => ClassifierSpec::Radius {
                    radius: radius.context("--radius is required for the radius classifier")?,
                },
                ClassifierArg::Mlp => {
                    let d = scoregen_core::classify::MlpClassifierConfig::default();
                    ClassifierSpec::Mlp {
                        hidden: d.hidden,
                        learning_rate: d.learning_rate,
                        epochs: d.epochs,
                        batch_size: d.batch_size,
                    }
                }
                ClassifierArg::Logistic => {
                    let d = scoregen_core::classify::LogisticConfig::default();
                    ClassifierSpec::Logistic {
                        learning_rate: d.learning_rate,
                        epochs: d.epochs,
                        l2: d.l2,
                    }
                }
                ClassifierArg::Generative => ClassifierSpec::Generative {
                    train: score.section(),
                    learning_rates: None,
                    priors: Default::default(),
                    initial_density: anchor_method(radius),
                    steps: 200,
                    margin,
                    rule: match rule {
                        RuleArg::AbsoluteGap => RuleSpec::AbsoluteGap,
                        RuleArg::LogRatio => RuleSpec::LogRatio,
                    },
                },
                ClassifierArg::PseudoPdf => ClassifierSpec::PseudoPdf { train: score.section() },
            };
            let (fitted, _, warnings) = pipeline::fit_standalone(&spec, &train_set, seed, &out)?;
            let mut predicted = Vec::with_capacity(test_set.len());
            let mut conf = Vec::with_capacity(test_set.len());
            for i in 0..test_set.len() {
                let (l, p) = fitted.predict(test_set.row(i))?;
                predicted.push(l);
                conf.push(p);
            }
            pipeline::write_predictions(&out.join("predictions.csv"), &test_set, &label_column, &predicted, &conf)?;
            let cm = ConfusionMatrix::from_predictions(test_set.labels(), &predicted)?;
            print_metrics(&MetricsRecord::from_confusion(&cm));
            for w in warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::Augment {
            data,
            method,
            k,
            n_new,
            score,
            step_size,
            chain_length,
            discard_rate,
            seed,
            out,
        } => {
            let d = data.load()?;
            let minority = d.minority_label();
            let (min_rows, maj_rows) = (d.class_features(minority), d.class_features(1 - minority));
            let n = n_new.unwrap_or(maj_rows.rows().saturating_sub(min_rows.rows()));
            let mut rng = RngStream::new(seed);
            let generated = match method {
                AugmentArg::Smote => smote(&min_rows, k, n, &mut rng)?,
                AugmentArg::Adasyn => adasyn(&min_rows, &maj_rows, k, n, &mut rng)?,
                AugmentArg::Score => {
                    let train_cfg = score.section().to_core(RngStream::derive_seed(seed, 0));
                    let lcfg = LangevinConfig::new(step_size, chain_length, discard_rate, RngStream::derive_seed(seed, 1));
                    score_oversample(&min_rows, &train_cfg, &lcfg, n, true)?.samples
                }
            };
            let augmented = d.append_synthetic(&generated, minority)?;
            csv_io::write_dataset(&out, &augmented, &data.label_column)?;
            println!("added {} rows of class {minority}; wrote {}", generated.rows(), out.display());
        }
        Command::Eval {
            predictions,
            label_column,
            table,
            p,
            q,
        } => {
            if let Some(path) = predictions {
                let (header, m) = csv_io::read_table(&path)?;
                let col = |name: &str| {
                    header
                        .iter()
                        .position(|h| h == name)
                        .with_context(|| format!("column `{name}` not in {}", path.display()))
                };
                let (a, b) = (col(&label_column)?, col("predicted")?);
                let actual: Vec<u8> = m.iter_rows().map(|r| r[a] as u8).collect();
                let predicted: Vec<u8> = m.iter_rows().map(|r| r[b] as u8).collect();
                let cm = ConfusionMatrix::from_predictions(&actual, &predicted)?;
                print_metrics(&MetricsRecord::from_confusion(&cm));
            } else if let Some(path) = table {
                let (header, m) = csv_io::read_table(&path)?;
                let column = |name: &str| -> Result<Vec<f64>> {
                    let i = header
                        .iter()
                        .position(|h| h == name)
                        .with_context(|| format!("column `{name}` not in {}", path.display()))?;
                    Ok(m.iter_rows().map(|r| r[i]).collect())
                };
                let (p, q) = (p.unwrap(), q.unwrap());
                println!("JSD({p}, {q}) = {:.6}", jsd(&column(&p)?, &column(&q)?)?);
            } else {
                bail!("give --predictions or --table with --p and --q");
            }
        }
        Command::Run {
            spec,
            preset,
            manifest,
            out,
            print,
        } => {
            if let Some(path) = manifest {
                let m = read_manifest(&path)?;
                let out = out.context("--out is required with --manifest")?;
                let (result, diffs) = rerun(&m, &std::env::current_dir()?.join(out), None)?;
                print_result(&result);
                if diffs.is_empty() {
                    println!("reproduced: all recorded values match");
                } else {
                    bail!("rerun differs from the manifest in: {}", diffs.join(", "));
                }
                return Ok(());
            }
            let (mut s, base) = match (spec, preset) {
                (Some(p), _) => {
                    let s = ExperimentSpec::load(&p)?;
                    (s, p.parent().map(Path::to_path_buf))
                }
                (None, Some(name)) => {
                    let s = presets::preset(&name).with_context(|| {
                        format!("unknown preset `{name}`; known: {}", presets::NAMES.join(", "))
                    })?;
                    (s, None)
                }
                (None, None) => bail!("give one of --spec, --preset or --manifest"),
            };
            if print {
                print!("{}", s.to_toml());
                return Ok(());
            }
            // absolute paths keep the manifest rerunnable from anywhere
            let cwd = std::env::current_dir()?;
            let spec_dir = base.map(|b| cwd.join(b)).unwrap_or_else(|| cwd.clone());
            s.output_dir = match out {
                Some(o) => cwd.join(o),
                None => spec_dir.join(&s.output_dir),
            };
            if let DataSpec::Csv { path, .. } = &mut s.data {
                *path = spec_dir.join(&*path);
            }
            let result = run_experiment(&s, None)?;
            print_result(&result);
        }
    }
    Ok(())
}
