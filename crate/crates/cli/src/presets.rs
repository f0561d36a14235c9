//! Named experiment specs, runnable with `scoregen run --preset NAME`.

use std::path::PathBuf;

use crate::spec::*;

pub const NAMES: &[&str] = &[
    "1d-gaussian-recon",
    "synthetic-imbalanced-baseline",
    "synthetic-imbalanced-smote",
    "synthetic-imbalanced-adasyn",
    "synthetic-imbalanced-score-case1",
    "synthetic-imbalanced-score-case2",
    "synthetic-imbalanced-score-case3",
    "2d-generative",
];

/// Test rows per class for the 10-dimensional imbalanced data.
pub const IMBALANCED_TEST_COUNTS: [usize; 2] = [699, 42];

pub fn preset(name: &str) -> Option<ExperimentSpec> {
    let spec = match name {
        "1d-gaussian-recon" => ExperimentSpec {
            task: Task::Density,
            data: DataSpec::Simulate {
                preset: DgpPreset::Pair1d,
                seed: None,
            },
            density: Some(DensitySection {
                train: TrainSection {
                    learning_rate: 0.05,
                    epochs: 500,
                    ..Default::default()
                },
                grid_lo: -6.0,
                grid_hi: 6.0,
                grid_points: 241,
                steps: 16,
                initial_density: InitialDensitySpec::Gaussian,
            }),
            ..base(name, Task::Density)
        },
        "synthetic-imbalanced-baseline" => imbalanced(name, AugmentSection::default()),
        "synthetic-imbalanced-smote" => imbalanced(
            name,
            AugmentSection {
                method: AugmentKind::Smote,
                ..Default::default()
            },
        ),
        "synthetic-imbalanced-adasyn" => imbalanced(
            name,
            AugmentSection {
                method: AugmentKind::Adasyn,
                ..Default::default()
            },
        ),
        "synthetic-imbalanced-score-case1" => imbalanced(name, score_augment(10, 0.2)),
        "synthetic-imbalanced-score-case2" => imbalanced(name, score_augment(20, 0.9)),
        "synthetic-imbalanced-score-case3" => imbalanced(name, score_augment(40, 0.9)),
        "2d-generative" => ExperimentSpec {
            data: DataSpec::Simulate {
                preset: DgpPreset::Pair2d,
                seed: None,
            },
            classifier: Some(ClassifierSpec::Generative {
                train: TrainSection {
                    learning_rate: 0.05,
                    epochs: 500,
                    ..Default::default()
                },
                learning_rates: None,
                priors: PriorsSpec::default(),
                initial_density: InitialDensitySpec::Gaussian,
                steps: 200,
                margin: 0.0,
                rule: RuleSpec::LogRatio,
            }),
            ..base(name, Task::Classify)
        },
        _ => return None,
    };
    Some(spec)
}

fn base(name: &str, task: Task) -> ExperimentSpec {
    ExperimentSpec {
        name: name.into(),
        seed: 42,
        output_dir: PathBuf::from("runs").join(name),
        task,
        standardize: false,
        data: DataSpec::Simulate {
            preset: DgpPreset::Pair1d,
            seed: None,
        },
        split: None,
        flip: FlipSection::default(),
        augment: AugmentSection::default(),
        classifier: None,
        density: None,
    }
}

fn imbalanced(name: &str, augment: AugmentSection) -> ExperimentSpec {
    ExperimentSpec {
        standardize: true,
        data: DataSpec::Simulate {
            preset: DgpPreset::Imbalanced10d,
            seed: None,
        },
        split: Some(SplitSection {
            train_ratio: None,
            test_counts: Some(IMBALANCED_TEST_COUNTS),
        }),
        augment,
        classifier: Some(ClassifierSpec::Knn { k: 5 }),
        ..base(name, Task::Classify)
    }
}

/// Score-based oversampling with step size 0.01 and the given chain length
/// and discard rate.
fn score_augment(chain_length: usize, discard_rate: f64) -> AugmentSection {
    AugmentSection {
        method: AugmentKind::Score,
        score: Some(ScoreSection {
            train: TrainSection {
                hidden: vec![128, 128],
                learning_rate: 0.01,
                epochs: 300,
                batch_size: Some(64),
                ..Default::default()
            },
            langevin: LangevinSection {
                step_size: 0.01,
                chain_length,
                discard_rate,
                discard_first: None,
                n_chains: 1,
                target_count: None,
                seed: None,
            },
            // rows are already z-scored with the training split
            standardize: false,
        }),
        ..Default::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates_and_round_trips() {
        for name in NAMES {
            let spec = preset(name).unwrap();
            spec.validate().unwrap();
            let back = ExperimentSpec::from_toml(&spec.to_toml()).unwrap();
            assert_eq!(back, spec, "{name}");
        }
        assert!(preset("nope").is_none());
    }
}
