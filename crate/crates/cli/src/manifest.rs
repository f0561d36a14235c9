//! `manifest.toml`: the spec that produced a run, its results and the hash
//! of every file it wrote. A manifest is enough to repeat the run.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::pipeline::{run_experiment, ExperimentResult, StageError};
use crate::spec::ExperimentSpec;

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub tool_version: String,
    pub spec: ExperimentSpec,
    pub result: ExperimentResult,
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid manifest: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("manifest format {found} is not supported (expected {FORMAT_VERSION})")]
    Version { found: u32 },
    #[error(transparent)]
    Run(#[from] StageError),
}

pub fn write_manifest(dir: &Path, spec: &ExperimentSpec, result: &ExperimentResult) -> std::io::Result<()> {
    let m = Manifest {
        format_version: FORMAT_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        spec: spec.clone(),
        result: result.clone(),
    };
    let text = toml::to_string_pretty(&m).map_err(std::io::Error::other)?;
    std::fs::write(dir.join(MANIFEST_FILE), text)
}

/// Reads a manifest file, or `manifest.toml` inside a directory.
pub fn read_manifest(path: &Path) -> Result<Manifest, ManifestError> {
    let file = if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    };
    let text = std::fs::read_to_string(&file).map_err(|source| ManifestError::Io {
        path: file.display().to_string(),
        source,
    })?;
    let m: Manifest = toml::from_str(&text)?;
    if m.format_version != FORMAT_VERSION {
        return Err(ManifestError::Version {
            found: m.format_version,
        });
    }
    Ok(m)
}

/// Differences between two results of the same spec. Floats are compared
/// bit for bit; an empty list means the rerun reproduced the original.
pub fn compare(a: &ExperimentResult, b: &ExperimentResult) -> Vec<String> {
    let mut diffs = Vec::new();
    let mut check = |what: &str, same: bool| {
        if !same {
            diffs.push(what.to_string());
        }
    };
    check("counts", a.counts == b.counts);
    let bits = |x: f64| x.to_bits();
    match (&a.metrics, &b.metrics) {
        (Some(x), Some(y)) => {
            check("confusion matrix", (x.tn, x.fp, x.fn_, x.tp) == (y.tn, y.fp, y.fn_, y.tp));
            for (name, p, q) in [
                ("recall", x.recall, y.recall),
                ("precision", x.precision, y.precision),
                ("f1", x.f1, y.f1),
                ("accuracy", x.accuracy, y.accuracy),
            ] {
                check(name, bits(p) == bits(q));
            }
        }
        (None, None) => {}
        _ => check("metrics", false),
    }
    check("density records", a.density.len() == b.density.len());
    for (x, y) in a.density.iter().zip(&b.density) {
        check(
            &format!("density class {}", x.class),
            x.jsd.map(bits) == y.jsd.map(bits)
                && bits(x.mass) == bits(y.mass)
                && bits(x.anchor_density) == bits(y.anchor_density),
        );
    }
    let flat = |v: &[Vec<f64>]| v.iter().flatten().map(|x| x.to_bits()).collect::<Vec<_>>();
    check("boundary", flat(&a.boundary) == flat(&b.boundary));
    check("test features", a.test_features_sha256 == b.test_features_sha256);
    for art in &a.artifacts {
        match b.artifacts.iter().find(|o| o.path == art.path) {
            Some(o) if o.sha256 == art.sha256 => {}
            Some(_) => check(&format!("artifact {}", art.path), false),
            None => check(&format!("missing artifact {}", art.path), false),
        }
    }
    diffs
}

/// Repeats the run recorded in `manifest`, writing into `out`, and returns
/// the new result with its differences from the recorded one.
pub fn rerun(manifest: &Manifest, out: &Path, base: Option<&Path>) -> Result<(ExperimentResult, Vec<String>), ManifestError> {
    let mut spec = manifest.spec.clone();
    spec.output_dir = out.to_path_buf();
    let result = run_experiment(&spec, base)?;
    let diffs = compare(&manifest.result, &result);
    Ok((result, diffs))
}
