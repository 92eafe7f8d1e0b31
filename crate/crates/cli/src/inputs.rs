//! File loading and the error object written on failure.

use std::fs;
use std::path::{Path, PathBuf};

use genbound_core::bounds::StepCdf;
use genbound_core::chain::{load_chain_json, LoadedChain};
use genbound_core::deepnet::{NetworkFile, NetworkSpec};
use genbound_core::empirical::load_class_json;
use genbound_core::{Error, FunctionClass, Trajectory};
use serde::{Deserialize, Serialize};

/// What a failing command reports.
#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub kind: String,
    pub message: String,
    pub field: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            kind: e.kind().into(),
            message: e.to_string(),
            field: e.field(),
        }
    }
}

impl Failure {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Failure {
            kind: "io".into(),
            message: format!("{}: {e}", path.display()),
            field: path.display().to_string(),
        }
    }

    pub fn parse(field: &str, message: impl Into<String>) -> Self {
        Failure {
            kind: "parse".into(),
            message: message.into(),
            field: field.into(),
        }
    }

    pub fn arg(field: &str, message: impl Into<String>) -> Self {
        Failure {
            kind: "invalid_argument".into(),
            message: message.into(),
            field: field.into(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, Failure>;

pub fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

pub fn chain(path: &Path) -> CliResult<LoadedChain> {
    Ok(load_chain_json(&read(path)?)?)
}

pub fn class(path: &Path) -> CliResult<FunctionClass> {
    Ok(load_class_json(&read(path)?)?)
}

pub fn trajectory(path: &Path) -> CliResult<Trajectory> {
    let t: Trajectory = serde_json::from_str(&read(path)?).map_err(|e| Failure::parse("trajectory", e.to_string()))?;
    if t.indices.is_empty() {
        return Err(Failure::parse("trajectory.indices", "empty trajectory"));
    }
    if let Some(i) = t.indices.iter().position(|&x| x >= t.n_states) {
        return Err(Failure::parse(
            &format!("trajectory.indices[{i}]"),
            format!("state {} out of range for {} states", t.indices[i], t.n_states),
        ));
    }
    Ok(t)
}

/// Network document; a string `base` is resolved relative to the document.
pub fn network(path: &Path) -> CliResult<NetworkSpec> {
    let file = NetworkFile::from_json(&read(path)?)?;
    let dir: PathBuf = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let spec = file.into_spec(|p| {
        let full = dir.join(p);
        let text = fs::read_to_string(&full).map_err(|e| Error::Parse {
            field: "base".into(),
            message: format!("{}: {e}", full.display()),
        })?;
        load_class_json(&text)
    })?;
    Ok(spec)
}

/// Step CDF as `{"xs": [...], "values": [...]}` or `{"points": [...], "weights": [...]}`.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum CdfFile {
    Steps { xs: Vec<f64>, values: Vec<f64> },
    Masses { points: Vec<f64>, weights: Vec<f64> },
}

pub fn step_cdf(path: &Path, field: &str) -> CliResult<StepCdf> {
    let file: CdfFile = serde_json::from_str(&read(path)?).map_err(|e| Failure::parse(field, e.to_string()))?;
    let cdf = match file {
        CdfFile::Steps { xs, values } => StepCdf::new(xs, values),
        CdfFile::Masses { points, weights } => StepCdf::from_masses(&points, &weights),
    };
    cdf.map_err(|e| {
        let mut f = Failure::from(e);
        f.field = field.into();
        f
    })
}

/// Labels of a lifted chain as numbers.
pub fn numeric_labels(labels: &[String]) -> CliResult<Vec<f64>> {
    labels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            l.trim_matches('"')
                .parse::<f64>()
                .map_err(|_| Failure::parse(&format!("labels[{i}]"), format!("label {l:?} is not numeric")))
        })
        .collect()
}
