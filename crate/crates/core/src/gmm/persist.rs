use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

use super::{FitConfig, GmmError, GmmModel, Standardizer};

pub const MODEL_FORMAT: &str = "coverage-gmm";
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Human-assigned or heuristic names for the components of a fitted model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentLabels {
    /// One label per component, e.g. `MAN`/`ZONE` or `CLUSTER_0`.
    pub labels: Vec<String>,
    /// How the labels were decided: `heuristic`, `override`, `ambiguous` or `none`.
    pub status: String,
    pub heuristic: String,
    pub margin: Option<f64>,
}

/// A fitted model with everything needed to score new feature rows.
#[derive(Clone, Debug)]
pub struct ModelDocument {
    pub model: GmmModel,
    pub feature_names: Vec<String>,
    /// Raw-space values substituted for missing features before scoring.
    pub fill_values: Vec<f64>,
    pub fit_config: FitConfig,
    pub labels: Option<ComponentLabels>,
}

#[derive(Serialize, Deserialize)]
struct FitMetadata {
    log_likelihood: f64,
    n_iterations: usize,
    converged: bool,
    config: FitConfig,
}

#[derive(Serialize, Deserialize)]
struct Wire {
    format: String,
    version: u32,
    components: usize,
    dim: usize,
    feature_names: Vec<String>,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    /// Row-major d×d per component.
    covariances: Vec<Vec<f64>>,
    standardizer: Standardizer,
    fill_values: Vec<f64>,
    fit: FitMetadata,
    labels: Option<ComponentLabels>,
}

#[derive(Deserialize)]
struct VersionProbe {
    format: String,
    version: u32,
}

impl ModelDocument {
    pub fn to_json(&self) -> Result<String, GmmError> {
        let m = &self.model;
        let d = m.dim();
        let wire = Wire {
            format: MODEL_FORMAT.into(),
            version: MODEL_FORMAT_VERSION,
            components: m.n_components(),
            dim: d,
            feature_names: self.feature_names.clone(),
            weights: m.weights(),
            means: m.means().iter().map(|v| v.iter().copied().collect()).collect(),
            covariances: m
                .covariances()
                .iter()
                .map(|c| (0..d).flat_map(|i| (0..d).map(move |j| c[(i, j)])).collect())
                .collect(),
            standardizer: m.standardizer().clone(),
            fill_values: self.fill_values.clone(),
            fit: FitMetadata {
                log_likelihood: m.log_likelihood,
                n_iterations: m.n_iterations,
                converged: m.converged,
                config: self.fit_config.clone(),
            },
            labels: self.labels.clone(),
        };
        serde_json::to_string_pretty(&wire).map_err(|e| GmmError::Persist(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, GmmError> {
        let probe: VersionProbe = serde_json::from_str(text).map_err(|e| GmmError::Persist(e.to_string()))?;
        if probe.format != MODEL_FORMAT {
            return Err(GmmError::Persist(format!("not a {MODEL_FORMAT} file (format {:?})", probe.format)));
        }
        if probe.version != MODEL_FORMAT_VERSION {
            return Err(GmmError::VersionMismatch { found: probe.version, expected: MODEL_FORMAT_VERSION });
        }
        let w: Wire = serde_json::from_str(text).map_err(|e| GmmError::Persist(e.to_string()))?;
        let d = w.dim;
        if w.feature_names.len() != d || w.fill_values.len() != d || w.weights.len() != w.components {
            return Err(GmmError::InvalidModel("declared sizes disagree with contents".into()));
        }
        let covariances = w
            .covariances
            .iter()
            .map(|c| {
                if c.len() != d * d {
                    return Err(GmmError::InvalidModel("covariance has wrong length".into()));
                }
                Ok(DMatrix::from_row_slice(d, d, c))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut model = GmmModel::from_parts(w.weights, w.means, covariances, w.standardizer)?;
        model.log_likelihood = w.fit.log_likelihood;
        model.n_iterations = w.fit.n_iterations;
        model.converged = w.fit.converged;
        Ok(ModelDocument {
            model,
            feature_names: w.feature_names,
            fill_values: w.fill_values,
            fit_config: w.fit.config,
            labels: w.labels,
        })
    }

    pub fn write<W: Write>(&self, mut sink: W) -> Result<(), GmmError> {
        let text = self.to_json()?;
        sink.write_all(text.as_bytes()).map_err(|e| GmmError::Persist(e.to_string()))?;
        sink.write_all(b"\n").map_err(|e| GmmError::Persist(e.to_string()))
    }

    pub fn read<R: Read>(mut source: R) -> Result<Self, GmmError> {
        let mut text = String::new();
        source.read_to_string(&mut text).map_err(|e| GmmError::Persist(e.to_string()))?;
        Self::from_json(&text)
    }
}
