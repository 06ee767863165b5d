//! Finite Gaussian mixtures with unconstrained full covariance ("VVV"),
//! fitted by expectation-maximization.
//!
//! Columns are z-scored before fitting; all component parameters live in the
//! standardized space and [`GmmModel::raw_means`]/[`GmmModel::raw_covariances`]
//! map them back. Log-likelihoods are reported in raw data units.
//!
//! Each restart seeds component centres with greedy k-means++, refines them with a
//! few k-means steps, hard-assigns points to the nearest centre and runs EM
//! from the resulting M-step. The M-step adds
//! `reg_floor` to every covariance diagonal. A component whose responsibility
//! mass drops below two points is re-seeded at a random observation.

mod persist;

pub use persist::{ComponentLabels, ModelDocument, MODEL_FORMAT, MODEL_FORMAT_VERSION};

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::rng::{seeded, DEFAULT_SEED};

/// Minimum responsibility mass a component must keep.
const MIN_COMPONENT_MASS: f64 = 2.0;
const MAX_RESEEDS_PER_RUN: usize = 20;
/// k-means refinement steps applied to the k-means++ centres.
const LLOYD_ITERATIONS: usize = 20;

#[derive(Debug, Error)]
pub enum GmmError {
    #[error("need more observations than components (n = {n}, G = {g})")]
    TooFewObservations { n: usize, g: usize },
    #[error("data must have at least one column")]
    NoColumns,
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("invalid fit configuration: {0}")]
    InvalidConfig(String),
    #[error(
        "all {restarts} restarts collapsed ({reason}); try a larger reg_floor or fewer components"
    )]
    Collapsed { restarts: usize, reason: String },
    #[error("dimension mismatch: model has {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("model format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("model file error: {0}")]
    Persist(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Number of mixture components G.
    pub components: usize,
    pub max_iterations: usize,
    /// Convergence threshold on the relative change in log-likelihood.
    pub tolerance: f64,
    pub n_restarts: usize,
    /// Added to every covariance diagonal in each M-step.
    pub reg_floor: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            components: 2,
            max_iterations: 500,
            tolerance: 1e-6,
            n_restarts: 10,
            reg_floor: 1e-6,
            seed: DEFAULT_SEED,
        }
    }
}

impl FitConfig {
    pub fn with_components(mut self, g: usize) -> Self {
        self.components = g;
        self
    }

    pub fn validate(&self) -> Result<(), GmmError> {
        let bad = |m: &str| Err(GmmError::InvalidConfig(m.to_owned()));
        if self.components == 0 {
            return bad("components must be >= 1");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be >= 1");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be > 0");
        }
        if self.n_restarts == 0 {
            return bad("n_restarts must be >= 1");
        }
        if !(self.reg_floor >= 0.0) || !self.reg_floor.is_finite() {
            return bad("reg_floor must be finite and >= 0");
        }
        Ok(())
    }
}

/// Per-column z-scoring learned from training data. Constant columns get a
/// unit scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &DMatrix<f64>) -> Self {
        let n = data.nrows() as f64;
        let mut mean = Vec::with_capacity(data.ncols());
        let mut scale = Vec::with_capacity(data.ncols());
        for col in data.column_iter() {
            let m = col.sum() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            let s = var.sqrt();
            mean.push(m);
            scale.push(if s > 0.0 && s.is_finite() { s } else { 1.0 });
        }
        Standardizer { mean, scale }
    }

    pub fn identity(dim: usize) -> Self {
        Standardizer { mean: vec![0.0; dim], scale: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, data: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = data.clone();
        for (j, mut col) in z.column_iter_mut().enumerate() {
            let (m, s) = (self.mean[j], self.scale[j]);
            col.apply(|v| *v = (*v - m) / s);
        }
        z
    }

    pub fn transform_row(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(x.len(), x.iter().enumerate().map(|(j, v)| (v - self.mean[j]) / self.scale[j]))
    }

    /// `Σ_j ln scale_j`, the log-Jacobian between raw and standardized densities.
    fn log_scale_sum(&self) -> f64 {
        self.scale.iter().map(|s| s.ln()).sum()
    }
}

#[derive(Clone, Debug)]
struct Component {
    weight: f64,
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    /// Inverse of the lower Cholesky factor of `covariance`.
    chol_inv: DMatrix<f64>,
    /// `-0.5 (d ln 2π + ln det Σ)`
    log_norm: f64,
}

impl Component {
    fn new(weight: f64, mean: DVector<f64>, covariance: DMatrix<f64>) -> Option<Self> {
        let d = mean.len();
        let chol = covariance.clone().cholesky()?;
        let l = chol.l();
        let log_det = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        if !log_det.is_finite() {
            return None;
        }
        let chol_inv = l.solve_lower_triangular(&DMatrix::identity(d, d))?;
        let log_norm = -0.5 * (d as f64 * (2.0 * PI).ln() + log_det);
        Some(Component { weight, mean, covariance, chol_inv, log_norm })
    }

    /// Gaussian log-density of every row of `z`.
    fn log_density_rows(&self, z: &DMatrix<f64>) -> DVector<f64> {
        let mut diff = z.clone();
        for (j, mut col) in diff.column_iter_mut().enumerate() {
            col.add_scalar_mut(-self.mean[j]);
        }
        let y = diff * self.chol_inv.transpose();
        let mut out = DVector::from_element(z.nrows(), self.log_norm);
        for col in y.column_iter() {
            for (o, v) in out.iter_mut().zip(col.iter()) {
                *o -= 0.5 * v * v;
            }
        }
        out
    }

    fn log_density(&self, z: &DVector<f64>) -> f64 {
        let y = &self.chol_inv * (z - &self.mean);
        self.log_norm - 0.5 * y.norm_squared()
    }
}

/// Posterior component probabilities, one row per observation.
#[derive(Clone, Debug, PartialEq)]
pub struct Responsibilities(pub DMatrix<f64>);

impl Responsibilities {
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.0.row(i).iter().copied().collect()
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }
}

/// A fitted mixture. Immutable; safe to share across threads.
#[derive(Clone, Debug)]
pub struct GmmModel {
    components: Vec<Component>,
    standardizer: Standardizer,
    /// Training log-likelihood (raw units) of the returned parameters.
    pub log_likelihood: f64,
    pub n_iterations: usize,
    pub converged: bool,
}

impl GmmModel {
    /// Builds a model from standardized-space parameters.
    pub fn from_parts(
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        covariances: Vec<DMatrix<f64>>,
        standardizer: Standardizer,
    ) -> Result<Self, GmmError> {
        let g = weights.len();
        let d = standardizer.dim();
        if g == 0 || means.len() != g || covariances.len() != g {
            return Err(GmmError::InvalidModel("component counts disagree".into()));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w > 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(GmmError::InvalidModel("weights must be positive and sum to 1".into()));
        }
        if standardizer.scale.len() != d || standardizer.scale.iter().any(|s| !(*s > 0.0)) {
            return Err(GmmError::InvalidModel("standardizer scales must be positive".into()));
        }
        let mut components = Vec::with_capacity(g);
        for ((w, m), c) in weights.into_iter().zip(means).zip(covariances) {
            if m.len() != d || c.nrows() != d || c.ncols() != d {
                return Err(GmmError::InvalidModel("parameter dimensions disagree".into()));
            }
            if (&c - c.transpose()).amax() > 1e-9 * (1.0 + c.amax()) {
                return Err(GmmError::InvalidModel("covariance is not symmetric".into()));
            }
            let comp = Component::new(w, DVector::from_vec(m), c)
                .ok_or_else(|| GmmError::InvalidModel("covariance is not positive definite".into()))?;
            components.push(comp);
        }
        Ok(GmmModel { components, standardizer, log_likelihood: f64::NAN, n_iterations: 0, converged: false })
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.standardizer.dim()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    /// Component means in standardized units.
    pub fn means(&self) -> Vec<DVector<f64>> {
        self.components.iter().map(|c| c.mean.clone()).collect()
    }

    /// Component covariances in standardized units.
    pub fn covariances(&self) -> Vec<DMatrix<f64>> {
        self.components.iter().map(|c| c.covariance.clone()).collect()
    }

    pub fn raw_means(&self) -> Vec<DVector<f64>> {
        let s = &self.standardizer;
        self.components
            .iter()
            .map(|c| DVector::from_iterator(c.mean.len(), c.mean.iter().enumerate().map(|(j, m)| m * s.scale[j] + s.mean[j])))
            .collect()
    }

    pub fn raw_covariances(&self) -> Vec<DMatrix<f64>> {
        let s = &self.standardizer;
        self.components
            .iter()
            .map(|c| DMatrix::from_fn(c.covariance.nrows(), c.covariance.ncols(), |i, j| c.covariance[(i, j)] * s.scale[i] * s.scale[j]))
            .collect()
    }

    fn check_dim(&self, found: usize) -> Result<(), GmmError> {
        if found != self.dim() {
            return Err(GmmError::DimensionMismatch { expected: self.dim(), found });
        }
        Ok(())
    }

    /// `ln π_g + ln N(z | μ_g, Σ_g)` for every standardized row and component.
    fn weighted_log_densities(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(z.nrows(), self.components.len());
        for (g, c) in self.components.iter().enumerate() {
            let ld = c.log_density_rows(z);
            out.set_column(g, &ld.add_scalar(c.weight.ln()));
        }
        out
    }

    /// Membership probabilities for one observation, computed in log space.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>, GmmError> {
        self.check_dim(x.len())?;
        let z = self.standardizer.transform_row(x);
        let logs: Vec<f64> = self.components.iter().map(|c| c.weight.ln() + c.log_density(&z)).collect();
        let lse = log_sum_exp(&logs);
        Ok(logs.iter().map(|l| (l - lse).exp()).collect())
    }

    /// Membership probabilities for every row of `data`.
    pub fn predict_proba_matrix(&self, data: &DMatrix<f64>) -> Result<Responsibilities, GmmError> {
        self.check_dim(data.ncols())?;
        let z = self.standardizer.transform(data);
        let (_, resp) = normalize_rows(self.weighted_log_densities(&z));
        Ok(Responsibilities(resp))
    }

    /// Hard labels: argmax of the membership probabilities, ties to the lower index.
    pub fn assign_labels(&self, data: &DMatrix<f64>) -> Result<Vec<usize>, GmmError> {
        let resp = self.predict_proba_matrix(data)?;
        Ok((0..resp.nrows()).map(|i| argmax(resp.0.row(i).iter().copied())).collect())
    }

    /// `Σ_i ln Σ_g π_g f_g(x_i)` in raw data units.
    pub fn log_likelihood(&self, data: &DMatrix<f64>) -> Result<f64, GmmError> {
        self.check_dim(data.ncols())?;
        let z = self.standardizer.transform(data);
        let (row_lse, _) = normalize_rows(self.weighted_log_densities(&z));
        Ok(row_lse.iter().sum::<f64>() - data.nrows() as f64 * self.standardizer.log_scale_sum())
    }
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Row-wise log-sum-exp and the normalized probabilities.
fn normalize_rows(mut logs: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = logs.nrows();
    let mut lse = DVector::zeros(n);
    let mut buf = vec![0.0; logs.ncols()];
    for i in 0..n {
        for (b, v) in buf.iter_mut().zip(logs.row(i).iter()) {
            *b = *v;
        }
        let l = log_sum_exp(&buf);
        lse[i] = l;
        for g in 0..logs.ncols() {
            logs[(i, g)] = (logs[(i, g)] - l).exp();
        }
    }
    (lse, logs)
}

/// Log-likelihood history of one EM restart.
#[derive(Clone, Debug, Default)]
pub struct RunTrace {
    pub restart: usize,
    /// Training log-likelihood after the initial M-step and after every EM iteration.
    pub log_likelihoods: Vec<f64>,
    /// Positions in `log_likelihoods` reached through a component re-seed;
    /// monotonicity is only guaranteed between re-seeds.
    pub reseeds: Vec<usize>,
    pub converged: bool,
    pub failure: Option<String>,
}

impl RunTrace {
    /// Largest decrease between consecutive EM iterations not separated by a re-seed.
    pub fn max_decrease(&self) -> f64 {
        self.log_likelihoods
            .windows(2)
            .enumerate()
            .filter(|(i, _)| !self.reseeds.contains(&(i + 1)))
            .map(|(_, w)| w[0] - w[1])
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, Default)]
pub struct FitReport {
    pub runs: Vec<RunTrace>,
    pub best_restart: usize,
}

/// Fits a mixture, returning the restart with the highest final log-likelihood.
pub fn fit(data: &DMatrix<f64>, config: &FitConfig) -> Result<GmmModel, GmmError> {
    fit_with_report(data, config).map(|(m, _)| m)
}

pub fn fit_with_report(data: &DMatrix<f64>, config: &FitConfig) -> Result<(GmmModel, FitReport), GmmError> {
    config.validate()?;
    let (n, d) = data.shape();
    if d == 0 {
        return Err(GmmError::NoColumns);
    }
    if n <= config.components {
        return Err(GmmError::TooFewObservations { n, g: config.components });
    }
    for (col, c) in data.column_iter().enumerate() {
        if let Some(row) = c.iter().position(|v| !v.is_finite()) {
            return Err(GmmError::NonFinite { row, col });
        }
    }

    let standardizer = Standardizer::fit(data);
    let z = standardizer.transform(data);
    let ctx = EmContext::new(&z, config, standardizer.log_scale_sum());

    let results: Vec<(Option<Vec<Component>>, RunTrace)> =
        (0..config.n_restarts).into_par_iter().map(|r| ctx.run(r)).collect();

    let mut best: Option<(usize, Vec<Component>, f64)> = None;
    let mut runs = Vec::with_capacity(results.len());
    for (r, (comps, trace)) in results.into_iter().enumerate() {
        if let (Some(comps), Some(&ll)) = (comps, trace.log_likelihoods.last()) {
            if best.as_ref().is_none_or(|(_, _, b)| ll > *b) {
                best = Some((r, comps, ll));
            }
        }
        runs.push(trace);
    }
    let Some((best_restart, components, ll)) = best else {
        let reason = runs.iter().filter_map(|t| t.failure.clone()).next().unwrap_or_default();
        return Err(GmmError::Collapsed { restarts: config.n_restarts, reason });
    };
    let trace = &runs[best_restart];
    let model = GmmModel {
        components,
        standardizer,
        log_likelihood: ll,
        n_iterations: trace.log_likelihoods.len().saturating_sub(1).max(1),
        converged: trace.converged,
    };
    Ok((model, FitReport { runs, best_restart }))
}

struct EmContext<'a> {
    z: &'a DMatrix<f64>,
    config: &'a FitConfig,
    /// Covariance of the standardized data plus the floor; used for re-seeds.
    global_cov: DMatrix<f64>,
    log_scale_sum: f64,
}

impl<'a> EmContext<'a> {
    fn new(z: &'a DMatrix<f64>, config: &'a FitConfig, log_scale_sum: f64) -> Self {
        let n = z.nrows() as f64;
        let mut global_cov = z.tr_mul(z) / n;
        symmetrize(&mut global_cov);
        for i in 0..global_cov.nrows() {
            global_cov[(i, i)] += config.reg_floor.max(1e-6);
        }
        EmContext { z, config, global_cov, log_scale_sum }
    }

    fn run(&self, restart: usize) -> (Option<Vec<Component>>, RunTrace) {
        let mut rng = seeded(self.config.seed, &[restart as u64]);
        let mut trace = RunTrace { restart, ..Default::default() };
        let g = self.config.components;
        let n = self.z.nrows();

        let seeds = kmeans_plus_plus(self.z, g, &mut rng);
        let assignment = lloyd(self.z, &seeds, LLOYD_ITERATIONS);
        let mut resp = DMatrix::zeros(n, g);
        for (i, &k) in assignment.iter().enumerate() {
            resp[(i, k)] = 1.0;
        }

        let mut reseeds = 0usize;
        let mut comps = match self.m_step(&resp, &mut rng, &mut reseeds) {
            Some(c) => c,
            None => {
                trace.failure = Some("initial components collapsed".into());
                return (None, trace);
            }
        };
        let (mut ll, mut resp) = self.e_step(&comps);
        trace.log_likelihoods.push(ll);

        for _ in 0..self.config.max_iterations {
            let before = reseeds;
            comps = match self.m_step(&resp, &mut rng, &mut reseeds) {
                Some(c) => c,
                None => {
                    trace.failure = Some(format!("component collapsed after {reseeds} re-seeds"));
                    return (None, trace);
                }
            };
            let (new_ll, new_resp) = self.e_step(&comps);
            trace.log_likelihoods.push(new_ll);
            if reseeds > before {
                trace.reseeds.push(trace.log_likelihoods.len() - 1);
            } else if (new_ll - ll).abs() <= self.config.tolerance * ll.abs().max(1.0) {
                trace.converged = true;
                break;
            }
            ll = new_ll;
            resp = new_resp;
        }
        (Some(comps), trace)
    }

    /// Log-likelihood (raw units) and responsibilities under `comps`.
    fn e_step(&self, comps: &[Component]) -> (f64, DMatrix<f64>) {
        let mut logs = DMatrix::zeros(self.z.nrows(), comps.len());
        for (g, c) in comps.iter().enumerate() {
            logs.set_column(g, &c.log_density_rows(self.z).add_scalar(c.weight.ln()));
        }
        let (lse, resp) = normalize_rows(logs);
        (lse.sum() - self.z.nrows() as f64 * self.log_scale_sum, resp)
    }

    /// Weighted mean/covariance updates. Components with too little mass, or
    /// whose covariance fails to factor, are re-seeded at a random observation.
    fn m_step(&self, resp: &DMatrix<f64>, rng: &mut impl Rng, reseeds: &mut usize) -> Option<Vec<Component>> {
        let (n, d) = self.z.shape();
        let g = resp.ncols();
        let mut params: Vec<(f64, DVector<f64>, DMatrix<f64>)> = Vec::with_capacity(g);
        for k in 0..g {
            let r = resp.column(k);
            let mass: f64 = r.sum();
            let fitted = (mass >= MIN_COMPONENT_MASS).then(|| {
                let mean = self.z.tr_mul(&r) / mass;
                let root: Vec<f64> = r.iter().map(|v| v.sqrt()).collect();
                let mut w = self.z.clone();
                for (j, mut col) in w.column_iter_mut().enumerate() {
                    for (v, s) in col.iter_mut().zip(&root) {
                        *v = (*v - mean[j]) * s;
                    }
                }
                let mut cov = w.tr_mul(&w) / mass;
                symmetrize(&mut cov);
                for i in 0..d {
                    cov[(i, i)] += self.config.reg_floor;
                }
                (mass / n as f64, mean, cov)
            });
            params.push(fitted.unwrap_or((0.0, DVector::zeros(d), DMatrix::zeros(d, d))));
        }

        let mut comps: Vec<Option<Component>> = params
            .into_iter()
            .map(|(w, m, c)| if w > 0.0 { Component::new(w, m, c) } else { None })
            .collect();
        for slot in comps.iter_mut().filter(|c| c.is_none()) {
            *reseeds += 1;
            if *reseeds > MAX_RESEEDS_PER_RUN {
                return None;
            }
            let i = rng.random_range(0..n);
            let mean = self.z.row(i).transpose();
            *slot = Some(Component::new(1.0 / g as f64, mean, self.global_cov.clone())?);
        }
        let mut comps: Vec<Component> = comps.into_iter().map(Option::unwrap).collect();
        let total: f64 = comps.iter().map(|c| c.weight).sum();
        for c in &mut comps {
            c.weight /= total;
        }
        Some(comps)
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Greedy k-means++ seeding: row indices of `g` centres. Each new centre is
/// the best of `2 + ln g` candidates drawn with probability proportional to
/// squared distance from the nearest centre chosen so far, judged by the
/// resulting total squared distance.
pub fn kmeans_plus_plus(z: &DMatrix<f64>, g: usize, rng: &mut impl Rng) -> Vec<usize> {
    let n = z.nrows();
    let trials = 2 + (g as f64).ln().floor() as usize;
    let dist_to = |c: usize| -> Vec<f64> { (0..n).map(|i| (z.row(i) - z.row(c)).norm_squared()).collect() };
    let mut seeds = vec![rng.random_range(0..n)];
    let mut d2 = dist_to(seeds[0]);
    while seeds.len() < g {
        let candidates: Vec<usize> = match WeightedIndex::new(&d2) {
            Ok(dist) => (0..trials).map(|_| dist.sample(rng)).collect(),
            // every point coincides with a chosen centre
            Err(_) => vec![rng.random_range(0..n)],
        };
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        for c in candidates {
            let merged: Vec<f64> = d2.iter().zip(dist_to(c)).map(|(a, b)| a.min(b)).collect();
            let potential: f64 = merged.iter().sum();
            if best.as_ref().is_none_or(|(p, _, _)| potential < *p) {
                best = Some((potential, c, merged));
            }
        }
        let (_, next, merged) = best.expect("at least one candidate");
        seeds.push(next);
        d2 = merged;
    }
    seeds
}

/// Hard assignment of every row to its nearest centre after up to `max_iter`
/// k-means updates starting from the rows `seeds`. A centre that loses all its
/// points keeps its previous position.
pub fn lloyd(z: &DMatrix<f64>, seeds: &[usize], max_iter: usize) -> Vec<usize> {
    let (n, d) = z.shape();
    let g = seeds.len();
    let mut centres: Vec<DVector<f64>> = seeds.iter().map(|&s| z.row(s).transpose()).collect();
    let nearest = |centres: &[DVector<f64>], i: usize| {
        let row = z.row(i).transpose();
        argmax(centres.iter().map(|c| -(&row - c).norm_squared()))
    };
    let mut assignment: Vec<usize> = (0..n).map(|i| nearest(&centres, i)).collect();
    for _ in 0..max_iter {
        let mut sums = vec![DVector::zeros(d); g];
        let mut counts = vec![0usize; g];
        for (i, &k) in assignment.iter().enumerate() {
            sums[k] += z.row(i).transpose();
            counts[k] += 1;
        }
        for k in 0..g {
            if counts[k] > 0 {
                centres[k] = &sums[k] / counts[k] as f64;
            }
        }
        let next: Vec<usize> = (0..n).map(|i| nearest(&centres, i)).collect();
        if next == assignment {
            break;
        }
        assignment = next;
    }
    assignment
}
