//! Experiment configuration, read from JSON and overridden by flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nail_core::{LossConfig, MaskSpec, SolverConfig, SyntheticSpec, Variant};
use serde::{Deserialize, Serialize};

use crate::error::{NailError, Result};

/// A variant stored by its display name (`"NAIL-L"`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct VariantName(pub Variant);

impl TryFrom<String> for VariantName {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        Variant::from_str(&s).map(VariantName).map_err(|e| e.to_string())
    }
}

impl FromStr for VariantName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Variant::from_str(s).map(VariantName).map_err(|e| e.to_string())
    }
}

impl From<VariantName> for String {
    fn from(v: VariantName) -> String {
        v.0.name().to_string()
    }
}

impl fmt::Display for VariantName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.0.name())
    }
}

/// Serializable mirror of [`SyntheticSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n: usize,
    pub n_labels: usize,
    pub k_true: usize,
    pub view_dims: Vec<usize>,
    /// One value per view, or a single value shared by all views.
    pub noise_std: Vec<f64>,
    pub noisy_view_count: usize,
    pub positive_rate: f64,
    pub label_signal: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n: 200,
            n_labels: 8,
            k_true: 4,
            view_dims: vec![10, 12, 15],
            noise_std: vec![0.05],
            noisy_view_count: 0,
            positive_rate: 0.3,
            label_signal: 4.0,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn to_spec(&self) -> SyntheticSpec {
        let noise_std = match self.noise_std.as_slice() {
            [single] => vec![*single; self.view_dims.len()],
            many => many.to_vec(),
        };
        SyntheticSpec {
            n: self.n,
            n_labels: self.n_labels,
            k_true: self.k_true,
            view_dims: self.view_dims.clone(),
            noise_std,
            noisy_view_count: self.noisy_view_count,
            positive_rate: self.positive_rate,
            label_signal: self.label_signal,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// Path to a manifest, relative to the working directory.
    Manifest(PathBuf),
    Synthetic(SyntheticConfig),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskConfig {
    /// Fraction of sample rows removed from each view.
    pub r: f64,
    /// Fraction of positives and negatives hidden per label.
    pub s: f64,
}

impl Default for MaskConfig {
    fn default() -> Self {
        Self { r: 0.5, s: 0.5 }
    }
}

impl MaskConfig {
    pub fn spec(&self, seed: u64) -> MaskSpec {
        MaskSpec { feature_removal_rate: self.r, label_removal_rate: self.s, seed }
    }
}

/// Solver settings shared by every grid cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub max_outer: usize,
    pub tol: f64,
    pub inner_steps: usize,
    pub warm_start: usize,
    /// Keep the label weights nonnegative like the view weights.
    pub strict_paper: bool,
    pub gamma: f64,
    pub balance: f64,
    pub view_exponent: f64,
    /// Descent steps used to embed validation rows.
    pub embed_steps: usize,
    pub threshold: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        let solver = SolverConfig::default();
        let loss = LossConfig::default();
        Self {
            max_outer: solver.max_outer,
            tol: solver.tol,
            inner_steps: solver.inner_steps,
            warm_start: solver.warm_start,
            strict_paper: false,
            gamma: loss.gamma,
            balance: loss.balance,
            view_exponent: loss.view_exponent,
            embed_steps: 100,
            threshold: 0.5,
        }
    }
}

impl SolverOptions {
    pub fn solver_config(&self, variant: Variant, lambda: f64, mu: f64, latent_ratio: f64, seed: u64) -> SolverConfig {
        SolverConfig {
            lambda,
            mu,
            latent_ratio,
            variant,
            label_weights_signed: !self.strict_paper,
            max_outer: self.max_outer,
            tol: self.tol,
            inner_steps: self.inner_steps,
            warm_start: self.warm_start,
            seed,
            loss: LossConfig { gamma: self.gamma, balance: self.balance, view_exponent: self.view_exponent, ..LossConfig::default() },
            ..SolverConfig::default()
        }
    }
}

pub fn default_grid() -> Vec<f64> {
    (-3..=3).map(|i| 10f64.powi(i)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    /// Keep only this many rows of the dataset (seeded by `seed`).
    pub subsample: Option<usize>,
    pub mask: MaskConfig,
    pub variants: Vec<VariantName>,
    pub lambda_grid: Vec<f64>,
    pub mu_grid: Vec<f64>,
    pub rk_grid: Vec<f64>,
    pub repeats: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub solver: SolverOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataSource::Synthetic(SyntheticConfig::default()),
            subsample: None,
            mask: MaskConfig::default(),
            variants: vec![VariantName(Variant::Nail)],
            lambda_grid: default_grid(),
            mu_grid: default_grid(),
            rk_grid: vec![0.2, 0.5, 0.8],
            repeats: 10,
            train_fraction: 0.7,
            seed: 0,
            out: PathBuf::from("nail-out"),
            workers: 0,
            solver: SolverOptions::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| NailError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| NailError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(NailError::Config(msg));
        if self.variants.is_empty() {
            return bad("variant list is empty".into());
        }
        for (name, grid) in [("lambda", &self.lambda_grid), ("mu", &self.mu_grid), ("rk", &self.rk_grid)] {
            if grid.is_empty() {
                return bad(format!("{name} grid is empty"));
            }
            if grid.iter().any(|x| !x.is_finite()) {
                return bad(format!("{name} grid has a non-finite value"));
            }
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train fraction {} must lie in (0, 1)", self.train_fraction));
        }
        self.mask.spec(0).validate().map_err(|e| NailError::Config(e.to_string()))?;
        for &lambda in &self.lambda_grid {
            for &mu in &self.mu_grid {
                for &rk in &self.rk_grid {
                    self.solver
                        .solver_config(Variant::Nail, lambda, mu, rk, 0)
                        .validate()
                        .map_err(|e| NailError::Config(e.to_string()))?;
                }
            }
        }
        if !(self.solver.threshold > 0.0 && self.solver.threshold < 1.0) {
            return bad("threshold must lie in (0, 1)".into());
        }
        if let DataSource::Synthetic(s) = &self.data {
            s.to_spec().validate().map_err(|e| NailError::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Number of (λ, μ, r_k) cells.
    pub fn cell_count(&self) -> usize {
        self.lambda_grid.len() * self.mu_grid.len() * self.rk_grid.len()
    }
}
