//! Experiment configuration: a TOML file with one section per stage.
//! Every field has a default; an empty file reproduces the OU experiment.

use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use sdeonet::sde_lab::{SdeSpec, DEFAULT_SIM_LEVEL};
use sdeonet::sdeonet::{Architecture, TrainConfig};
use sdeonet::metrics::SinkhornParams;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every stage derives its own seed from it.
    pub seed: u64,
    /// Output directory for all artifacts.
    pub out: PathBuf,
    pub sde: SdeConfig,
    pub model: ModelConfig,
    pub data: DataConfig,
    pub train: TrainSection,
    pub evaluate: EvaluateConfig,
    pub pce: PceConfig,
    pub decompose: DecomposeConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            out: PathBuf::from("out"),
            sde: SdeConfig::default(),
            model: ModelConfig::default(),
            data: DataConfig::default(),
            train: TrainSection::default(),
            evaluate: EvaluateConfig::default(),
            pce: PceConfig::default(),
            decompose: DecomposeConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SdeKind {
    Ou,
    Gbm,
    Langevin,
}

/// SDE selection. Parameters not used by `kind` are ignored; unset ones take
/// the benchmark values of the chosen family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdeConfig {
    pub kind: SdeKind,
    pub horizon: f64,
    /// Initial state; defaults to 1 for OU and GBM and to the origin for Langevin.
    pub x0: Option<Vec<f64>>,
    /// OU mean-reversion rate.
    pub theta: f64,
    /// OU long-run mean.
    pub mean: f64,
    /// OU or GBM volatility; defaults to 1.3 (OU) or 0.3 (GBM).
    pub sigma: Option<f64>,
    /// GBM drift.
    pub mu: f64,
    /// Langevin dimension.
    pub dim: usize,
    /// Langevin target mean; defaults to `2(−1)^j j`.
    pub target_mean: Option<Vec<f64>>,
    /// Langevin target covariance, row-major; defaults to the identity.
    pub covariance: Option<Vec<Vec<f64>>>,
}

impl Default for SdeConfig {
    fn default() -> Self {
        SdeConfig {
            kind: SdeKind::Ou,
            horizon: 1.0,
            x0: None,
            theta: 1.0,
            mean: 1.2,
            sigma: None,
            mu: 1.0,
            dim: 5,
            target_mean: None,
            covariance: None,
        }
    }
}

impl SdeConfig {
    pub fn dim(&self) -> usize {
        match self.kind {
            SdeKind::Ou | SdeKind::Gbm => 1,
            SdeKind::Langevin => self.dim,
        }
    }

    pub fn x0(&self) -> Vec<f64> {
        self.x0.clone().unwrap_or_else(|| match self.kind {
            SdeKind::Ou | SdeKind::Gbm => vec![1.0],
            SdeKind::Langevin => vec![0.0; self.dim],
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma.unwrap_or(match self.kind {
            SdeKind::Gbm => 0.3,
            _ => 1.3,
        })
    }

    pub fn build(&self) -> Result<SdeSpec<f64>, CliError> {
        let x0 = self.x0();
        let scalar_x0 = || -> Result<f64, CliError> {
            match x0.as_slice() {
                [v] => Ok(*v),
                _ => Err(CliError::usage(format!("sde.x0 must have one entry, got {}", x0.len()))),
            }
        };
        let spec = match self.kind {
            SdeKind::Ou => SdeSpec::ornstein_uhlenbeck(self.theta, self.mean, self.sigma(), scalar_x0()?, self.horizon)?,
            SdeKind::Gbm => SdeSpec::geometric_brownian(self.mu, self.sigma(), scalar_x0()?, self.horizon)?,
            SdeKind::Langevin => {
                let d = self.dim;
                let mean = self
                    .target_mean
                    .clone()
                    .unwrap_or_else(|| (0..d).map(|j| 2.0 * if j % 2 == 0 { j as f64 } else { -(j as f64) }).collect());
                let covariance = match &self.covariance {
                    None => Array2::eye(d),
                    Some(rows) => {
                        if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                            return Err(CliError::usage(format!("sde.covariance must be {d}×{d}")));
                        }
                        Array2::from_shape_fn((d, d), |(i, j)| rows[i][j])
                    }
                };
                SdeSpec::gaussian_langevin(covariance, Array1::from(mean), x0, self.horizon)?
            }
        };
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Haar features per component `m`.
    pub basis_size: usize,
    /// Retained chaos terms per component `p`.
    pub terms: usize,
    pub branch_hidden: Vec<usize>,
    pub trunk_hidden: Vec<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { basis_size: 32, terms: 64, branch_hidden: vec![256, 256], trunk_hidden: vec![256, 256] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub samples: usize,
    /// Dyadic level of the simulation grid.
    pub sim_level: u32,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig { samples: 20_000, sim_level: DEFAULT_SIM_LEVEL }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// The trunk always sees `t/T`; recorded here so runs are self-describing.
    pub trunk_input: String,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSection { lr: d.lr, epochs: d.epochs, batch_size: d.batch_size, trunk_input: "t/T".into() }
    }
}

/// Operator to evaluate or decompose.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorChoice {
    /// The trained checkpoint `model.ckpt`.
    Checkpoint,
    /// The reference solution itself.
    Exact,
    /// The best-p truncated chaos expansion.
    Pce,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub operator: OperatorChoice,
    pub grid_points: usize,
    pub n_eval: usize,
    /// Independent evaluation repeats for the error bands.
    pub realisations: usize,
    pub sinkhorn_epsilon: Option<f64>,
    pub sinkhorn_max_iters: usize,
    pub sinkhorn_tol: f64,
    pub sinkhorn_max_points: usize,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        let s = SinkhornParams::default();
        EvaluateConfig {
            operator: OperatorChoice::Checkpoint,
            grid_points: 33,
            n_eval: 2000,
            realisations: 100,
            sinkhorn_epsilon: s.epsilon,
            sinkhorn_max_iters: s.max_iters,
            sinkhorn_tol: s.tol,
            sinkhorn_max_points: 500,
        }
    }
}

impl EvaluateConfig {
    pub fn sinkhorn(&self) -> SinkhornParams {
        SinkhornParams {
            epsilon: self.sinkhorn_epsilon,
            max_iters: self.sinkhorn_max_iters,
            tol: self.sinkhorn_tol,
            ..SinkhornParams::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PceConfig {
    pub max_degree: u32,
    pub basis_size: usize,
    pub grid_points: usize,
    /// `closed_form` (exact coefficients) or `propagator` (RK4 on the propagator system).
    pub method: PceMethod,
    pub ode_step: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PceMethod {
    ClosedForm,
    Propagator,
}

impl Default for PceConfig {
    fn default() -> Self {
        PceConfig { max_degree: 6, basis_size: 64, grid_points: 17, method: PceMethod::ClosedForm, ode_step: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecomposeConfig {
    pub operator: OperatorChoice,
    pub n_eval: usize,
    pub grid_points: usize,
    /// Term counts for the truncation sweep.
    pub p_sweep: Vec<usize>,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        DecomposeConfig {
            operator: OperatorChoice::Checkpoint,
            n_eval: 2000,
            grid_points: 33,
            p_sweep: vec![1, 2, 4, 8, 16, 32, 64, 128],
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::usage(format!("config: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn architecture(&self) -> Architecture<f64> {
        Architecture {
            basis_size: self.model.basis_size,
            terms: self.model.terms,
            dim: self.sde.dim(),
            horizon: self.sde.horizon,
            branch_hidden: self.model.branch_hidden.clone(),
            trunk_hidden: self.model.trunk_hidden.clone(),
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig { lr: self.train.lr, epochs: self.train.epochs, batch_size: self.train.batch_size, seed }
    }

    /// Checks every stage's preconditions before any work starts.
    pub fn validate(&self) -> Result<(), CliError> {
        let spec = self.sde.build()?;
        if self.train.trunk_input != "t/T" {
            return Err(CliError::usage("train.trunk_input only supports \"t/T\""));
        }
        sdeonet::chaos_basis::basis_levels(self.model.basis_size)?;
        if self.model.terms == 0 {
            return Err(CliError::usage("model.terms must be at least 1"));
        }
        if self.data.samples == 0 {
            return Err(CliError::usage("data.samples must be at least 1"));
        }
        let levels = sdeonet::chaos_basis::basis_levels(self.model.basis_size)?;
        if self.data.sim_level < levels || self.data.sim_level > 24 {
            return Err(CliError::usage(format!(
                "data.sim_level must lie in [log2(basis_size) = {levels}, 24], got {}",
                self.data.sim_level
            )));
        }
        self.train_config(0).validate()?;
        sdeonet::sdeonet::aligned_grid(spec.horizon(), self.evaluate.grid_points, self.data.sim_level)?;
        sdeonet::sdeonet::aligned_grid(spec.horizon(), self.decompose.grid_points, self.data.sim_level)?;
        if self.evaluate.n_eval < 100 {
            return Err(CliError::usage("evaluate.n_eval must be at least 100"));
        }
        if self.evaluate.realisations == 0 {
            return Err(CliError::usage("evaluate.realisations must be at least 1"));
        }
        if self.evaluate.operator == OperatorChoice::Pce {
            return Err(CliError::usage("evaluate.operator must be \"checkpoint\" or \"exact\""));
        }
        if self.decompose.operator == OperatorChoice::Exact {
            return Err(CliError::usage("decompose.operator must be \"checkpoint\" or \"pce\""));
        }
        if self.decompose.n_eval < 2 || self.decompose.p_sweep.contains(&0) {
            return Err(CliError::usage("decompose needs n_eval ≥ 2 and positive p_sweep entries"));
        }
        sdeonet::chaos_basis::basis_levels(self.pce.basis_size)?;
        if self.pce.grid_points < 2 {
            return Err(CliError::usage("pce.grid_points must be at least 2"));
        }
        if !(self.pce.ode_step > 0.0) {
            return Err(CliError::usage("pce.ode_step must be positive"));
        }
        Ok(())
    }
}
