//! Experiment configuration: presets, TOML config files and flag overrides.
//!
//! Precedence: command-line flags > config file > preset defaults. Presets
//! expand to the benchmark parameter grids used throughout the result
//! tables; `custom` starts from `table1` values.

use anyhow::{bail, Context};
use gmwb::contract::ContractParams;
use gmwb::lsmc::{Algorithm, SolverConfig};
use gmwb::market::{ModelParams, RateMode};
use gmwb::regression::RegressorKind;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// One fully resolved pricing experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub preset: String,
    pub model: ModelParams,
    pub contract: ContractConfig,
    pub solver: SolverSettings,
    pub runs: usize,
    /// Fresh-path count for the out-of-sample lower estimate; 0 disables it.
    pub eval_paths: usize,
}

/// Contract terms in config form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContractConfig {
    pub premium: f64,
    pub maturity_years: f64,
    pub withdrawals_per_year: usize,
    pub penalty: f64,
    pub fee: f64,
}

impl ContractConfig {
    pub fn build(&self) -> ContractParams {
        ContractParams::with_uniform_dates(
            self.premium,
            self.maturity_years,
            self.withdrawals_per_year,
            self.penalty,
            self.fee,
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverSettings {
    pub algorithm: Algorithm,
    pub regressor: RegressorKind,
    pub paths: usize,
    pub seed: u64,
    pub grid_size: usize,
}

impl ExperimentConfig {
    /// Preset parameter grids.
    ///
    /// * `table1` — constant rate 5%, fee 1.35%, penalty 10%, annual
    ///   withdrawals over 10 years; volatility selectable via `--sigma`
    ///   (default 20%).
    /// * `table2` — `table1` at sigma 20% with a reduced default path count,
    ///   the path-count ladder configuration.
    /// * `table3` — Vasicek short rate (r0 = theta = 5%, kappa = 0.0349,
    ///   sigma_r = 2%, rho = 0.3) with fee 1%; volatility default 5%.
    pub fn preset(name: &str) -> anyhow::Result<Self> {
        let base_contract = ContractConfig {
            premium: 1.0,
            maturity_years: 10.0,
            withdrawals_per_year: 1,
            penalty: 0.1,
            fee: 0.0135,
        };
        let solver = SolverSettings {
            algorithm: Algorithm::RealizedNow,
            regressor: RegressorKind::Ols,
            paths: 100_000,
            seed: 42,
            grid_size: 1000,
        };
        let cfg = match name {
            "table1" | "custom" => ExperimentConfig {
                preset: name.to_string(),
                model: ModelParams::constant_rate(1.0, 0.05, 0.20),
                contract: base_contract,
                solver,
                runs: 20,
                eval_paths: 0,
            },
            "table2" => ExperimentConfig {
                preset: name.to_string(),
                model: ModelParams::constant_rate(1.0, 0.05, 0.20),
                contract: base_contract,
                solver: SolverSettings {
                    paths: 10_000,
                    ..solver
                },
                runs: 20,
                eval_paths: 0,
            },
            "table3" => ExperimentConfig {
                preset: name.to_string(),
                model: ModelParams {
                    s0: 1.0,
                    r0: 0.05,
                    kappa: 0.0349,
                    theta: 0.05,
                    sigma_r: 0.02,
                    sigma_s: 0.05,
                    rho: 0.3,
                    rate_mode: RateMode::Vasicek,
                },
                contract: ContractConfig {
                    fee: 0.01,
                    ..base_contract
                },
                solver,
                runs: 20,
                eval_paths: 0,
            },
            other => bail!("unknown preset `{other}`; expected table1, table2, table3 or custom"),
        };
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let cfg: ExperimentConfig = toml::from_str(&text)
            .with_context(|| format!("parsing config file {}", path.display()))?;
        Ok(cfg)
    }

    pub fn solver_config(&self) -> SolverConfig {
        let mut cfg = SolverConfig::new(
            self.solver.algorithm,
            self.solver.regressor,
            self.solver.paths,
            self.solver.seed,
        );
        cfg.grid_size = self.solver.grid_size;
        cfg
    }

    /// Validates every component, naming the offending field.
    pub fn validate(&self) -> anyhow::Result<()> {
        self.model.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
        self.contract.build().validate().map_err(|e| anyhow::anyhow!("{e}"))?;
        self.solver_config().validate().map_err(|e| anyhow::anyhow!("{e}"))?;
        if self.runs == 0 {
            bail!("invalid parameter `runs`: must be >= 1");
        }
        Ok(())
    }

    /// Compact single-line fingerprint for result rows.
    pub fn fingerprint(&self) -> String {
        format!(
            "{}|{}|{}|{}|sigma_s={}|fee={}|paths={}|runs={}|seed={}|grid={}",
            self.preset,
            self.solver.algorithm,
            self.solver.regressor,
            self.model.rate_mode,
            self.model.sigma_s,
            self.contract.fee,
            self.solver.paths,
            self.runs,
            self.solver.seed,
            self.solver.grid_size,
        )
    }
}
