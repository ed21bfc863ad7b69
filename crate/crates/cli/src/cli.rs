//! Argument parsing. Each setting resolves as flag, then config file, then
//! built-in default.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use price_diffusion::{FitOptions, GridConfig, MarketSpec, ModelParams};
use serde::Deserialize;

use crate::error::CliError;
use crate::output::Format;

#[derive(Debug, Parser)]
#[command(
    name = "price-diffusion",
    version,
    about = "Dynamic pricing and rebate design under social diffusion"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate (p, q, alpha) from an adoption series.
    Fit(FitArgs),
    /// Solve the firm's finite-horizon pricing problem.
    Price(PriceArgs),
    /// Solve the policymaker-firm rebate game.
    Rebate(RebateArgs),
    /// Simulate adoption under a given price path.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Directory for output artifacts (created if missing).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Format of tabular outputs.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Seed for randomized components.
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON file of settings; keys match the long flag names with underscores.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct MarketArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub p: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Unit cost C.
    #[arg(long)]
    pub cost: Option<f64>,
    /// Initial adoption fraction F_0.
    #[arg(long)]
    pub f0: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub grid_points: Option<usize>,
    #[arg(long)]
    pub price_tol: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Adoption series CSV.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Market size, for files with cumulative adopter counts.
    #[arg(long)]
    pub population: Option<f64>,
    /// Hold alpha at this value instead of estimating it.
    #[arg(long)]
    pub fixed_alpha: Option<f64>,
    /// Estimate F_0 instead of taking the first observation.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub free_f0: Option<bool>,
    /// Number of multistart runs.
    #[arg(long)]
    pub starts: Option<usize>,
    /// Simplex iteration budget per run.
    #[arg(long)]
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct PriceArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub market: MarketArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Number of periods T.
    #[arg(long)]
    pub horizon: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub market: MarketArgs,
    /// CSV with a `price` or `price_t` column; one row per period.
    #[arg(long)]
    pub prices: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RebateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub market: MarketArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Policymaker's rebate-aversion weight.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Points in the rebate scan.
    #[arg(long)]
    pub scan_points: Option<usize>,
    /// Largest rebate scanned (default 1/beta).
    #[arg(long)]
    pub r_max: Option<f64>,
    /// Solve for each of these comma-separated beta values instead.
    #[arg(long, value_delimiter = ',')]
    pub sweep_beta: Option<Vec<f64>>,
}

/// Settings file contents. Unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub out_dir: Option<PathBuf>,
    pub format: Option<Format>,
    pub seed: Option<u64>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub alpha: Option<f64>,
    pub cost: Option<f64>,
    pub f0: Option<f64>,
    pub horizon: Option<usize>,
    pub grid_points: Option<usize>,
    pub price_tol: Option<f64>,
    pub input: Option<PathBuf>,
    pub population: Option<f64>,
    pub fixed_alpha: Option<f64>,
    pub free_f0: Option<bool>,
    pub starts: Option<usize>,
    pub max_iterations: Option<usize>,
    pub prices: Option<PathBuf>,
    pub beta: Option<f64>,
    pub scan_points: Option<usize>,
    pub r_max: Option<f64>,
    pub sweep_beta: Option<Vec<f64>>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

pub const DEFAULT_P: f64 = 1.0;
pub const DEFAULT_Q: f64 = 1.0;
pub const DEFAULT_COST: f64 = 1.0;
pub const DEFAULT_HORIZON: usize = 5;
pub const DEFAULT_BETA: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSettings {
    pub out_dir: PathBuf,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitSettings {
    pub output: OutputSettings,
    pub input: PathBuf,
    pub population: Option<f64>,
    pub fixed_alpha: Option<f64>,
    pub free_f0: bool,
    pub starts: usize,
    pub max_iterations: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceSettings {
    pub output: OutputSettings,
    pub market: MarketSpec,
    pub f0: f64,
    pub grid: GridConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSettings {
    pub output: OutputSettings,
    pub params: ModelParams,
    pub cost: f64,
    pub f0: f64,
    pub prices: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RebateSettings {
    pub output: OutputSettings,
    pub market: MarketSpec,
    pub f0: f64,
    pub beta: f64,
    pub grid: GridConfig,
    pub scan_points: usize,
    pub r_max: Option<f64>,
    pub sweep_beta: Option<Vec<f64>>,
}

fn output(common: &CommonArgs, config: &ConfigFile) -> OutputSettings {
    OutputSettings {
        out_dir: common
            .out_dir
            .clone()
            .or_else(|| config.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from(".")),
        format: common.format.or(config.format).unwrap_or_default(),
    }
}

fn params(market: &MarketArgs, config: &ConfigFile) -> Result<ModelParams, CliError> {
    Ok(ModelParams::new(
        market.p.or(config.p).unwrap_or(DEFAULT_P),
        market.q.or(config.q).unwrap_or(DEFAULT_Q),
        market.alpha.or(config.alpha).unwrap_or(1.0),
    )?)
}

fn market(
    market: &MarketArgs,
    horizon: Option<usize>,
    config: &ConfigFile,
) -> Result<(MarketSpec, f64), CliError> {
    let spec = MarketSpec::new(
        params(market, config)?,
        market.cost.or(config.cost).unwrap_or(DEFAULT_COST),
        horizon.or(config.horizon).unwrap_or(DEFAULT_HORIZON),
    )?;
    Ok((spec, initial(market, config)?))
}

fn initial(market: &MarketArgs, config: &ConfigFile) -> Result<f64, CliError> {
    let f0 = market.f0.or(config.f0).unwrap_or(0.0);
    if !(0.0..=1.0).contains(&f0) {
        return Err(price_diffusion::Error::FractionOutOfRange(f0).into());
    }
    Ok(f0)
}

fn grid(grid: &GridArgs, config: &ConfigFile) -> Result<GridConfig, CliError> {
    let default = GridConfig::default();
    Ok(GridConfig::new(
        grid.grid_points
            .or(config.grid_points)
            .unwrap_or(default.n_points),
        grid.price_tol
            .or(config.price_tol)
            .unwrap_or(default.price_tolerance),
    )?)
}

impl FitArgs {
    pub fn resolve(&self) -> Result<FitSettings, CliError> {
        let config = ConfigFile::load(self.common.config.as_deref())?;
        let input = self
            .input
            .clone()
            .or_else(|| config.input.clone())
            .ok_or_else(|| CliError::Input("fit needs --input".into()))?;
        Ok(FitSettings {
            output: output(&self.common, &config),
            input,
            population: self.population.or(config.population),
            fixed_alpha: self.fixed_alpha.or(config.fixed_alpha),
            free_f0: self.free_f0.or(config.free_f0).unwrap_or(false),
            starts: self.starts.or(config.starts).unwrap_or(16),
            max_iterations: self
                .max_iterations
                .or(config.max_iterations)
                .unwrap_or(FitOptions::default().max_iterations),
            seed: self.common.seed.or(config.seed).unwrap_or(0),
        })
    }
}

impl PriceArgs {
    pub fn resolve(&self) -> Result<PriceSettings, CliError> {
        let config = ConfigFile::load(self.common.config.as_deref())?;
        let (market, f0) = market(&self.market, self.horizon, &config)?;
        Ok(PriceSettings {
            output: output(&self.common, &config),
            market,
            f0,
            grid: grid(&self.grid, &config)?,
        })
    }
}

impl SimulateArgs {
    pub fn resolve(&self) -> Result<SimulateSettings, CliError> {
        let config = ConfigFile::load(self.common.config.as_deref())?;
        let prices = self
            .prices
            .clone()
            .or_else(|| config.prices.clone())
            .ok_or_else(|| CliError::Input("simulate needs --prices".into()))?;
        let cost = self.market.cost.or(config.cost).unwrap_or(DEFAULT_COST);
        if !(cost.is_finite() && cost >= 0.0) {
            return Err(CliError::Input(format!(
                "cost {cost} must be finite and nonnegative"
            )));
        }
        Ok(SimulateSettings {
            output: output(&self.common, &config),
            params: params(&self.market, &config)?,
            cost,
            f0: initial(&self.market, &config)?,
            prices,
        })
    }
}

impl RebateArgs {
    pub fn resolve(&self) -> Result<RebateSettings, CliError> {
        let config = ConfigFile::load(self.common.config.as_deref())?;
        let (market, f0) = market(&self.market, self.horizon, &config)?;
        let sweep_beta = self
            .sweep_beta
            .clone()
            .or_else(|| config.sweep_beta.clone());
        if let Some(betas) = &sweep_beta {
            if betas.is_empty() {
                return Err(CliError::Input(
                    "--sweep-beta needs at least one value".into(),
                ));
            }
        }
        let scan_points = self.scan_points.or(config.scan_points).unwrap_or(64);
        if scan_points < 2 {
            return Err(CliError::Input(format!(
                "scan points {scan_points} must be at least 2"
            )));
        }
        Ok(RebateSettings {
            output: output(&self.common, &config),
            market,
            f0,
            beta: self.beta.or(config.beta).unwrap_or(DEFAULT_BETA),
            grid: grid(&self.grid, &config)?,
            scan_points,
            r_max: self.r_max.or(config.r_max),
            sweep_beta,
        })
    }
}
