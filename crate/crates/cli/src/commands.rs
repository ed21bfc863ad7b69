//! Subcommand bodies. Every command writes its artifacts under the output
//! directory and returns the paths it wrote.

use std::fs;
use std::path::{Path, PathBuf};

use price_diffusion::pricing::{stationarity_residuals, StructureReport};
use price_diffusion::rebate::{scan_leader_values, ScanPoint};
use price_diffusion::{
    fit, normalize_alpha, rollout, simulate, solve, solve_multi_period, solve_single_period,
    verify_structure, FitOptions, GameSpec, GridConfig, MarketSpec, RebateScan, StageBound,
    Thresholds, Trajectory,
};
use serde::Serialize;

use crate::cli::{FitSettings, OutputSettings, PriceSettings, RebateSettings, SimulateSettings};
use crate::error::CliError;
use crate::ingest::{read_prices, read_series};
use crate::output::{write_json, Cell, Table};

fn prepare(output: &OutputSettings) -> Result<&Path, CliError> {
    fs::create_dir_all(&output.out_dir).map_err(|e| CliError::io(&output.out_dir, e))?;
    Ok(&output.out_dir)
}

/// Rows `t, F_t, price_t, new_adopters_t, profit_t`, then a terminal row with
/// `F_T` only.
pub fn trajectory_table(trajectory: &Trajectory) -> Table {
    let mut table = Table::new(["t", "F_t", "price_t", "new_adopters_t", "profit_t"]);
    let new = trajectory.new_adopters();
    for (t, price) in trajectory.prices.iter().enumerate() {
        table.push(vec![
            Cell::Int(t),
            Cell::Float(trajectory.adoption[t]),
            Cell::Float(*price),
            Cell::Float(new[t]),
            Cell::Float(trajectory.profits[t]),
        ]);
    }
    let last = trajectory.prices.len();
    table.push(vec![
        Cell::Int(last),
        Cell::Float(trajectory.adoption[last]),
        Cell::Empty,
        Cell::Empty,
        Cell::Empty,
    ]);
    table
}

#[derive(Debug, Serialize)]
struct FitReport<'a> {
    input: String,
    periods: usize,
    options: &'a FitOptions,
    p: f64,
    q: f64,
    alpha: f64,
    f0: f64,
    nrmse: f64,
    r_squared: f64,
    objective: f64,
    converged: bool,
    iterations: usize,
    multistart_best_of: usize,
    objective_history: &'a [f64],
}

pub fn run_fit(settings: &FitSettings) -> Result<Vec<PathBuf>, CliError> {
    let series = read_series(&settings.input, settings.population)?;
    let options = FitOptions {
        free_alpha: settings.fixed_alpha.is_none(),
        fixed_alpha: settings.fixed_alpha.unwrap_or(1.0),
        free_initial: settings.free_f0,
        starts: settings.starts,
        seed: settings.seed,
        max_iterations: settings.max_iterations,
        ..FitOptions::default()
    };
    let result = fit(&series, &options)?;
    let dir = prepare(&settings.output)?;

    let report = FitReport {
        input: settings.input.display().to_string(),
        periods: series.len(),
        options: &options,
        p: result.params.p,
        q: result.params.q,
        alpha: result.params.alpha,
        f0: result.f0,
        nrmse: result.nrmse,
        r_squared: result.r_squared,
        objective: result.objective,
        converged: result.converged,
        iterations: result.iterations,
        multistart_best_of: result.multistart_best_of,
        objective_history: &result.objective_history,
    };
    let mut table = Table::new(["period", "price", "observed", "fitted", "residual"]);
    for i in 0..series.len() {
        table.push(vec![
            Cell::Text(series.periods[i].clone()),
            Cell::Float(series.prices[i]),
            Cell::Float(series.adoption[i]),
            Cell::Float(result.model[i]),
            Cell::Float(result.residuals[i]),
        ]);
    }
    let written = vec![
        write_json(dir, "fit", &report)?,
        table.write(dir, "fit_path", settings.output.format)?,
    ];
    if !result.converged {
        return Err(CliError::NotConverged {
            objective: result.objective,
        });
    }
    Ok(written)
}

#[derive(Debug, Serialize)]
struct PriceReport<'a> {
    market: &'a MarketSpec,
    f0: f64,
    grid: &'a GridConfig,
    /// Prices in the normalized problem equal `price_scale` times original prices.
    price_scale: f64,
    value_0: f64,
    total_profit: f64,
    /// Search bounds per stage, in normalized price units.
    normalized_bounds: &'a [StageBound],
    widened_hits: &'a [usize],
    stationarity_residuals: Vec<f64>,
    structure: StructureReport,
}

pub fn run_price(settings: &PriceSettings) -> Result<Vec<PathBuf>, CliError> {
    let (normalized, scale) = normalize_alpha(&settings.market);
    let solution = solve(&normalized, &settings.grid)?;
    let normalized_path = rollout(&solution, settings.f0)?;
    let prices: Vec<f64> = normalized_path.prices.iter().map(|p| p / scale).collect();
    let trajectory = simulate(&settings.market, settings.f0, &prices)?;
    let dir = prepare(&settings.output)?;
    let format = settings.output.format;
    let horizon = settings.market.horizon;

    let mut values =
        Table::new(std::iter::once("F".to_string()).chain((0..horizon).map(|t| format!("V_{t}"))));
    let mut policies = Table::new(
        std::iter::once("F".to_string()).chain((0..horizon).map(|t| format!("price_{t}"))),
    );
    for (i, &f) in solution.grid.iter().enumerate() {
        values.push(
            std::iter::once(Cell::Float(f))
                .chain(
                    solution
                        .values
                        .iter()
                        .map(|row| Cell::Float(row[i] / scale)),
                )
                .collect(),
        );
        policies.push(
            std::iter::once(Cell::Float(f))
                .chain(
                    solution
                        .policies
                        .iter()
                        .map(|row| Cell::Float(row[i] / scale)),
                )
                .collect(),
        );
    }

    let report = PriceReport {
        market: &settings.market,
        f0: settings.f0,
        grid: &settings.grid,
        price_scale: scale,
        value_0: solution.value_at(0, settings.f0) / scale,
        total_profit: trajectory.total_profit(),
        normalized_bounds: &solution.bounds,
        widened_hits: &solution.widened_hits,
        stationarity_residuals: stationarity_residuals(&solution),
        structure: verify_structure(&solution),
    };
    Ok(vec![
        values.write(dir, "values", format)?,
        policies.write(dir, "policies", format)?,
        trajectory_table(&trajectory).write(dir, "rollout", format)?,
        write_json(dir, "structure", &report)?,
    ])
}

pub fn run_simulate(settings: &SimulateSettings) -> Result<Vec<PathBuf>, CliError> {
    let prices = read_prices(&settings.prices)?;
    let market = MarketSpec::new(settings.params, settings.cost, prices.len())?;
    let trajectory = simulate(&market, settings.f0, &prices)?;
    let dir = prepare(&settings.output)?;
    Ok(vec![trajectory_table(&trajectory).write(
        dir,
        "trajectory",
        settings.output.format,
    )?])
}

/// Equilibrium in original price units.
#[derive(Debug, Serialize)]
struct EquilibriumReport<'a> {
    market: &'a MarketSpec,
    f0: f64,
    beta: f64,
    r_star: f64,
    firm_prices: Vec<f64>,
    adoption: Vec<f64>,
    policymaker_value: f64,
    firm_profit: f64,
    final_adoption: f64,
    thresholds: Option<Thresholds>,
    root_residual: Option<f64>,
    sign_prediction_holds: Option<bool>,
    scan_local_maxima: usize,
}

struct Game {
    spec: GameSpec,
    scale: f64,
}

fn game(settings: &RebateSettings, beta: f64) -> Result<Game, CliError> {
    let (normalized, scale) = normalize_alpha(&settings.market);
    // V^p = ΔF (1 − β r) and r' = α r, so the normalized weight is β / α.
    let spec = GameSpec::new(normalized, beta / scale, settings.f0)?
        .with_grid(settings.grid)
        .with_scan(RebateScan {
            points: settings.scan_points,
            max_rebate: settings.r_max.map(|r| r * scale),
            ..RebateScan::default()
        });
    Ok(Game { spec, scale })
}

fn equilibrium<'a>(
    settings: &'a RebateSettings,
    beta: f64,
) -> Result<(EquilibriumReport<'a>, Vec<ScanPoint>), CliError> {
    let Game { spec, scale } = game(settings, beta)?;
    let (eq, scan) = if settings.market.horizon == 1 {
        let eq = solve_single_period(&spec)?;
        let n = spec.scan.points;
        let r_max = spec.max_rebate();
        let rebates: Vec<f64> = (0..n)
            .map(|i| {
                if i == n - 1 {
                    r_max
                } else {
                    r_max * i as f64 / (n - 1) as f64
                }
            })
            .collect();
        let scan = scan_leader_values(&spec, &rebates)?;
        (eq, scan)
    } else {
        let mut eq = solve_multi_period(&spec)?;
        let scan = std::mem::take(&mut eq.scan);
        (eq, scan)
    };
    let report = EquilibriumReport {
        market: &settings.market,
        f0: settings.f0,
        beta,
        r_star: eq.r_star / scale,
        firm_prices: eq.firm_prices.iter().map(|p| p / scale).collect(),
        adoption: eq.adoption,
        policymaker_value: eq.policymaker_value,
        firm_profit: eq.firm_profit / scale,
        final_adoption: eq.final_adoption,
        thresholds: eq.thresholds.map(|t| Thresholds {
            beta0: t.beta0 * scale,
            beta_hat: t.beta_hat * scale,
        }),
        root_residual: eq.root_residual,
        sign_prediction_holds: eq.sign_prediction_holds,
        scan_local_maxima: eq.scan_local_maxima,
    };
    let scan = scan
        .into_iter()
        .map(|s| ScanPoint {
            rebate: s.rebate / scale,
            value: s.value,
        })
        .collect();
    Ok((report, scan))
}

pub fn run_rebate(settings: &RebateSettings) -> Result<Vec<PathBuf>, CliError> {
    let format = settings.output.format;
    if let Some(betas) = &settings.sweep_beta {
        let mut table = Table::new([
            "beta",
            "r_star",
            "final_adoption",
            "policymaker_value",
            "firm_profit",
            "scan_local_maxima",
        ]);
        for &beta in betas {
            let (eq, _) = equilibrium(settings, beta)?;
            table.push(vec![
                Cell::Float(beta),
                Cell::Float(eq.r_star),
                Cell::Float(eq.final_adoption),
                Cell::Float(eq.policymaker_value),
                Cell::Float(eq.firm_profit),
                Cell::Int(eq.scan_local_maxima),
            ]);
        }
        let dir = prepare(&settings.output)?;
        return Ok(vec![table.write(dir, "sweep", format)?]);
    }

    let (report, scan) = equilibrium(settings, settings.beta)?;
    let mut table = Table::new(["rebate", "policymaker_value"]);
    for point in &scan {
        table.push(vec![Cell::Float(point.rebate), Cell::Float(point.value)]);
    }
    let dir = prepare(&settings.output)?;
    Ok(vec![
        write_json(dir, "equilibrium", &report)?,
        table.write(dir, "scan", format)?,
    ])
}
