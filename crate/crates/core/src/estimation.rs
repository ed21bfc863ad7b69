//! Least-squares estimation of `(p, q, α)` from observed adoption and prices.
//!
//! Period `t`'s price drives adoption during that period, so the model path is
//! `F̂_0 = F_0` and `F̂_t = F̂_{t−1} + (1 − F̂_{t−1}) R(F̂_{t−1}, π_t)`.
//! The fit minimizes `Σ_t (F_t − F̂_t)²` on adoption levels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::{simulate_path, ModelParams};
use crate::error::{Error, Result};
use crate::nelder_mead::{minimize, Minimum, SimplexOptions};

pub const MIN_PERIODS: usize = 4;

/// Observed cumulative adoption and prices, one entry per period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdoptionSeries {
    pub periods: Vec<String>,
    pub prices: Vec<f64>,
    pub adoption: Vec<f64>,
}

impl AdoptionSeries {
    pub fn new(periods: Vec<String>, prices: Vec<f64>, adoption: Vec<f64>) -> Result<Self> {
        let n = adoption.len();
        if prices.len() != n || periods.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: if prices.len() != n {
                    prices.len()
                } else {
                    periods.len()
                },
            });
        }
        if n < MIN_PERIODS {
            return Err(Error::TooFewPeriods(n));
        }
        for (index, (&price, &f)) in prices.iter().zip(&adoption).enumerate() {
            if !(price.is_finite() && price > 0.0) {
                return Err(Error::InvalidSeries {
                    index,
                    reason: format!("price {price} must be positive"),
                });
            }
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidSeries {
                    index,
                    reason: format!("adoption {f} is outside [0, 1]"),
                });
            }
            if index > 0 && f < adoption[index - 1] {
                return Err(Error::InvalidSeries {
                    index,
                    reason: format!("adoption decreases from {} to {f}", adoption[index - 1]),
                });
            }
        }
        Ok(Self {
            periods,
            prices,
            adoption,
        })
    }

    /// Series with periods labelled `0, 1, 2, ...`.
    pub fn unlabelled(prices: Vec<f64>, adoption: Vec<f64>) -> Result<Self> {
        let periods = (0..adoption.len()).map(|i| i.to_string()).collect();
        Self::new(periods, prices, adoption)
    }

    pub fn len(&self) -> usize {
        self.adoption.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adoption.is_empty()
    }

    fn is_constant(&self) -> bool {
        self.adoption.iter().all(|&f| f == self.adoption[0])
    }
}

/// Model adoption path `[F_0, F_1, ..., F_n]` under `n` prices.
pub fn predict(params: &ModelParams, initial: f64, prices: &[f64]) -> Result<Vec<f64>> {
    Ok(simulate_path(params, 0.0, initial, prices)?.adoption)
}

/// `‖data − model‖₂ / ‖data − mean(data)‖₂`.
pub fn nrmse(data: &[f64], model: &[f64]) -> Result<f64> {
    if data.len() != model.len() {
        return Err(Error::LengthMismatch {
            expected: data.len(),
            actual: model.len(),
        });
    }
    if data.len() < 2 {
        return Err(Error::TooFewPeriods(data.len()));
    }
    let mean = data.iter().sum::<f64>() / data.len() as f64;
    let spread = data.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>();
    if spread == 0.0 {
        return Err(Error::DegenerateData);
    }
    let error = data
        .iter()
        .zip(model)
        .map(|(d, m)| (d - m) * (d - m))
        .sum::<f64>();
    Ok(error.sqrt() / spread.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Estimate `α`; otherwise hold it at `fixed_alpha`.
    pub free_alpha: bool,
    pub fixed_alpha: f64,
    /// Estimate `F_0`; otherwise use the first observation.
    pub free_initial: bool,
    pub starts: usize,
    pub seed: u64,
    pub diameter_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            free_alpha: true,
            fixed_alpha: 1.0,
            free_initial: false,
            starts: 16,
            seed: 0,
            diameter_tolerance: 1e-9,
            max_iterations: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: ModelParams,
    pub f0: f64,
    pub nrmse: f64,
    pub r_squared: f64,
    /// Model minus data, per period.
    pub residuals: Vec<f64>,
    /// Fitted adoption path, aligned with the observations.
    pub model: Vec<f64>,
    /// Sum of squared residuals.
    pub objective: f64,
    pub converged: bool,
    /// Number of starts the winner was selected from.
    pub multistart_best_of: usize,
    pub iterations: usize,
    /// Best objective after each simplex iteration of the winning run.
    pub objective_history: Vec<f64>,
}

/// Maps between the optimizer's coordinate vector and model parameters.
/// Coordinates are `[p, q, ln α?, F_0?]`.
struct Layout<'a> {
    series: &'a AdoptionSeries,
    options: &'a FitOptions,
}

impl Layout<'_> {
    fn decode(&self, x: &[f64]) -> Option<(ModelParams, f64)> {
        let (p, q) = (x[0], x[1]);
        let mut k = 2;
        let alpha = if self.options.free_alpha {
            k += 1;
            x[2].exp()
        } else {
            self.options.fixed_alpha
        };
        let f0 = if self.options.free_initial {
            x[k]
        } else {
            self.series.adoption[0]
        };
        if !(0.0..=1.0).contains(&f0) {
            return None;
        }
        ModelParams::new(p, q, alpha)
            .ok()
            .map(|params| (params, f0))
    }

    fn path(&self, params: &ModelParams, f0: f64) -> Vec<f64> {
        predict(params, f0, &self.series.prices[1..]).expect("validated inputs")
    }

    fn objective(&self, x: &[f64]) -> f64 {
        match self.decode(x) {
            None => f64::INFINITY,
            Some((params, f0)) => self
                .path(&params, f0)
                .iter()
                .zip(&self.series.adoption)
                .map(|(m, d)| (m - d) * (m - d))
                .sum(),
        }
    }

    fn sample_start(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut x = vec![rng.gen_range(-5.0..5.0), rng.gen_range(0.0..10.0)];
        if self.options.free_alpha {
            x.push(rng.gen_range(0.01f64.ln()..10f64.ln()));
        }
        if self.options.free_initial {
            x.push(self.series.adoption[0]);
        }
        x
    }
}

/// Runs the simplex, restarting from its own optimum until a restart no
/// longer improves the objective.
fn polish<F: Fn(&[f64]) -> f64>(
    objective: F,
    start: Vec<f64>,
    options: &SimplexOptions,
) -> Minimum {
    let mut best = minimize(&objective, &start, options);
    for _ in 0..8 {
        let restart_options = SimplexOptions {
            initial_step: 0.01,
            max_iterations: options.max_iterations,
            ..*options
        };
        let again = minimize(&objective, &best.point, &restart_options);
        let improved = again.value < best.value;
        let mut history = std::mem::take(&mut best.history);
        let floor = history.last().copied().unwrap_or(best.value);
        history.extend(again.history.iter().map(|v| v.min(floor)));
        let iterations = best.iterations + again.iterations;
        if improved {
            best = Minimum {
                history,
                iterations,
                ..again
            };
        } else {
            best.history = history;
            best.iterations = iterations;
            best.converged &= again.converged;
            break;
        }
    }
    best
}

/// Fits the model by multi-start simplex least squares.
pub fn fit(series: &AdoptionSeries, options: &FitOptions) -> Result<FitResult> {
    if series.len() < MIN_PERIODS {
        return Err(Error::TooFewPeriods(series.len()));
    }
    if series.is_constant() {
        return Err(Error::DegenerateData);
    }
    if !options.free_alpha && !(options.fixed_alpha.is_finite() && options.fixed_alpha > 0.0) {
        return Err(Error::InvalidParameter {
            name: "fixed_alpha",
            value: options.fixed_alpha,
            reason: "must be finite and positive",
        });
    }
    let layout = Layout { series, options };
    let simplex = SimplexOptions {
        diameter_tolerance: options.diameter_tolerance,
        max_iterations: options.max_iterations,
        ..SimplexOptions::default()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let starts: Vec<Vec<f64>> = (0..options.starts.max(1))
        .map(|_| layout.sample_start(&mut rng))
        .collect();
    let runs: Vec<Minimum> = starts
        .into_par_iter()
        .map(|start| polish(|x| layout.objective(x), start, &simplex))
        .collect();
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.value < a.value { b } else { a })
        .expect("at least one start");

    let (params, f0) = layout
        .decode(&best.point)
        .expect("optimum has a finite objective");
    let model = layout.path(&params, f0);
    let nrmse = nrmse(&series.adoption, &model)?;
    let residuals = model
        .iter()
        .zip(&series.adoption)
        .map(|(m, d)| m - d)
        .collect();
    Ok(FitResult {
        params,
        f0,
        nrmse,
        r_squared: 1.0 - nrmse * nrmse,
        residuals,
        model,
        objective: best.value,
        converged: best.converged,
        multistart_best_of: options.starts.max(1),
        iterations: best.iterations,
        objective_history: best.history,
    })
}
