//! Stackelberg rebate game between a policymaker (leader) and the monopolist.
//!
//! The policymaker announces a per-unit rebate `r`, fixed over the horizon,
//! and earns `V^p = (F_T − F_0)(1 − βr)`. The firm then prices optimally
//! against a market whose innovation coefficient is effectively `p + r`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::{step_unchecked, MarketSpec, Trajectory};
use crate::error::{check_fraction, Error, Result};
use crate::lambert::lambert_w0_exp;
use crate::pricing::{rollout, solve, GridConfig, PricingSolution};
use crate::scalar::{bisect_increasing, count_local_maxima, golden_section_max, Peak};

/// Rebate scan used by the multi-period solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RebateScan {
    pub points: usize,
    /// Largest rebate scanned; `None` means `1/β`, past which `V^p ≤ 0`.
    pub max_rebate: Option<f64>,
    pub tolerance: f64,
}

impl Default for RebateScan {
    fn default() -> Self {
        Self {
            points: 64,
            max_rebate: None,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    /// Market with `α = 1`.
    pub market: MarketSpec,
    /// Policymaker's rebate-aversion weight.
    pub beta: f64,
    pub initial: f64,
    pub scan: RebateScan,
    /// Grid for the firm's pricing problem when `T > 1`.
    pub grid: GridConfig,
}

impl GameSpec {
    pub fn new(market: MarketSpec, beta: f64, initial: f64) -> Result<Self> {
        market.require_normalized()?;
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidParameter {
                name: "beta",
                value: beta,
                reason: "must be finite and positive",
            });
        }
        check_fraction(initial)?;
        Ok(Self {
            market,
            beta,
            initial,
            scan: RebateScan::default(),
            grid: GridConfig::default(),
        })
    }

    pub fn with_scan(mut self, scan: RebateScan) -> Self {
        self.scan = scan;
        self
    }

    pub fn with_grid(mut self, grid: GridConfig) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_horizon(mut self, horizon: usize) -> Result<Self> {
        self.market = self.market.with_horizon(horizon)?;
        Ok(self)
    }

    pub fn max_rebate(&self) -> f64 {
        self.scan.max_rebate.unwrap_or(1.0 / self.beta)
    }

    pub fn policymaker_value(&self, final_adoption: f64, rebate: f64) -> f64 {
        (final_adoption - self.initial) * (1.0 - self.beta * rebate)
    }
}

/// Thresholds on `β` for the single-period game: a positive rebate is optimal
/// below `beta0`, and the net consumer price is nonpositive below `beta_hat`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub beta0: f64,
    pub beta_hat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub rebate: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RebateEquilibrium {
    pub r_star: f64,
    /// Firm's best-response price path at `r_star`.
    pub firm_prices: Vec<f64>,
    /// Adoption path `F_0 ..= F_T` at `r_star`.
    pub adoption: Vec<f64>,
    pub policymaker_value: f64,
    pub firm_profit: f64,
    pub final_adoption: f64,
    /// Present when the market has a single period.
    pub thresholds: Option<Thresholds>,
    /// `|r* + (1 + W(e^{p+qF_0+r*−(C+1)}))² − 1/β|`, single-period root solve only.
    pub root_residual: Option<f64>,
    /// Whether `π*(r*) > r*` agrees with `β > β̂`; single period only.
    pub sign_prediction_holds: Option<bool>,
    /// `(r, V^p)` samples from the multi-period scan.
    pub scan: Vec<ScanPoint>,
    /// Local maxima found on the scan curve; more than one flags multimodality.
    pub scan_local_maxima: usize,
}

/// The firm's optimal pricing under rebate `r`, rolled out from `F_0`.
pub fn firm_best_response(
    market: &MarketSpec,
    grid: &GridConfig,
    initial: f64,
    rebate: f64,
) -> Result<(PricingSolution, Trajectory)> {
    if !(rebate.is_finite() && rebate >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "rebate",
            value: rebate,
            reason: "must be finite and nonnegative",
        });
    }
    market.require_normalized()?;
    let shifted = market.with_params(market.params.with_rebate(rebate));
    let solution = solve(&shifted, grid)?;
    let trajectory = rollout(&solution, initial)?;
    Ok((solution, trajectory))
}

fn single_period_exponent(market: &MarketSpec, initial: f64) -> f64 {
    market.params.p + market.params.q * initial - (market.cost + 1.0)
}

/// `β₀ = (1 + W(e^{p+qF_0−(C+1)}))⁻²` and
/// `β̂ = (C + 1 + e^{p+qF_0} + (1 + e^{p+qF_0})²)⁻¹`.
pub fn beta_thresholds(market: &MarketSpec, initial: f64) -> Result<Thresholds> {
    market.require_normalized()?;
    check_fraction(initial)?;
    let w = lambert_w0_exp(single_period_exponent(market, initial));
    let beta0 = (1.0 + w).powi(-2);
    let growth = (market.params.p + market.params.q * initial).exp();
    let beta_hat = 1.0 / (market.cost + 1.0 + growth + (1.0 + growth) * (1.0 + growth));
    debug_assert!(beta_hat < beta0);
    Ok(Thresholds { beta0, beta_hat })
}

/// Left-hand side minus right-hand side of the single-period optimality
/// condition `1/β = r + (1 + W(e^{a+r}))²`; increasing in `r`.
fn rebate_condition(exponent: f64, beta: f64, rebate: f64) -> f64 {
    let w = lambert_w0_exp(exponent + rebate);
    rebate + (1.0 + w) * (1.0 + w) - 1.0 / beta
}

/// Closed-form equilibrium of the one-stage game.
pub fn solve_single_period(game: &GameSpec) -> Result<RebateEquilibrium> {
    let market = &game.market;
    if market.horizon != 1 {
        return Err(Error::HorizonMismatch {
            expected: 1,
            actual: market.horizon,
        });
    }
    market.require_normalized()?;
    let thresholds = beta_thresholds(market, game.initial)?;
    let exponent = single_period_exponent(market, game.initial);

    let (r_star, residual) = if game.beta >= thresholds.beta0 || game.initial >= 1.0 {
        (0.0, None)
    } else {
        let g = |r: f64| rebate_condition(exponent, game.beta, r);
        let mut hi = 1.0;
        while g(hi) <= 0.0 {
            hi *= 2.0;
        }
        let (lo, hi) = bisect_increasing(g, 0.0, hi, 0.0);
        let r = if g(hi).abs() < g(lo).abs() { hi } else { lo };
        (r, Some(g(r).abs()))
    };

    let params = market.params.with_rebate(r_star);
    let price = market.cost + 1.0 + lambert_w0_exp(exponent + r_star);
    let f1 = step_unchecked(&params, game.initial, price);
    let profit = (price - market.cost) * (f1 - game.initial);
    let sign_holds = (price > r_star) == (game.beta > thresholds.beta_hat);
    Ok(RebateEquilibrium {
        r_star,
        firm_prices: vec![price],
        adoption: vec![game.initial, f1],
        policymaker_value: game.policymaker_value(f1, r_star),
        firm_profit: profit,
        final_adoption: f1,
        thresholds: Some(thresholds),
        root_residual: residual,
        sign_prediction_holds: Some(sign_holds),
        scan: Vec::new(),
        scan_local_maxima: 1,
    })
}

fn leader_value(game: &GameSpec, rebate: f64) -> Result<(f64, Trajectory)> {
    let (_, trajectory) = firm_best_response(&game.market, &game.grid, game.initial, rebate)?;
    Ok((
        game.policymaker_value(trajectory.final_adoption(), rebate),
        trajectory,
    ))
}

/// Leader's value `V^p(r)` sampled on `rebates`, evaluated in parallel.
pub fn scan_leader_values(game: &GameSpec, rebates: &[f64]) -> Result<Vec<ScanPoint>> {
    rebates
        .par_iter()
        .map(|&rebate| leader_value(game, rebate).map(|(value, _)| ScanPoint { rebate, value }))
        .collect()
}

/// Equilibrium for any horizon by scanning `r` and refining the best scan
/// point with golden-section search.
pub fn solve_multi_period(game: &GameSpec) -> Result<RebateEquilibrium> {
    game.market.require_normalized()?;
    let points = game.scan.points.max(2);
    let r_max = game.max_rebate();
    if !(r_max.is_finite() && r_max > 0.0) {
        return Err(Error::InvalidParameter {
            name: "max_rebate",
            value: r_max,
            reason: "must be finite and positive",
        });
    }
    let width = r_max / (points - 1) as f64;
    let rebates: Vec<f64> = (0..points)
        .map(|i| {
            if i == points - 1 {
                r_max
            } else {
                width * i as f64
            }
        })
        .collect();
    let scan = scan_leader_values(game, &rebates)?;

    let mut best_index = 0;
    for (i, point) in scan.iter().enumerate() {
        if point.value > scan[best_index].value {
            best_index = i;
        }
    }
    let left = rebates[best_index.saturating_sub(1)];
    let right = rebates[(best_index + 1).min(points - 1)];

    let mut failure = None;
    let refined = golden_section_max(
        |r| match leader_value(game, r) {
            Ok((value, _)) => value,
            Err(e) => {
                failure = Some(e);
                f64::NEG_INFINITY
            }
        },
        left,
        right,
        game.scan.tolerance,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let best = Peak {
        x: scan[best_index].rebate,
        value: scan[best_index].value,
    }
    .better(refined);

    let (value, trajectory) = leader_value(game, best.x)?;
    let thresholds = if game.market.horizon == 1 {
        Some(beta_thresholds(&game.market, game.initial)?)
    } else {
        None
    };
    let values: Vec<f64> = scan.iter().map(|s| s.value).collect();
    Ok(RebateEquilibrium {
        r_star: best.x,
        firm_profit: trajectory.total_profit(),
        final_adoption: trajectory.final_adoption(),
        firm_prices: trajectory.prices,
        adoption: trajectory.adoption,
        policymaker_value: value,
        thresholds,
        root_residual: None,
        sign_prediction_holds: None,
        scan_local_maxima: count_local_maxima(&values),
        scan,
    })
}
