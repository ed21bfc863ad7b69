//! Finite-horizon optimal pricing by backward induction.
//!
//! The profit-to-go `V_t(F)` is tabulated on a uniform grid over `F ∈ [0, 1]`.
//! The last stage is solved in closed form,
//!
//! ```text
//! π*_{T−1}(F) = C + 1 + W(e^{p + qF − (C+1)}),   V_{T−1}(F) = (1 − F) W(e^{p + qF − (C+1)}),
//! ```
//!
//! and each earlier stage maximizes `Q_t(F, π) = H(F, π) + V̂_{t+1}(F⁺(F, π))`
//! over a compact price interval, `V̂` being the piecewise-linear interpolant
//! of the next row.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::{
    logistic, profit_unchecked, simulate, step_unchecked, MarketSpec, Trajectory,
};
use crate::error::{check_fraction, Error, Result};
use crate::lambert::lambert_w0_exp;
use crate::scalar::{bisect_increasing, golden_section_max, scan_then_golden, Peak};

/// Points in the coarse price scan that precedes golden-section refinement.
pub const COARSE_SCAN_POINTS: usize = 16;

/// Factor applied to the stage bound before searching.
pub const BOUND_WIDENING: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Interpolation {
    #[default]
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub n_points: usize,
    pub price_tolerance: f64,
    pub interpolation: Interpolation,
}

impl GridConfig {
    pub fn new(n_points: usize, price_tolerance: f64) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::InvalidParameter {
                name: "n_points",
                value: n_points as f64,
                reason: "grid needs at least 2 points",
            });
        }
        if !(price_tolerance.is_finite() && price_tolerance > 0.0) {
            return Err(Error::InvalidParameter {
                name: "price_tolerance",
                value: price_tolerance,
                reason: "must be finite and positive",
            });
        }
        Ok(Self {
            n_points,
            price_tolerance,
            interpolation: Interpolation::Linear,
        })
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.n_points - 1) as f64
    }

    pub fn abscissae(&self) -> Vec<f64> {
        let last = self.n_points - 1;
        (0..self.n_points)
            .map(|i| {
                if i == last {
                    1.0
                } else {
                    i as f64 / last as f64
                }
            })
            .collect()
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_points: 2001,
            price_tolerance: 1e-7,
            interpolation: Interpolation::Linear,
        }
    }
}

/// Compact price interval for one stage's inner maximization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageBound {
    /// Max absolute slope of the next stage's interpolated value row.
    pub lipschitz: f64,
    /// `C + L + 1`.
    pub lower: f64,
    /// Smallest price past which `Q_t` cannot beat its value at `lower`.
    pub upper: f64,
    /// The interval actually searched, `[0, search_limit]`.
    pub search_limit: f64,
}

/// Value and policy tables of a solved pricing problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingSolution {
    pub spec: MarketSpec,
    pub config: GridConfig,
    pub grid: Vec<f64>,
    /// `values[t][i] = V_t(grid[i])`.
    pub values: Vec<Vec<f64>>,
    /// `policies[t][i] = π*_t(grid[i])`.
    pub policies: Vec<Vec<f64>>,
    /// Per-stage search bounds; the last stage's entry uses a zero next row.
    pub bounds: Vec<StageBound>,
    /// Per stage, how many grid points had their argmax beyond `bounds[t].upper`.
    pub widened_hits: Vec<usize>,
}

/// Evaluates the piecewise-linear interpolant of a row on the uniform unit grid.
#[inline]
pub(crate) fn interpolate(row: &[f64], f: f64) -> f64 {
    let last = row.len() - 1;
    let x = f.clamp(0.0, 1.0) * last as f64;
    let j = (x.floor() as usize).min(last - 1);
    let w = x - j as f64;
    (1.0 - w) * row[j] + w * row[j + 1]
}

fn max_slope(row: &[f64]) -> f64 {
    let n = (row.len() - 1) as f64;
    row.windows(2)
        .map(|w| ((w[1] - w[0]) * n).abs())
        .fold(0.0, f64::max)
}

/// Argument `p + qF − (c + 1)` of the closed-form last-stage solution.
#[inline]
fn last_stage_exponent(spec: &MarketSpec, f: f64, cost: f64) -> f64 {
    spec.params.p + spec.params.q * f - (cost + 1.0)
}

#[inline]
fn closed_form_price(spec: &MarketSpec, f: f64, cost: f64) -> f64 {
    cost + 1.0 + lambert_w0_exp(last_stage_exponent(spec, f, cost))
}

/// Unique maximizer of the one-period profit at adoption level `F`.
pub fn last_period_price(spec: &MarketSpec, fraction: f64) -> Result<f64> {
    spec.require_normalized()?;
    check_fraction(fraction)?;
    Ok(closed_form_price(spec, fraction, spec.cost))
}

/// Optimal one-period profit at adoption level `F`.
pub fn last_period_value(spec: &MarketSpec, fraction: f64) -> Result<f64> {
    spec.require_normalized()?;
    check_fraction(fraction)?;
    Ok((1.0 - fraction) * lambert_w0_exp(last_stage_exponent(spec, fraction, spec.cost)))
}

/// Builds the compact search interval for a stage from the next stage's value row.
///
/// With `L` the max slope of the row, `π̲ = C + L + 1` and the bound is the
/// smallest `π ≥ max(π̲, π̄*(1))` with `R(1, π)(π − (C − L)) ≤ R(0, π̲)`, where
/// `π̄*(1)` maximizes the left-hand side.
pub fn estimate_stage_bound(spec: &MarketSpec, next_values: &[f64]) -> StageBound {
    let lipschitz = if next_values.len() < 2 {
        0.0
    } else {
        max_slope(next_values)
    };
    let params = spec.params;
    let cost = spec.cost;
    let lower = cost + lipschitz + 1.0;
    let relaxed_cost = cost - lipschitz;
    let relaxed_peak =
        relaxed_cost + 1.0 + lambert_w0_exp(params.p + params.q - (relaxed_cost + 1.0));
    let target = logistic(params.p - lower);
    let envelope = |price: f64| logistic(params.p + params.q - price) * (price - relaxed_cost);

    let start = lower.max(relaxed_peak);
    let upper = if envelope(start) <= target {
        start
    } else {
        let mut step = 1.0_f64.max(start.abs());
        let mut hi = start + step;
        while envelope(hi) > target {
            step *= 2.0;
            hi = start + step;
        }
        let tol = 1e-12 * hi.max(1.0);
        bisect_increasing(|price| target - envelope(price), start, hi, tol).1
    };
    StageBound {
        lipschitz,
        lower,
        upper,
        search_limit: BOUND_WIDENING * upper,
    }
}

#[inline]
fn stage_objective(spec: &MarketSpec, next: &[f64], f: f64, price: f64) -> f64 {
    let params = &spec.params;
    profit_unchecked(params, spec.cost, f, price)
        + interpolate(next, step_unchecked(params, f, price))
}

/// Price at `F = 1` where profit vanishes identically: the stationarity
/// condition `π = C + 1 + B(1, π) − V'(1)`, solved in closed form with the
/// backward-difference slope of the next row.
fn saturated_price(spec: &MarketSpec, next: &[f64]) -> f64 {
    let n = next.len();
    let slope = (next[n - 1] - next[n - 2]) * (n - 1) as f64;
    closed_form_price(spec, 1.0, spec.cost - slope)
}

/// Solves the pricing problem for every stage and grid point.
pub fn solve(spec: &MarketSpec, config: &GridConfig) -> Result<PricingSolution> {
    spec.require_normalized()?;
    let config = GridConfig::new(config.n_points, config.price_tolerance)?;
    let grid = config.abscissae();
    let n = grid.len();
    let horizon = spec.horizon;

    let mut values = vec![Vec::new(); horizon];
    let mut policies = vec![Vec::new(); horizon];
    let mut bounds = vec![estimate_stage_bound(spec, &[]); horizon];
    let mut widened_hits = vec![0; horizon];

    let (last_policy, last_value): (Vec<f64>, Vec<f64>) = grid
        .iter()
        .map(|&f| {
            let a = last_stage_exponent(spec, f, spec.cost);
            let w = lambert_w0_exp(a);
            let value = if f >= 1.0 { 0.0 } else { (1.0 - f) * w };
            (spec.cost + 1.0 + w, value)
        })
        .unzip();
    policies[horizon - 1] = last_policy;
    values[horizon - 1] = last_value;

    for t in (0..horizon - 1).rev() {
        let next = &values[t + 1];
        let next_policy = &policies[t + 1];
        let bound = estimate_stage_bound(spec, next);
        let tol = config.price_tolerance;

        let peaks: Vec<Peak> = (0..n)
            .into_par_iter()
            .map(|i| {
                let f = grid[i];
                if i == n - 1 {
                    return Peak {
                        x: saturated_price(spec, next),
                        value: 0.0,
                    };
                }
                let objective = |price: f64| stage_objective(spec, next, f, price);
                let scanned =
                    scan_then_golden(objective, 0.0, bound.search_limit, COARSE_SCAN_POINTS, tol);
                // The next stage's price is always admissible; keeping it as a
                // candidate makes V_t ≥ V_{t+1} hold on the grid.
                let carried = next_policy[i].min(bound.search_limit);
                scanned.better(Peak {
                    x: carried,
                    value: objective(carried),
                })
            })
            .collect();

        widened_hits[t] = peaks.iter().filter(|pk| pk.x > bound.upper).count();
        policies[t] = peaks.iter().map(|pk| pk.x).collect();
        values[t] = peaks.iter().map(|pk| pk.value).collect();
        bounds[t] = bound;
    }

    Ok(PricingSolution {
        spec: *spec,
        config,
        grid,
        values,
        policies,
        bounds,
        widened_hits,
    })
}

impl PricingSolution {
    pub fn horizon(&self) -> usize {
        self.spec.horizon
    }

    pub fn spacing(&self) -> f64 {
        self.config.spacing()
    }

    /// Interpolated `V_t(F)`.
    pub fn value_at(&self, stage: usize, fraction: f64) -> f64 {
        interpolate(&self.values[stage], fraction)
    }

    /// Interpolated `π*_t(F)`.
    pub fn policy_at(&self, stage: usize, fraction: f64) -> f64 {
        interpolate(&self.policies[stage], fraction)
    }

    /// The stage objective `Q_t(F, π)`, using the interpolated next row.
    pub fn stage_objective(&self, stage: usize, fraction: f64, price: f64) -> f64 {
        if stage + 1 >= self.horizon() {
            profit_unchecked(&self.spec.params, self.spec.cost, fraction, price)
        } else {
            stage_objective(&self.spec, &self.values[stage + 1], fraction, price)
        }
    }

    /// Price chosen at `stage` when the adoption level is `F`: the interpolated
    /// policy, re-optimized within one cell's worth of policy variation.
    pub fn price_at(&self, stage: usize, fraction: f64) -> f64 {
        if stage + 1 >= self.horizon() {
            return closed_form_price(&self.spec, fraction, self.spec.cost);
        }
        let row = &self.policies[stage];
        let last = row.len() - 1;
        let x = fraction.clamp(0.0, 1.0) * last as f64;
        let j = (x.floor() as usize).min(last - 1);
        let guess = interpolate(row, fraction);
        let tol = self.config.price_tolerance;
        let half_width = (row[j + 1] - row[j]).abs().max(10.0 * tol);
        let lo = (guess - half_width).max(0.0);
        let hi = (guess + half_width)
            .min(self.bounds[stage].search_limit)
            .max(lo);
        let objective = |price: f64| self.stage_objective(stage, fraction, price);
        let refined = golden_section_max(objective, lo, hi, tol);
        refined
            .better(Peak {
                x: guess,
                value: objective(guess),
            })
            .x
    }
}

/// Rolls the optimal policy forward from `F_0`.
pub fn rollout(solution: &PricingSolution, initial: f64) -> Result<Trajectory> {
    check_fraction(initial)?;
    let params = solution.spec.params;
    let mut prices = Vec::with_capacity(solution.horizon());
    let mut f = initial;
    for t in 0..solution.horizon() {
        let price = solution.price_at(t, f);
        prices.push(price);
        f = step_unchecked(&params, f, price);
    }
    simulate(&solution.spec, initial, &prices)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructuralProperty {
    /// Each policy row nondecreasing in `F`.
    PolicyIncreasingInAdoption,
    /// Policy rows nonincreasing in `t` at fixed `F`.
    PolicyDecreasingInTime,
    /// Each value row nonincreasing in `F`.
    ValueDecreasingInAdoption,
    /// Each value row concave (second differences).
    ValueConcave,
    /// Every policy entry strictly positive.
    PolicyPositive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub property: StructuralProperty,
    pub passed: bool,
    /// Worst signed slack; negative means violated by that much before tolerance.
    pub worst_margin: f64,
    /// `(stage, grid index)` of the worst slack.
    pub worst_at: (usize, usize),
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    /// True when `q ≤ 1`, the regime where all properties are guaranteed.
    pub asserted: bool,
    pub checks: Vec<PropertyCheck>,
}

impl StructureReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, property: StructuralProperty) -> &PropertyCheck {
        self.checks
            .iter()
            .find(|c| c.property == property)
            .expect("every property is measured")
    }

    /// Failed checks that the regime guarantees should hold.
    pub fn violations(&self) -> Vec<&PropertyCheck> {
        if self.asserted {
            self.checks.iter().filter(|c| !c.passed).collect()
        } else {
            Vec::new()
        }
    }
}

struct Worst {
    margin: f64,
    at: (usize, usize),
}

impl Worst {
    fn new() -> Self {
        Self {
            margin: f64::INFINITY,
            at: (0, 0),
        }
    }

    fn observe(&mut self, margin: f64, at: (usize, usize)) {
        if margin < self.margin {
            self.margin = margin;
            self.at = at;
        }
    }

    fn into_check(self, property: StructuralProperty, tolerance: f64) -> PropertyCheck {
        PropertyCheck {
            property,
            passed: self.margin >= -tolerance,
            worst_margin: self.margin,
            worst_at: self.at,
            tolerance,
        }
    }
}

/// Default base tolerance for [`verify_structure`].
pub const STRUCTURE_TOLERANCE: f64 = 1e-6;

/// Measures the monotonicity and concavity structure of a solution, with the
/// default tolerance of `1e−6`.
pub fn verify_structure(solution: &PricingSolution) -> StructureReport {
    verify_structure_with(solution, STRUCTURE_TOLERANCE)
}

/// As [`verify_structure`] with base tolerance `tol`. Comparisons between
/// neighbouring grid points (properties on `F`) use `tol · h` for grid
/// spacing `h`; the same-point comparison across stages uses `tol`.
pub fn verify_structure_with(solution: &PricingSolution, tol: f64) -> StructureReport {
    let h = solution.spacing();
    let horizon = solution.horizon();

    let mut policy_in_f = Worst::new();
    let mut policy_in_t = Worst::new();
    let mut value_in_f = Worst::new();
    let mut concave = Worst::new();
    let mut positive = Worst::new();

    for t in 0..horizon {
        let pol = &solution.policies[t];
        let val = &solution.values[t];
        for i in 0..pol.len() {
            positive.observe(pol[i], (t, i));
            if i + 1 < pol.len() {
                policy_in_f.observe(pol[i + 1] - pol[i], (t, i));
                value_in_f.observe(val[i] - val[i + 1], (t, i));
            }
            if i >= 1 && i + 1 < val.len() {
                concave.observe(-(val[i - 1] - 2.0 * val[i] + val[i + 1]), (t, i));
            }
            if t + 1 < horizon {
                policy_in_t.observe(pol[i] - solution.policies[t + 1][i], (t, i));
            }
        }
    }
    if horizon == 1 {
        policy_in_t.margin = 0.0;
    }

    let mut positive_check = positive.into_check(StructuralProperty::PolicyPositive, 0.0);
    positive_check.passed = positive_check.worst_margin > 0.0;

    StructureReport {
        asserted: solution.spec.params.q <= 1.0,
        checks: vec![
            policy_in_f.into_check(StructuralProperty::PolicyIncreasingInAdoption, tol * h),
            policy_in_t.into_check(StructuralProperty::PolicyDecreasingInTime, tol),
            value_in_f.into_check(StructuralProperty::ValueDecreasingInAdoption, tol * h),
            concave.into_check(StructuralProperty::ValueConcave, tol * h),
            positive_check,
        ],
    }
}

/// Per stage `t < T−1`, the largest `|C + 1 − π* + B(F, π*) − V'_{t+1}(F⁺)|`
/// over interior grid points, with `V'` from central differences of the next row.
pub fn stationarity_residuals(solution: &PricingSolution) -> Vec<f64> {
    let spec = &solution.spec;
    let horizon = solution.horizon();
    let h = solution.spacing();
    (0..horizon.saturating_sub(1))
        .map(|t| {
            let next = &solution.values[t + 1];
            let n = next.len();
            let derivative: Vec<f64> = (0..n)
                .map(|i| {
                    let lo = i.saturating_sub(1);
                    let hi = (i + 1).min(n - 1);
                    (next[hi] - next[lo]) / ((hi - lo) as f64 * h)
                })
                .collect();
            (1..n - 1)
                .map(|i| {
                    let f = solution.grid[i];
                    let price = solution.policies[t][i];
                    let b = spec.params.exponent(f, price).exp();
                    let f_next = step_unchecked(&spec.params, f, price);
                    (spec.cost + 1.0 - price + b - interpolate(&derivative, f_next)).abs()
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

/// `V_0(F_0)` at each grid resolution, for judging discretization error.
pub fn grid_convergence(
    spec: &MarketSpec,
    initial: f64,
    resolutions: &[usize],
    price_tolerance: f64,
) -> Result<Vec<(usize, f64)>> {
    check_fraction(initial)?;
    resolutions
        .iter()
        .map(|&n| {
            let config = GridConfig::new(n, price_tolerance)?;
            let solution = solve(spec, &config)?;
            Ok((n, solution.value_at(0, initial)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{incremental_profit, ModelParams};
    use crate::scalar::golden_section_max;

    fn market(p: f64, q: f64, cost: f64, horizon: usize) -> MarketSpec {
        MarketSpec::new(ModelParams::normalized(p, q).unwrap(), cost, horizon).unwrap()
    }

    #[test]
    fn last_period_examples() {
        let spec = market(1.0, 1.0, 1.0, 1);
        // mpmath golden-section maximizers of H on [0, 20]
        let price = last_period_price(&spec, 0.0).unwrap();
        assert!((price - 2.278_464_542_761_074).abs() < 1e-12);
        let value = last_period_value(&spec, 0.0).unwrap();
        assert!((value - 0.278_464_542_761_073_8).abs() < 1e-12);

        let zero = market(0.0, 0.0, 0.0, 1);
        assert!((last_period_price(&zero, 0.0).unwrap() - 1.278_464_542_761_074).abs() < 1e-12);

        assert_eq!(last_period_value(&spec, 1.0).unwrap(), 0.0);
        assert!(last_period_price(&spec, 1.0).unwrap() > last_period_price(&spec, 0.0).unwrap());
    }

    #[test]
    fn last_period_matches_golden_oracle() {
        let spec = market(0.3, 2.5, 0.7, 1);
        for &f in &[0.0, 0.2, 0.55, 0.9] {
            let oracle = golden_section_max(
                |pi| incremental_profit(&spec, f, pi).unwrap(),
                0.0,
                20.0,
                1e-11,
            );
            let price = last_period_price(&spec, f).unwrap();
            assert!((price - oracle.x).abs() < 1e-7, "F={f}");
            let value = last_period_value(&spec, f).unwrap();
            assert!((value - incremental_profit(&spec, f, price).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_unnormalized_alpha() {
        let spec = MarketSpec::new(ModelParams::new(1.0, 1.0, 2.0).unwrap(), 1.0, 2).unwrap();
        assert_eq!(
            last_period_price(&spec, 0.0),
            Err(Error::AlphaNotNormalized(2.0))
        );
        assert!(solve(&spec, &GridConfig::default()).is_err());
        assert!(GridConfig::new(1, 1e-7).is_err());
        assert!(GridConfig::new(11, 0.0).is_err());
    }

    #[test]
    fn terminal_bound_collapses_to_single_period() {
        let spec = market(1.0, 1.0, 1.0, 1);
        let bound = estimate_stage_bound(&spec, &[0.0; 11]);
        assert_eq!(bound.lipschitz, 0.0);
        assert_eq!(bound.lower, 2.0);
        assert!(bound.upper >= last_period_price(&spec, 1.0).unwrap());
    }

    #[test]
    fn bound_condition_holds_beyond_upper() {
        let spec = market(0.5, 3.0, 1.0, 2);
        let row: Vec<f64> = (0..21).map(|i| 0.4 * (1.0 - i as f64 / 20.0)).collect();
        let bound = estimate_stage_bound(&spec, &row);
        let l = bound.lipschitz;
        assert!((l - 0.4).abs() < 1e-12);
        let target = logistic(spec.params.p - bound.lower);
        for k in 0..50 {
            let pi = bound.upper + k as f64 * 0.37;
            let lhs = logistic(spec.params.p + spec.params.q - pi) * (pi - (spec.cost - l));
            assert!(lhs <= target * (1.0 + 1e-9));
        }
    }

    #[test]
    fn single_stage_solve_is_closed_form() {
        let spec = market(1.0, 1.0, 1.0, 1);
        let config = GridConfig::new(101, 1e-7).unwrap();
        let sol = solve(&spec, &config).unwrap();
        for (i, &f) in sol.grid.iter().enumerate() {
            assert_eq!(sol.policies[0][i], last_period_price(&spec, f).unwrap());
            if f < 1.0 {
                assert_eq!(sol.values[0][i], last_period_value(&spec, f).unwrap());
            }
        }
    }

    #[test]
    fn two_stage_values_dominate() {
        let spec = market(1.0, 1.0, 1.0, 2);
        let sol = solve(&spec, &GridConfig::new(201, 1e-7).unwrap()).unwrap();
        for i in 0..sol.grid.len() {
            assert!(sol.values[0][i] >= sol.values[1][i] - 1e-12);
        }
        assert_eq!(sol.values[0][200], 0.0);
    }

    #[test]
    fn rollout_from_saturation_is_flat() {
        let spec = market(1.0, 1.0, 1.0, 3);
        let sol = solve(&spec, &GridConfig::new(101, 1e-7).unwrap()).unwrap();
        let traj = rollout(&sol, 1.0).unwrap();
        assert_eq!(traj.adoption, vec![1.0; 4]);
        assert_eq!(traj.total_profit(), 0.0);
        assert!(rollout(&sol, -0.1).is_err());
    }

    #[test]
    fn interpolation_is_exact_on_nodes() {
        let row = [0.0, 1.0, 4.0, 9.0, 16.0];
        assert_eq!(interpolate(&row, 0.5), 4.0);
        assert_eq!(interpolate(&row, 1.0), 16.0);
        assert!((interpolate(&row, 0.625) - 6.5).abs() < 1e-15);
    }
}
