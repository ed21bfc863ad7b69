//! The adoption law.
//!
//! A non-adopter adopts during a period with the logistic hazard
//! `R(F, π) = e^z / (1 + e^z)`, `z = p + qF − απ`, so the adopting fraction
//! evolves as `F⁺ = F + (1 − F) R(F, π)`. A seller with unit cost `C`
//! collects `(π − C)(1 − F) R(F, π)` in that period.

use serde::{Deserialize, Serialize};

use crate::error::{check_fraction, Error, Result};

/// Diffusion coefficients of the hazard law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Innovation coefficient. May be negative.
    pub p: f64,
    /// Imitation (peer-effect) coefficient.
    pub q: f64,
    /// Price sensitivity, per currency unit.
    pub alpha: f64,
}

impl ModelParams {
    pub fn new(p: f64, q: f64, alpha: f64) -> Result<Self> {
        if !p.is_finite() {
            return Err(Error::InvalidParameter {
                name: "p",
                value: p,
                reason: "must be finite",
            });
        }
        if !(q.is_finite() && q >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "q",
                value: q,
                reason: "must be finite and nonnegative",
            });
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                value: alpha,
                reason: "must be finite and positive",
            });
        }
        Ok(Self { p, q, alpha })
    }

    /// Parameters with `alpha = 1`.
    pub fn normalized(p: f64, q: f64) -> Result<Self> {
        Self::new(p, q, 1.0)
    }

    /// A per-unit rebate `r` lowers the consumer's net price to `π − r`,
    /// which is the same law with innovation coefficient `p + αr`.
    pub fn with_rebate(&self, rebate: f64) -> Self {
        Self {
            p: self.p + self.alpha * rebate,
            ..*self
        }
    }

    /// Exponent `p + qF − απ` of the logistic hazard.
    #[inline]
    pub fn exponent(&self, fraction: f64, price: f64) -> f64 {
        self.p + self.q * fraction - self.alpha * price
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            p: 0.0,
            q: 0.0,
            alpha: 1.0,
        }
    }
}

/// A pricing problem instance: diffusion law, unit cost and number of stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketSpec {
    pub params: ModelParams,
    /// Unit production cost `C`.
    pub cost: f64,
    /// Number of pricing stages `T`.
    pub horizon: usize,
}

impl MarketSpec {
    pub fn new(params: ModelParams, cost: f64, horizon: usize) -> Result<Self> {
        if !(cost.is_finite() && cost >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "cost",
                value: cost,
                reason: "must be finite and nonnegative",
            });
        }
        if horizon == 0 {
            return Err(Error::InvalidParameter {
                name: "horizon",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        Ok(Self {
            params,
            cost,
            horizon,
        })
    }

    pub fn with_params(&self, params: ModelParams) -> Self {
        Self { params, ..*self }
    }

    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        Self::new(self.params, self.cost, horizon)
    }

    pub(crate) fn require_normalized(&self) -> Result<()> {
        if self.params.alpha == 1.0 {
            Ok(())
        } else {
            Err(Error::AlphaNotNormalized(self.params.alpha))
        }
    }
}

/// A simulated adoption path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// `F_0 ..= F_T`.
    pub adoption: Vec<f64>,
    /// `π_0 .. π_{T-1}`.
    pub prices: Vec<f64>,
    /// Incremental profit earned in each stage.
    pub profits: Vec<f64>,
}

impl Trajectory {
    pub fn total_profit(&self) -> f64 {
        self.profits.iter().sum()
    }

    pub fn final_adoption(&self) -> f64 {
        *self.adoption.last().expect("trajectory always holds F_0")
    }

    /// Fraction of the population adopting in each stage.
    pub fn new_adopters(&self) -> Vec<f64> {
        self.adoption.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Logistic `e^z / (1 + e^z)` without overflow for large `|z|`.
#[inline]
pub(crate) fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Hazard without the domain check, for inner loops that already hold a valid `F`.
#[inline]
pub(crate) fn hazard_unchecked(params: &ModelParams, fraction: f64, price: f64) -> f64 {
    logistic(params.exponent(fraction, price))
}

#[inline]
pub(crate) fn step_unchecked(params: &ModelParams, fraction: f64, price: f64) -> f64 {
    let next = fraction + (1.0 - fraction) * hazard_unchecked(params, fraction, price);
    next.min(1.0)
}

#[inline]
pub(crate) fn profit_unchecked(params: &ModelParams, cost: f64, fraction: f64, price: f64) -> f64 {
    (price - cost) * (1.0 - fraction) * hazard_unchecked(params, fraction, price)
}

/// Probability that a non-adopter adopts this period.
pub fn hazard(params: &ModelParams, fraction: f64, price: f64) -> Result<f64> {
    check_fraction(fraction)?;
    Ok(hazard_unchecked(params, fraction, price))
}

/// One period of the adoption dynamics.
pub fn step(params: &ModelParams, fraction: f64, price: f64) -> Result<f64> {
    check_fraction(fraction)?;
    Ok(step_unchecked(params, fraction, price))
}

/// Profit earned in one period, `(π − C)(1 − F) R(F, π)`. Negative below cost.
pub fn incremental_profit(spec: &MarketSpec, fraction: f64, price: f64) -> Result<f64> {
    check_fraction(fraction)?;
    check_price(price)?;
    Ok(profit_unchecked(&spec.params, spec.cost, fraction, price))
}

fn check_price(price: f64) -> Result<()> {
    if price.is_finite() && price >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "price",
            value: price,
            reason: "prices must be finite and nonnegative",
        })
    }
}

/// Iterates [`step`] under a fixed price path of length `spec.horizon`.
pub fn simulate(spec: &MarketSpec, initial: f64, prices: &[f64]) -> Result<Trajectory> {
    if prices.len() != spec.horizon {
        return Err(Error::LengthMismatch {
            expected: spec.horizon,
            actual: prices.len(),
        });
    }
    simulate_path(&spec.params, spec.cost, initial, prices)
}

/// Like [`simulate`] but for a price path of any length.
pub(crate) fn simulate_path(
    params: &ModelParams,
    cost: f64,
    initial: f64,
    prices: &[f64],
) -> Result<Trajectory> {
    check_fraction(initial)?;
    let mut adoption = Vec::with_capacity(prices.len() + 1);
    let mut profits = Vec::with_capacity(prices.len());
    let mut f = initial;
    adoption.push(f);
    for &price in prices {
        check_price(price)?;
        profits.push(profit_unchecked(params, cost, f, price));
        f = step_unchecked(params, f, price);
        adoption.push(f);
    }
    Ok(Trajectory {
        adoption,
        prices: prices.to_vec(),
        profits,
    })
}

/// Rescales a market to `alpha = 1`.
///
/// Returns the normalized spec and the price scale `s = α`: a price `π` in
/// original units is `sπ` in the normalized problem, and normalized values
/// divide by `s` to return to original units.
pub fn normalize_alpha(spec: &MarketSpec) -> (MarketSpec, f64) {
    let scale = spec.params.alpha;
    let normalized = MarketSpec {
        params: ModelParams {
            alpha: 1.0,
            ..spec.params
        },
        cost: scale * spec.cost,
        horizon: spec.horizon,
    };
    (normalized, scale)
}
