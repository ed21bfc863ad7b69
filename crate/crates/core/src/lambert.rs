//! Principal branch `W₀` of the Lambert-W function, the inverse of `w ↦ w eʷ`
//! on `[−1/e, ∞)`.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 50;
const RESIDUAL_TARGET: f64 = 1e-14;
const BRANCH_POINT: f64 = -1.0 / E;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WResult {
    pub value: f64,
    pub iterations: usize,
    /// `|W eᵂ − x|`.
    pub residual: f64,
}

fn initial_guess(x: f64) -> f64 {
    if x < -0.25 {
        // Branch-point series in sqrt(2(ex + 1)).
        let s = (2.0 * (E * x + 1.0)).max(0.0).sqrt();
        -1.0 + s - s * s / 3.0 + 11.0 / 72.0 * s * s * s
    } else if x <= E {
        let l = x.ln_1p();
        l * (1.0 - l.ln_1p() / (2.0 + l))
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    }
}

/// Evaluates `W₀(x)` by Halley iteration.
///
/// Iterates until `|w eʷ − x| ≤ 1e−14 · |x|`, the update stalls at
/// machine precision, or 50 iterations have run.
pub fn lambert_w0(x: f64) -> Result<WResult> {
    if x.is_nan() || x < BRANCH_POINT {
        return Err(Error::LambertDomain(x));
    }
    if x == 0.0 {
        return Ok(WResult {
            value: 0.0,
            iterations: 0,
            residual: 0.0,
        });
    }
    if x == f64::INFINITY {
        return Ok(WResult {
            value: f64::INFINITY,
            iterations: 0,
            residual: 0.0,
        });
    }
    if x == BRANCH_POINT {
        return Ok(WResult {
            value: -1.0,
            iterations: 0,
            residual: (-(-1.0f64).exp() - x).abs(),
        });
    }

    let scale = x.abs();
    let mut w = initial_guess(x);
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while iterations < MAX_ITERATIONS {
        let ew = w.exp();
        let f = w * ew - x;
        residual = f.abs();
        if residual <= RESIDUAL_TARGET * scale {
            break;
        }
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let next = (w - f / denom).max(-1.0);
        iterations += 1;
        let stalled = (next - w).abs() <= 4.0 * f64::EPSILON * w.abs().max(f64::MIN_POSITIVE);
        w = next;
        if stalled {
            residual = (w * w.exp() - x).abs();
            break;
        }
    }
    if residual > RESIDUAL_TARGET * scale {
        residual = (w * w.exp() - x).abs();
    }
    Ok(WResult {
        value: w,
        iterations,
        residual,
    })
}

/// `W₀(eᵃ)` for any real `a`, without forming `eᵃ` when it would overflow.
///
/// For `a > 1` solves `w + ln w = a` by Newton's method from `w = a − ln a`;
/// otherwise defers to [`lambert_w0`].
pub fn lambert_w0_exp(a: f64) -> f64 {
    if a.is_nan() {
        return f64::NAN;
    }
    if a <= 1.0 {
        return lambert_w0(a.exp())
            .map(|r| r.value)
            .expect("exp(a) is nonnegative");
    }
    if a == f64::INFINITY {
        return f64::INFINITY;
    }
    let mut w = a - a.ln();
    for _ in 0..MAX_ITERATIONS {
        // f(w) = w + ln w − a, f'(w) = (w + 1)/w
        let delta = (w + w.ln() - a) * w / (w + 1.0);
        w -= delta;
        if delta.abs() <= 2.0 * f64::EPSILON * w {
            break;
        }
    }
    w
}
